import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualcurv import bodies as bd
from dualcurv.bodies import Ball, GeometryError, Polytope
from dualcurv.core_convex import (
    BodyIndicator,
    DomainError,
    EmptyDomainError,
    GridSampled,
    GridSpec,
    LogConcaveFunction,
    MaxAffine,
    Quadratic,
    ScaledNorm,
    SupportFn,
    conjugate,
    convexify,
    evaluate,
    gradient,
    is_discretely_convex,
    level_set,
    sample,
    sup_convolve,
)


# grids ---------------------------------------------------------------------------------------


def test_grid_origin_is_a_node():
    G = GridSpec(2, 4.0, 9)
    assert G.h == pytest.approx(1.0)
    assert G.axis[4] == 0.0
    assert G.axis[0] == -4.0 and G.axis[-1] == 4.0


@pytest.mark.parametrize("nodes", [2, 4, 1])
def test_grid_rejects_even_or_tiny_node_counts(nodes):
    with pytest.raises(ValueError):
        GridSpec(2, 1.0, nodes)


def test_grid_rejects_bad_dimension_and_radius():
    with pytest.raises(ValueError):
        GridSpec(4, 1.0, 5)
    with pytest.raises(ValueError):
        GridSpec(2, 0.0, 5)


def test_with_spacing_is_fine_enough():
    G = GridSpec.with_spacing(2, 3.0, 0.07)
    assert G.h <= 0.07 and G.nodes % 2 == 1


def test_grid_values_reject_nan_and_minus_inf():
    G = GridSpec(1, 1.0, 5)
    with pytest.raises(ValueError):
        GridSampled(G, np.array([0, 1, np.nan, 1, 0.0]))
    with pytest.raises(ValueError):
        GridSampled(G, np.array([0, 1, -np.inf, 1, 0.0]))


def test_even_flag_requires_exact_symmetry():
    G = GridSpec(1, 1.0, 5)
    with pytest.raises(ValueError):
        GridSampled(G, np.array([1.0, 0.5, 0.0, 0.5, 1.0 + 1e-15]), even=True)


def test_grid_values_are_read_only():
    rep = sample(Quadratic(1.0), GridSpec(2, 1.0, 5))
    with pytest.raises(ValueError):
        rep.values[0, 0] = 3.0


def test_log_concave_rejects_nonconvex_grid():
    G = GridSpec(1, 1.0, 5)
    with pytest.raises(ValueError):
        LogConcaveFunction(GridSampled(G, np.array([0.0, 1.0, 0.0, 1.0, 0.0])))


# conjugate -----------------------------------------------------------------------------------


def test_quadratic_is_self_dual():
    star = conjugate(Quadratic(1.0))
    assert isinstance(star, Quadratic) and star.a == 1.0 and star.b == 0.0


def test_scaled_norm_conjugate_is_shifted_ball_indicator():
    A, c = 3.0, 1.5
    star = conjugate(ScaledNorm(c, math.log(A)))
    assert isinstance(star, BodyIndicator)
    assert star.body == Ball(c) and star.offset == pytest.approx(-math.log(A))
    assert evaluate(star, [[1.0, 0.5]])[0] == pytest.approx(-math.log(A))
    assert evaluate(star, [[1.6, 0.0]])[0] == math.inf


def test_interval_indicator_conjugate_is_absolute_value():
    star = conjugate(BodyIndicator(Ball(1.0, 1)))
    assert isinstance(star, SupportFn)
    y = np.linspace(-3, 3, 13)[:, None]
    np.testing.assert_allclose(evaluate(star, y), np.abs(y[:, 0]))


def test_conjugate_of_support_function_is_indicator(square):
    star = conjugate(SupportFn(square))
    assert isinstance(star, BodyIndicator) and star.body is square


def test_grid_conjugate_of_quadratic_within_2h_lip():
    G = GridSpec(2, 4.0, 129)
    star = conjugate(sample(Quadratic(1.0), G), G)
    exact = 0.5 * np.sum(G.points() ** 2, axis=-1)
    assert np.abs(star.values - exact).max() <= 2 * G.h * 4.0 * math.sqrt(2)
    assert is_discretely_convex(star.values)


def test_grid_conjugate_of_polygon_indicator_matches_support(square):
    G = GridSpec(2, 4.0, 129)
    star = conjugate(sample(BodyIndicator(square), G), G)
    exact = bd.support(square, G.points().reshape(-1, 2)).reshape(G.shape)
    assert np.abs(star.values - exact).max() <= 2 * G.h * math.sqrt(2)


def test_identically_infinite_grid_is_rejected():
    G = GridSpec(1, 1.0, 5)
    with pytest.raises(EmptyDomainError, match="empty effective domain"):
        GridSampled(G, np.full(5, np.inf))


def test_max_affine_conjugate_matches_linear_program():
    rep = MaxAffine(np.array([[-1.0], [2.0]]), np.array([0.5, -1.0]))
    G = GridSpec(1, 3.0, 61)
    star = conjugate(rep, G)
    # phi* is the lower envelope of offsets over convex slope combinations
    y = G.axis
    fin = np.isfinite(star.values)
    lam = (y[fin] + 1.0) / 3.0
    exact = -(lam * -1.0 + (1 - lam) * 0.5)
    np.testing.assert_allclose(star.values[fin], exact, atol=1e-12)
    assert np.all((y[fin] >= -1 - 1e-12) & (y[fin] <= 2 + 1e-12))


@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_conjugate_reverses_order(seed, dim):
    rng = np.random.default_rng(seed)
    G = GridSpec(dim, 2.0, 9 if dim == 2 else 33)
    base = rng.uniform(-1.0, 1.0, G.shape)
    bump = rng.uniform(0.0, 1.0, G.shape)
    c1 = conjugate(GridSampled(G, base), G).values
    c2 = conjugate(GridSampled(G, base + bump), G).values
    assert np.all(c1 >= c2)


@given(st.integers(0, 10_000))
def test_conjugate_of_even_function_is_exactly_even(seed):
    rng = np.random.default_rng(seed)
    G = GridSpec(2, 2.0, 17)
    v = rng.uniform(0.0, 1.0, G.shape) + np.sum(G.points() ** 2, axis=-1)
    v = 0.5 * (v + v[::-1, ::-1])
    star = conjugate(GridSampled(G, v, even=True), G)
    assert np.array_equal(star.values, star.values[::-1, ::-1])


# convexify -----------------------------------------------------------------------------------


def _lower_envelope(x, v):
    out = v.copy()
    for i in range(len(x)):
        for j in range(i + 1):
            for k in range(i, len(x)):
                if j < i < k:
                    lam = (x[k] - x[i]) / (x[k] - x[j])
                    out[i] = min(out[i], lam * v[j] + (1 - lam) * v[k])
    return out


def test_convexify_matches_brute_force_envelope():
    G = GridSpec(1, 3.0, 61)
    x = G.axis
    v = np.abs(x**2 - 1)
    env = convexify(GridSampled(G, v), GridSpec(1, 8.0, 321))
    brute = _lower_envelope(x, v)
    assert np.abs(env.values - brute).max() <= 2 * G.h
    closed = np.where(np.abs(x) <= 1, 0.0, x**2 - 1)
    assert np.abs(env.values - closed).max() <= 2 * G.h


def test_convexify_is_involution_on_convex_input():
    G = GridSpec(1, 3.0, 61)
    rep = sample(Quadratic(1.0, 1), G)
    env = convexify(rep)
    assert np.abs(env.values - rep.values).max() <= 2 * G.h * 3.0


@given(st.integers(0, 10_000))
def test_convexify_preserves_nonnegativity(seed):
    rng = np.random.default_rng(seed)
    G = GridSpec(2, 2.0, 17)
    env = convexify(GridSampled(G, rng.uniform(0.0, 3.0, G.shape)))
    assert env.values.min() >= -1e-9
    assert is_discretely_convex(env.values)


def test_convexify_preserves_evenness():
    rng = np.random.default_rng(3)
    G = GridSpec(2, 2.0, 17)
    v = rng.uniform(0.0, 3.0, G.shape)
    v = 0.5 * (v + v[::-1, ::-1])
    env = convexify(GridSampled(G, v, even=True))
    assert env.even and np.array_equal(env.values, env.values[::-1, ::-1])


def test_closed_forms_are_their_own_envelope():
    rep = ScaledNorm(2.0)
    assert convexify(rep) is rep


# sup-convolution -----------------------------------------------------------------------------


def test_sup_convolution_of_balls():
    f = LogConcaveFunction(BodyIndicator(Ball(1.0)))
    h = sup_convolve(f, f, 0.7)
    assert isinstance(h.support, Ball) and h.support.r == pytest.approx(1.7)


def test_sup_convolution_of_gaussians_1d():
    f = LogConcaveFunction(Quadratic(1.0, 1))
    t = 0.6
    h = sup_convolve(f, f, t)
    x = np.linspace(-3, 3, 7)[:, None]
    np.testing.assert_allclose(h.value(x), np.exp(-x[:, 0] ** 2 / (2 * (1 + t))), rtol=1e-12)


def test_sup_convolution_at_zero_is_identity_on_grid():
    G = GridSpec(1, 3.0, 121)
    phi = sample(Quadratic(1.0, 1), G)
    f = LogConcaveFunction(phi)
    g = LogConcaveFunction(BodyIndicator(Ball(1.0, 1)))
    h = sup_convolve(f, g, 0.0, primal=G, dual=GridSpec(1, 4.0, 161))
    inner = np.abs(G.axis) <= 2.5
    err = np.abs(evaluate(h.phi, G.axis[inner, None]) - phi.values[inner]).max()
    assert err <= 2 * G.h * 3.0


def test_sup_convolution_support_contains_minkowski_sum(square):
    tri = Polytope.from_vertices(np.array([[1.0, 0.0], [-0.5, 0.8], [-0.4, -0.9]]))
    G = GridSpec(2, 4.0, 81)
    f = LogConcaveFunction(sample(BodyIndicator(square), G))
    g = LogConcaveFunction(BodyIndicator(tri))
    t = 0.5
    h = sup_convolve(f, g, t, primal=G, dual=GridSpec(2, 6.0, 121))
    target = bd.minkowski_sum(square, t, tri)
    v = target.vertices
    pulled = v * (1 - 2 * G.h / np.linalg.norm(v, axis=1))[:, None]
    assert np.all(np.isfinite(evaluate(h.phi, pulled)))


def test_sup_convolution_rejects_negative_t(gaussian):
    with pytest.raises(ValueError):
        sup_convolve(gaussian, gaussian, -0.1)


# evaluation and gradients --------------------------------------------------------------------


def test_quadratic_gradient():
    np.testing.assert_allclose(gradient(Quadratic(1.0), [[1.0, 2.0]]), [[1.0, 2.0]])


def test_norm_gradient_and_minimal_norm_subgradient_at_origin():
    g = gradient(ScaledNorm(1.0), [[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(g, [[0.6, 0.8], [0.0, 0.0]])


def test_grid_gradient_of_quadratic():
    G = GridSpec(2, 4.0, 129)
    g = gradient(sample(Quadratic(1.0), G), [[0.5, 0.5]])
    assert np.abs(g - 0.5).max() <= 1e-2


def test_grid_evaluation_outside_box_raises():
    rep = sample(Quadratic(1.0), GridSpec(2, 1.0, 9))
    with pytest.raises(DomainError, match="out of domain"):
        evaluate(rep, [[1.5, 0.0]])


def test_grid_evaluation_interpolates_nodes():
    G = GridSpec(2, 2.0, 9)
    rep = sample(Quadratic(1.0), G)
    pts = G.points().reshape(-1, 2)
    np.testing.assert_allclose(evaluate(rep, pts), rep.values.ravel(), atol=1e-12)


def test_indicator_evaluates_to_infinity_outside(square):
    vals = evaluate(BodyIndicator(square), [[0.5, 0.5], [1.5, 0.0]])
    assert vals[0] == 0.0 and vals[1] == math.inf


@given(st.integers(0, 10_000))
def test_generalized_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    for K in (Polytope.box([1.0, 0.5]), Ball(2.0)):
        x = rng.normal(size=(100, 2))
        y = rng.normal(size=(100, 2))
        lhs = np.einsum("ij,ij->i", x, y)
        rhs = bd.gauge(K, x) * bd.gauge(bd.polar(K), y)
        assert np.all(lhs <= rhs + 1e-12)


# level sets ----------------------------------------------------------------------------------


def test_gaussian_level_set_is_unit_ball(gaussian):
    K = level_set(gaussian, math.exp(-0.5))
    assert isinstance(K, Ball) and K.r == pytest.approx(1.0)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.99])
def test_indicator_level_sets_are_the_body(ball2_indicator, s):
    assert level_set(ball2_indicator, s) == Ball(2.0)


def test_grid_level_set_within_2h_of_ball():
    G = GridSpec(2, 3.0, 121)
    f = LogConcaveFunction(sample(ScaledNorm(1.0), G))
    K = level_set(f, math.exp(-1.0))
    ang = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    assert np.abs(bd.radial(K, u) - 1.0).max() <= 2 * G.h


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0])
def test_empty_level_set_raises(gaussian, s):
    with pytest.raises(GeometryError):
        level_set(gaussian, s)


def test_support_inferred_from_indicator(square):
    f = LogConcaveFunction(BodyIndicator(square))
    assert f.support is square and f.bounded
    assert not LogConcaveFunction(Quadratic(1.0)).bounded
