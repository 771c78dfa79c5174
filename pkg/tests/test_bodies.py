import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualcurv import bodies as bd
from dualcurv._quadrature import sphere_area
from dualcurv.acceptance import random_symmetric_hexagon
from dualcurv.bodies import Ball, GeometryError, Polytope, SingularityError

Q_VALUES = [0.5, 1.0, 2.0, 3.0]


def symmetric_polygon(seed: int, k: int = 4) -> Polytope:
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, np.pi, k))
    rad = rng.uniform(0.5, 2.0, k)
    half = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    return Polytope.from_vertices(np.vstack([half, -half]))


# construction --------------------------------------------------------------------------------


def test_box_has_consistent_representations(square):
    assert square.origin_interior and square.symmetric
    assert len(square.facets) == 4
    np.testing.assert_allclose(np.sort(square.offsets), [1, 1, 1, 1])


def test_inconsistent_representations_are_rejected():
    with pytest.raises(GeometryError):
        Polytope(np.array([[2.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), np.array([[1.0, 0.0]]), np.array([1.0]), ((0,),))


def test_triangle_is_not_symmetric():
    tri = Polytope.from_vertices(np.array([[1.0, 0.0], [-0.5, 0.8], [-0.4, -0.9]]))
    assert tri.origin_interior and not tri.symmetric


def test_hull_drops_interior_points():
    pts = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1], [0.2, 0.3], [0, 0]], dtype=float)
    assert Polytope.from_vertices(pts).vertices.shape == (4, 2)


def test_ball_rejects_bad_radius():
    with pytest.raises(GeometryError):
        Ball(0.0)


# support, radial, polar ----------------------------------------------------------------------


def test_square_support_and_radial(square):
    u = np.array([[1.0, 1.0]]) / math.sqrt(2)
    assert bd.support(square, u)[0] == pytest.approx(math.sqrt(2))
    assert bd.radial(square, u)[0] == pytest.approx(math.sqrt(2))


def test_polar_of_square_is_cross_polytope(square):
    P = bd.polar(square)
    expected = {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)}
    assert {tuple(np.round(v, 12) + 0.0) for v in P.vertices} == expected


def test_polar_of_cube_is_octahedron():
    P = bd.polar(Polytope.box([1.0, 1.0, 1.0]))
    assert P.vertices.shape == (6, 3)
    np.testing.assert_allclose(np.sort(np.abs(P.vertices).sum(axis=1)), np.ones(6))


def test_polar_of_ball():
    assert bd.polar(Ball(2.0)) == Ball(0.5)


def test_radial_requires_origin_interior():
    K = Polytope.box([1.0, 1.0])
    shifted = Polytope.from_vertices(K.vertices + np.array([1.0, 0.0]))
    with pytest.raises(GeometryError):
        bd.radial(shifted, np.array([[1.0, 0.0]]))
    with pytest.raises(GeometryError):
        bd.polar(shifted)


@given(st.integers(0, 10_000))
def test_polar_involution(seed):
    K = symmetric_polygon(seed)
    PP = bd.polar(bd.polar(K))
    a = np.array(sorted(map(tuple, np.round(K.vertices, 9))))
    b = np.array(sorted(map(tuple, np.round(PP.vertices, 9))))
    assert a.shape == b.shape and np.abs(a - b).max() <= 1e-9


@given(st.integers(0, 10_000))
def test_radial_and_gauge_are_reciprocal(seed):
    rng = np.random.default_rng(seed)
    K = symmetric_polygon(seed)
    u = rng.normal(size=(50, 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    np.testing.assert_allclose(bd.radial(K, u) * bd.gauge(K, u), 1.0, rtol=1e-12)
    np.testing.assert_allclose(bd.gauge(K, u), bd.support(bd.polar(K), u), rtol=1e-10)


# dual quermassintegrals ----------------------------------------------------------------------


def test_unit_disc_area():
    assert bd.dual_quermass(Ball(1.0), 2.0) == pytest.approx(math.pi, rel=1e-14)


def test_square_q1_closed_form(square):
    assert bd.dual_quermass(square, 1.0) == pytest.approx(8 * math.log(1 + math.sqrt(2)), rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("q", Q_VALUES)
def test_ball_dual_quermass(n, q):
    assert bd.dual_quermass(Ball(1.7, n), q) == pytest.approx(sphere_area(n) * 1.7**q / q, rel=1e-14)


def test_square_q2_is_area(square):
    assert bd.dual_quermass(square, 2.0) == pytest.approx(4.0, rel=1e-10)


def test_cube_q3_is_volume():
    assert bd.dual_quermass(Polytope.box([1.0, 0.5, 2.0]), 3.0) == pytest.approx(8.0, rel=1e-6)


def test_interval_dual_quermass():
    K = Polytope.from_vertices([[-1.0], [2.0]])
    assert bd.dual_quermass(K, 0.5) == pytest.approx((1 + 2**0.5) / 0.5)


@pytest.mark.parametrize("q", [0.0, -1.0, math.nan])
def test_nonpositive_q_is_rejected(square, q):
    with pytest.raises(GeometryError):
        bd.dual_quermass(square, q)


@pytest.mark.parametrize("lam", [0.5, 2.0])
@pytest.mark.parametrize("q", Q_VALUES)
def test_homogeneity(lam, q):
    K = random_symmetric_hexagon(0)
    assert bd.dual_quermass(bd.scale(K, lam), q) == pytest.approx(lam**q * bd.dual_quermass(K, q), rel=1e-9)
    assert bd.normalized_dual_quermass(bd.scale(K, lam), q) == pytest.approx(
        lam * bd.normalized_dual_quermass(K, q), rel=1e-9)


@pytest.mark.parametrize("K", [Polytope.box([1.0, 1.0]), random_symmetric_hexagon(0)], ids=["square", "hexagon"])
def test_santalo_product_is_scale_invariant(K):
    p = q = 0.5
    prods = [bd.normalized_dual_quermass(bd.polar(bd.scale(K, lam)), q)
             * bd.normalized_dual_quermass(bd.scale(K, lam), p) for lam in (0.5, 1.0, 2.0)]
    assert max(prods) - min(prods) <= 1e-9 * prods[1]


def _slab_values():
    return [bd.dual_quermass(Polytope.box([1.0, L]), 0.5) for L in (1.0, 10.0, 100.0, 1000.0)]


def test_slab_dual_quermass_is_increasing():
    v = _slab_values()
    assert all(b > a for a, b in zip(v, v[1:]))


def test_slab_tail_matches_independent_quadrature():
    # (1/q) int rho^q over the circle, written out for the box [-1,1] x [-1000,1000]
    from scipy.integrate import quad

    q, L = 0.5, 1000.0
    corner = math.atan2(L, 1.0)
    side = quad(lambda t: (1 / math.cos(t)) ** q, 0, corner, epsabs=0, epsrel=1e-12, limit=200)[0]
    top = quad(lambda t: (L / math.sin(t)) ** q, corner, math.pi / 2, epsabs=0, epsrel=1e-12, limit=200)[0]
    assert _slab_values()[3] == pytest.approx(4 * (side + top) / q, rel=1e-9)


@pytest.mark.xfail(strict=True, reason="q = 1/2 slab volume grows like C - 8 L^(-1/2); "
                                       "the 100 -> 1000 increase is 2.7%, above the 1% bound")
def test_slab_tail_increase_below_one_percent():
    v = _slab_values()
    assert (v[3] - v[2]) / v[2] < 0.01


# dual curvature measures ---------------------------------------------------------------------


def test_square_measure_q2(square):
    m = bd.dual_curvature_measure(square, 2.0)
    np.testing.assert_allclose(m.weights, 2.0, rtol=1e-12)
    assert m.total == pytest.approx(8.0)


def test_square_measure_q1(square):
    m = bd.dual_curvature_measure(square, 1.0)
    np.testing.assert_allclose(m.weights, 2 * math.asinh(1.0), rtol=1e-10)


@pytest.mark.parametrize("q", Q_VALUES)
def test_ball_measure_total(q):
    assert bd.dual_curvature_measure(Ball(2.0), q).total == pytest.approx(2 * math.pi * 2.0**q, rel=1e-12)


@given(st.integers(0, 10_000), st.sampled_from(Q_VALUES))
def test_mass_identity_random_polygons(seed, q):
    K = symmetric_polygon(seed)
    assert bd.dual_curvature_measure(K, q).total == pytest.approx(q * bd.dual_quermass(K, q), rel=1e-6)


@pytest.mark.parametrize("q", Q_VALUES)
def test_mass_identity_cube(q):
    K = Polytope.box([1.0, 0.7, 1.3])
    assert bd.dual_curvature_measure(K, q).total == pytest.approx(q * bd.dual_quermass(K, q), rel=1e-6)


def test_facet_through_origin():
    K = Polytope.from_vertices(np.array([[0.0, -1.0], [1.0, -1.0], [1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(SingularityError, match="non-integrable singularity"):
        bd.dual_curvature_measure(K, 0.5)
    m = bd.dual_curvature_measure(K, 1.0)
    assert np.all(np.isfinite(m.weights)) and m.weights.min() == 0.0


def test_spherical_measure_validation():
    with pytest.raises(GeometryError):
        bd.SphericalMeasure(np.array([[1.0, 0.0]]), np.array([-1.0]))
    with pytest.raises(GeometryError):
        bd.SphericalMeasure(np.array([[2.0, 0.0]]), np.array([1.0]))


@pytest.mark.parametrize("q", Q_VALUES)
def test_dual_mixed_with_itself(square, q):
    for K in (square, Ball(1.5)):
        assert bd.dual_mixed(K, K, q) == pytest.approx(q * bd.dual_quermass(K, q), rel=1e-9)


def test_pq_measure_of_ball():
    assert bd.pq_dual_curvature(Ball(2.0), 1.0, 1.0).total == pytest.approx(2 * math.pi, rel=1e-12)


def test_p_zero_is_the_plain_measure(square):
    a = bd.pq_dual_curvature(square, 0.0, 1.5)
    b = bd.dual_curvature_measure(square, 1.5)
    np.testing.assert_array_equal(a.weights, b.weights)


# radii and sums ------------------------------------------------------------------------------


def test_square_radii(square):
    r, R = bd.inradius_circumradius(square)
    assert r == pytest.approx(1.0) and R == pytest.approx(math.sqrt(2))


def test_ball_sum():
    assert bd.minkowski_sum(Ball(2.0), 0.5, Ball(1.0)) == Ball(2.5)


def test_square_sum(square):
    S = bd.minkowski_sum(square, 1.0, square)
    assert np.allclose(np.sort(np.abs(S.vertices).ravel()), 2.0)
    assert S.vertices.shape == (4, 2)


def test_combine_scales_both_terms(square):
    S = bd.combine(square, 0.5, Ball(1.0), 0.5)
    r, _ = bd.inradius_circumradius(S)
    assert r == pytest.approx(1.0, abs=1e-3)


@given(st.integers(0, 10_000))
def test_support_is_additive_under_sums(seed):
    rng = np.random.default_rng(seed)
    K, L = symmetric_polygon(seed), symmetric_polygon(seed + 1)
    t = float(rng.uniform(0.1, 2.0))
    u = rng.normal(size=(20, 2))
    S = bd.minkowski_sum(K, t, L)
    np.testing.assert_allclose(bd.support(S, u), bd.support(K, u) + t * bd.support(L, u), rtol=1e-9, atol=1e-12)
