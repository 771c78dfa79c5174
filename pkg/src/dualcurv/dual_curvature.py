"""Euclidean and spherical dual curvature measures of log-concave functions.

Also contains the harness that checks the first variation of the weighted
moment under sup-convolution by three independent routes:

* ``variational_lhs``: one-sided difference quotients of the moment of
  ``f (+) t.g``, Richardson-extrapolated to ``t = 0``;
* ``variational_rhs``: ``int psi* dC^e_q(f) + int h_{K_g} dC^s_q(f)``;
* ``layer_cake_delta``: ``int_0^max f V_{1,q}([f >= s], L) ds`` for ``g = 1_L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import bodies as bd
from .bodies import ConvexBody, SphericalMeasure
from .core_convex import (
    GridSampled,
    GridSpec,
    LogConcaveFunction,
    conjugate,
    default_grids,
    evaluate,
    gradient,
    level_set,
    sup_convolve,
)
from .weighted_variation import (
    QuadratureSpec,
    Weight,
    _guard,
    boundary_rule,
    integration_rule,
    level_set_integral,
    moment,
)


@dataclass(frozen=True, eq=False)
class EuclideanMeasure:
    """Finite atomic measure on R^n."""

    points: np.ndarray
    weights: np.ndarray
    provenance: str = "analytic"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        p = np.array(self.points, dtype=float)
        # an empty atom list keeps its column count
        p = p.reshape(w.size, p.shape[-1] if w.size == 0 and p.ndim > 1 else -1)
        if w.size and (not np.all(np.isfinite(w)) or w.min() < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(p)):
            raise ValueError("atom locations must be finite")
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def scaled(self, factor: float) -> "EuclideanMeasure":
        return EuclideanMeasure(self.points, self.weights * factor, self.provenance)

    def rows(self) -> np.ndarray:
        return np.hstack([self.points, self.weights[:, None]])


def integrate(measure, zeta: Callable[[np.ndarray], np.ndarray]) -> float:
    """``sum_i w_i zeta(y_i)`` for a Euclidean or spherical measure."""
    pts = measure.points if isinstance(measure, EuclideanMeasure) else measure.directions
    if measure.weights.size == 0:
        return 0.0
    return float(np.dot(measure.weights, zeta(pts)))


# test functions --------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Evaluable test function with a Lipschitz bound on the dictionary ball."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lip: float
    odd: bool = False

    __test__ = False

    def __call__(self, y):
        return self.fn(np.asarray(y, dtype=float))


def _bump(c: np.ndarray, r: float, height: float):
    return lambda y: height * np.maximum(0.0, 1.0 - np.linalg.norm(y - c, axis=-1) / r)


@dataclass(frozen=True, eq=False)
class TestFunctionDictionary:
    """Constants, coordinates, ``|x|``, quadratic monomials and seeded bumps.

    Lipschitz bounds refer to the ball of radius ``radius``; the seed fixes
    the bumps, so dictionaries are reproducible.
    """

    dim: int
    radius: float
    n_bumps: int = 16
    seed: int = 0

    __test__ = False

    @property
    def members(self) -> list[TestFunction]:
        n, R = self.dim, self.radius
        out = [TestFunction("one", lambda y: np.ones(y.shape[:-1]), 0.0)]
        for i in range(n):
            out.append(TestFunction(f"x{i}", lambda y, i=i: y[..., i], 1.0, odd=True))
        out.append(TestFunction("norm", lambda y: np.linalg.norm(y, axis=-1), 1.0))
        for i in range(n):
            for j in range(i, n):
                lip = 2.0 * R if i == j else R
                out.append(TestFunction(f"x{i}x{j}", lambda y, i=i, j=j: y[..., i] * y[..., j], lip))
        rng = np.random.default_rng(self.seed)
        for k in range(self.n_bumps):
            c = rng.uniform(-0.8 * R, 0.8 * R, n)
            r = float(rng.uniform(0.2 * R, 0.6 * R))
            hgt = float(rng.uniform(0.5, 1.5))
            out.append(TestFunction(f"bump{k}", _bump(c, r, hgt), hgt / r))
        return out

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


def discrepancy(mu: EuclideanMeasure, nu: EuclideanMeasure, dictionary: TestFunctionDictionary) -> float:
    """``max_zeta |int zeta dmu - int zeta dnu| / (1 + Lip(zeta) diam)``."""
    best = 0.0
    for z in dictionary.members:
        d = abs(integrate(mu, z) - integrate(nu, z)) / (1.0 + z.lip * dictionary.diameter)
        best = max(best, d)
    return best


# measures --------------------------------------------------------------------------------


def euclidean_dcm(f: LogConcaveFunction, w: Weight, spec: QuadratureSpec = QuadratureSpec()) -> EuclideanMeasure:
    """Push-forward of ``w f dx`` under ``grad phi`` as an atomic measure.

    One atom per quadrature node, located at the (minimal-norm sub)gradient.
    """
    _guard(f)
    pts, wts = integration_rule(f, w, spec)
    mass = wts * f.value(pts)
    keep = mass > 0
    y = gradient(f.phi, pts[keep])
    return EuclideanMeasure(y, mass[keep], provenance=f"{spec.method}:h={spec.h:g}")


def spherical_dcm(f: LogConcaveFunction, w: Weight) -> SphericalMeasure:
    """Boundary measure ``w f dH^{n-1}`` on the support, pushed to normals.

    Polytope supports give one atom per facet; ball supports give uniform
    direction samples; unbounded support gives the zero measure.
    """
    K = f.support
    n = f.dim
    if K is None:
        return SphericalMeasure(np.zeros((0, n)), np.zeros(0))
    if isinstance(K, bd.Ball):
        x, nu, bw = boundary_rule(K, w)
        return SphericalMeasure(nu, bw * f.value(x))
    mass = []
    for i, ids in enumerate(K.facets):
        x, fw = bd.facet_rule(K.vertices[ids], K.normals[i], K.offsets[i], w.q)
        mass.append(float(np.dot(fw, f.value(x))))
    return SphericalMeasure(K.normals.copy(), np.array(mass))


# variational harness ------------------------------------------------------------------------


def richardson_zero(ts: Sequence[float], values: Sequence[float], exponents: Optional[Sequence[float]] = None) -> float:
    """Extrapolate ``values(t)`` to ``t = 0``.

    Fits ``value(t) = v0 + sum_k c_k t^p_k`` exactly through the samples, with
    ``p_k`` the leading ``len(ts) - 1`` entries of ``exponents`` (default
    ``1, 2, ...``, which is polynomial extrapolation).
    """
    ts = np.asarray(ts, dtype=float)
    vals = np.asarray(values, dtype=float)
    m = len(ts) - 1
    p = np.arange(1, m + 1, dtype=float) if exponents is None else np.asarray(exponents, dtype=float)[:m]
    A = np.hstack([np.ones((m + 1, 1)), ts[:, None] ** p[None, :]])
    return float(np.linalg.solve(A, vals)[0])


def quotient_exponents(q: float) -> list[float]:
    """Error exponents of the difference quotient in ``t``.

    The flat top of ``f (+) t.g`` around the origin contributes ``t^q`` terms
    besides the regular integer powers.
    """
    return sorted({1.0, 2.0, float(q), float(q) + 1.0})


@dataclass
class LhsResult:
    value: float
    quotients: list
    volumes: list
    t_list: list
    flags: dict


def hypothesis_flags(f: LogConcaveFunction, g: Optional[LogConcaveFunction] = None, alpha: float = 0.5,
                     shells: int = 8, levels: int = 8, ratio_bound: float = 10.0) -> dict:
    """Advisory checks of the hypotheses behind the variational formula.

    * ``max_at_origin``: ``f(o)`` equals the maximum of ``f``.
    * ``holder_shell_sup``: sup of ``|f(x) - f(o)| / |x|^(1+alpha)`` on the
      dyadic shells ``2^-k-1 <= |x| <= 2^-k``, k = 0..shells.
    * ``holder_bounded``: the shell sups do not grow with k.
    * ``shape_ratios``: circumradius over inradius of sampled level sets.
    * ``shape_bounded``: all ratios below ``ratio_bound``.
    * ``g_compact``: ``g`` has bounded support.
    """
    n = f.dim
    f0 = float(f.value(np.zeros(n)))
    flags: dict = {"max_at_origin": bool(f0 >= f.max_value * (1.0 - 1e-12))}
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(64, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sups = []
    for k in range(shells + 1):
        r = np.geomspace(2.0 ** (-k - 1), 2.0 ** (-k), 5)
        pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        vals = np.abs(f.value(pts) - f0) / np.linalg.norm(pts, axis=1) ** (1.0 + alpha)
        sups.append(float(vals.max()))
    flags["holder_shell_sup"] = sups
    flags["holder_bounded"] = bool(sups[-1] <= 2.0 * max(sups[0], 1e-300) or sups[-1] <= sups[len(sups) // 2])
    ratios = []
    M = f.max_value
    for s in M * np.linspace(0.05, 0.95, levels):
        try:
            K = level_set(f, float(s))
        except (bd.GeometryError, ValueError):
            continue
        if not K.origin_interior:
            ratios.append(math.inf)
            continue
        r_in, r_out = bd.inradius_circumradius(K)
        ratios.append(r_out / r_in)
    flags["shape_ratios"] = ratios
    flags["shape_bounded"] = bool(ratios) and all(r < ratio_bound for r in ratios)
    if g is not None:
        flags["g_compact"] = g.support is not None
    flags["hypotheses_met"] = bool(flags["max_at_origin"] and (flags["holder_bounded"] or flags["shape_bounded"])
                                   and flags.get("g_compact", True))
    return flags


def variational_lhs(f: LogConcaveFunction, g: LogConcaveFunction, w: Weight,
                    t_list: Sequence[float] = (0.1, 0.05, 0.025), spec: QuadratureSpec = QuadratureSpec(),
                    primal: Optional[GridSpec] = None, dual: Optional[GridSpec] = None) -> LhsResult:
    """Right derivative of ``t -> moment(f (+) t.g)`` at 0.

    All sup-convolutions, including ``t = 0``, share one primal and one dual
    grid so discretization errors cancel in the difference quotients.
    """
    ts = [float(t) for t in t_list]
    if min(ts) <= 0:
        raise ValueError("t values must be positive")
    flags = hypothesis_flags(f, g)
    if primal is None or dual is None:
        p0, d0 = default_grids(f, g, 1.0, max(ts))
        if p0.h > min(ts):
            # the flat top of f (+) t.g has width ~t and must be resolved
            p0 = GridSpec.with_spacing(p0.dim, p0.radius, min(ts))
        primal, dual = primal or p0, dual or d0
    if w.kind == "power" and w.q < 1 and spec.h > 2 * min(ts):
        spec = replace(spec, h=2 * min(ts), rho0=2 * min(ts))
    v0 = moment(sup_convolve(f, g, 0.0, primal, dual), w, spec)
    vols = [moment(sup_convolve(f, g, t, primal, dual), w, spec) for t in ts]
    quot = [(v - v0) / t for v, t in zip(vols, ts)]
    exps = quotient_exponents(w.q) if w.kind == "power" else None
    return LhsResult(richardson_zero(ts, quot, exps), quot, [v0] + vols, ts, flags)


@dataclass
class RhsResult:
    euclidean: float
    spherical: float

    @property
    def total(self) -> float:
        return self.euclidean + self.spherical


def variational_rhs(f: LogConcaveFunction, g: LogConcaveFunction, w: Weight,
                    spec: QuadratureSpec = QuadratureSpec()) -> RhsResult:
    """``int psi* dC^e_q(f) + int h_{K_g} dC^s_q(f)`` with ``g = exp(-psi)``."""
    if g.support is None:
        raise ValueError("g must have bounded support")
    me = euclidean_dcm(f, w, spec)
    if isinstance(g.phi, GridSampled):
        reach = float(np.abs(me.points).max()) if me.points.size else 1.0
        target = GridSpec.with_spacing(f.dim, max(reach, 1e-3) * 1.01, min(0.05, reach / 100.0 + 1e-12))
        psi_star = conjugate(g.phi, target)
    else:
        psi_star = conjugate(g.phi)
    euc = integrate(me, lambda y: evaluate(psi_star, y))
    ms = spherical_dcm(f, w)
    sph = ms.integrate(lambda u: bd.support(g.support, u))
    return RhsResult(euc, sph)


def layer_cake_delta(f: LogConcaveFunction, L: ConvexBody, w: Weight, levels: int = 200) -> float:
    """``int_0^max f V_{1,q}([f >= s], L) ds``."""
    if w.kind != "power":
        raise ValueError("layer-cake route is implemented for power weights")
    return level_set_integral(f, L, w.q, levels)


def first_moment_identity(f: LogConcaveFunction, w: Weight, spec: QuadratureSpec = QuadratureSpec(),
                          step: float = 1e-6) -> tuple[float, float]:
    """``(int |y| dC^e_q(f; y), int |grad phi| f w dx)``.

    The right side differentiates ``phi`` numerically (central differences,
    one-sided next to ``+inf``) instead of using the subgradient map.
    """
    lhs = integrate(euclidean_dcm(f, w, spec), lambda y: np.linalg.norm(y, axis=-1))
    pts, wts = integration_rule(f, w, spec)
    fv = f.value(pts)
    keep = fv > 0
    pts, wts, fv = pts[keep], wts[keep], fv[keep]
    grad = np.stack([_fd_partial(f.phi, pts, k, step) for k in range(f.dim)], axis=-1)
    rhs = float(np.dot(wts, np.linalg.norm(grad, axis=-1) * fv))
    return lhs, rhs


def _fd_partial(phi, x: np.ndarray, k: int, step: float) -> np.ndarray:
    e = np.zeros(x.shape[-1])
    e[k] = step
    v0 = evaluate(phi, x)
    vp = evaluate(phi, x + e)
    vm = evaluate(phi, x - e)
    with np.errstate(invalid="ignore"):
        fwd = (vp - v0) / step
        bwd = (v0 - vm) / step
    okf, okb = np.isfinite(vp), np.isfinite(vm)
    out = np.where(okf & okb, 0.5 * (fwd + bwd), 0.0)
    out = np.where(okf & ~okb, fwd, out)
    return np.where(~okf & okb, bwd, out)
