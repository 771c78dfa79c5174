"""Weighted moments, anisotropic weighted total variation and related checks.

The weight is ``omega_q(x) = |x|**(q-n)``, singular at the origin when
``q < n``. Integrals over R^n use one of two rules:

* ``"polar"`` (default): rays from the origin in every sampled direction. A
  Gauss-Jacobi segment on ``[0, rho0]`` is exact for ``r**(q-1)`` times
  polynomials. Gauss-Legendre panels of width ``h`` follow, up to the
  support boundary or the integration radius.
* ``"cartesian"``: node-centred cells of a regular grid with the function
  taken at the node (midpoint rule). Cell weights ``int_cell omega`` are
  exact near the origin and tensor Gauss elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import bodies as bd
from ._quadrature import angular_rule, gauss_jacobi_radial, gauss_legendre, panel_rule
from .bodies import Ball, ConvexBody, Polytope
from .core_convex import (
    BodyIndicator,
    ConvexFunctionRep,
    GridSampled,
    GridSpec,
    LogConcaveFunction,
    MaxAffine,
    Quadratic,
    ScaledNorm,
    SupportFn,
    _slope_inradius,
    conjugate,
    evaluate,
    gradient,
    level_set,
    sup_combine,
)


class MomentDivergenceError(ValueError):
    """Raised when the growth guard cannot certify a finite moment."""


@dataclass(frozen=True)
class Weight:
    """Radial weight: ``|x|**(q-n)`` or, with ``kind="gaussian"``, ``exp(-|x|^2/2)``."""

    q: float
    dim: int = 2
    kind: str = "power"

    def __post_init__(self):
        if not (np.isfinite(self.q) and self.q > 0):
            raise ValueError("q must be positive")
        if self.kind not in ("power", "gaussian"):
            raise ValueError("weight kind must be 'power' or 'gaussian'")
        if self.dim not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")

    def __call__(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        if self.kind == "gaussian":
            return np.exp(-0.5 * r**2)
        with np.errstate(divide="ignore"):
            return r ** (self.q - self.dim)

    @property
    def radial_power(self) -> float:
        """Exponent ``p`` with radial density ``r**(p-1)`` near the origin."""
        return self.q if self.kind == "power" else float(self.dim)

    def radial_factor(self, r: np.ndarray) -> np.ndarray:
        """Radial density divided by ``r**(radial_power - 1)``."""
        if self.kind == "gaussian":
            return np.exp(-0.5 * r**2)
        return np.ones_like(r)


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution of the integration rules.

    Attributes
    ----------
    h : float
        Radial panel width (polar) or cell size (cartesian).
    rho0 : float, optional
        Radius of the singular Gauss-Jacobi segment; defaults to ``2 h``.
    n_angles, n_polar : int
        Directions in 2-D, and polar nodes in 3-D (azimuths are doubled).
    radial_order : int
        Gauss nodes per radial panel and in the singular segment.
    method : str
        ``"polar"`` or ``"cartesian"``.
    radius : float, optional
        Integration radius for unbounded support; defaults to the radius where
        ``phi`` has risen by ``tail`` above its minimum.
    tail : float
    """

    h: float = 0.1
    rho0: Optional[float] = None
    n_angles: int = 512
    n_polar: int = 48
    radial_order: int = 8
    method: str = "polar"
    radius: Optional[float] = None
    tail: float = 30.0

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.rho0 is not None and self.rho0 < self.h:
            raise ValueError("rho0 must be at least h")
        if self.method not in ("polar", "cartesian"):
            raise ValueError("method must be 'polar' or 'cartesian'")

    @property
    def patch_radius(self) -> float:
        return self.rho0 if self.rho0 is not None else 2.0 * self.h


# integration rules ---------------------------------------------------------------------


def polar_rule(w: Weight, spec: QuadratureSpec, radii) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int g(x) w(x) dx`` along rays.

    ``radii`` is either a scalar integration radius or a callable mapping the
    direction array to the ray length in each direction.
    """
    n = w.dim
    dirs, wang = angular_rule(n, spec.n_angles, spec.n_polar)
    rmax = np.asarray(radii(dirs) if callable(radii) else np.full(len(dirs), float(radii)), dtype=float)
    p = w.radial_power
    m = spec.radial_order
    e = np.minimum(spec.patch_radius, rmax)
    r01, w01 = gauss_jacobi_radial(m, p)
    r_in = e[:, None] * r01[None, :]
    w_in = e[:, None] ** p * w01[None, :] * w.radial_factor(r_in)
    n_pan = max(1, int(math.ceil((rmax.max() - spec.patch_radius) / spec.h)))
    r_out, w_out = panel_rule(e, np.maximum(rmax, e), n_pan, m)
    w_out = w_out * r_out ** (p - 1.0) * w.radial_factor(r_out)
    r = np.hstack([r_in, r_out])
    wr = np.hstack([w_in, w_out]) * wang[:, None]
    pts = r[..., None] * dirs[:, None, :]
    return pts.reshape(-1, n), wr.ravel()


def patch_weight_total(w: Weight, spec: QuadratureSpec) -> float:
    """Sum of the singular-segment weights over all directions (for checks)."""
    dirs, wang = angular_rule(w.dim, spec.n_angles, spec.n_polar)
    _, w01 = gauss_jacobi_radial(spec.radial_order, w.radial_power)
    return float(wang.sum() * spec.patch_radius ** w.radial_power * w01.sum())


@lru_cache(maxsize=32)
def cell_weights(grid: GridSpec, w: Weight) -> np.ndarray:
    """``int_{cell} w`` for the node-centred cells of ``grid`` (clipped to the box).

    Cells within two cells of the origin use the divergence identity
    ``q int_C |x|^(q-n) = sum_F d_F int_F |x|^(q-n)`` with singular-aware facet
    rules. All other cells use a 3-point tensor Gauss rule.
    """
    n, N, h, R = grid.dim, grid.nodes, grid.h, grid.radius
    ax = grid.axis
    lo = np.maximum(ax - 0.5 * h, -R)
    hi = np.minimum(ax + 0.5 * h, R)
    x3, w3 = gauss_legendre(3)
    nodes = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * x3[None, :]
    wts = 0.5 * (hi - lo)[:, None] * w3[None, :]
    mesh_pts = np.meshgrid(*([nodes.ravel()] * n), indexing="ij")
    pts = np.stack(mesh_pts, axis=-1)
    vals = w(pts)
    wt = wts.ravel()
    for k in range(n):
        shape = [1] * n
        shape[k] = wt.size
        vals = vals * wt.reshape(shape)
    vals = vals.reshape(sum(([N, 3] for _ in range(n)), []))
    W = vals.sum(axis=tuple(range(1, 2 * n, 2)))
    if w.kind == "power":
        c = (N - 1) // 2
        rng = range(max(0, c - 2), min(N, c + 3))
        for idx in np.ndindex(*([len(rng)] * n)):
            cell = tuple(rng[i] for i in idx)
            P = Polytope.from_vertices(_box_corners([lo[j] for j in cell], [hi[j] for j in cell]))
            total = 0.0
            for i, ids in enumerate(P.facets):
                d = P.offsets[i]
                if abs(d) <= 1e-14:
                    continue
                _, fw = bd.facet_rule(P.vertices[ids], P.normals[i], d, w.q)
                total += d * float(fw.sum())
            W[cell] = total / w.q
    W.setflags(write=False)
    return W


def _box_corners(lo, hi) -> np.ndarray:
    n = len(lo)
    return np.array([[hi[k] if (b >> k) & 1 else lo[k] for k in range(n)] for b in range(2**n)], dtype=float)


def cartesian_rule(w: Weight, spec: QuadratureSpec, radius: float) -> tuple[np.ndarray, np.ndarray]:
    grid = GridSpec.with_spacing(w.dim, radius, spec.h)
    return grid.points().reshape(-1, w.dim), cell_weights(grid, w).ravel()


def integration_rule(f: LogConcaveFunction, w: Weight, spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Rule covering the support of ``f`` (or its significant region)."""
    if f.dim != w.dim:
        raise ValueError("dimension mismatch between function and weight")
    K = f.support
    radius = _radius(f, spec)
    if spec.method == "cartesian" or (K is not None and not K.origin_interior):
        return cartesian_rule(w, spec, radius)
    if K is not None:
        return polar_rule(w, spec, lambda u: np.minimum(bd.radial(K, u), radius))
    return polar_rule(w, spec, radius)


def _radius(f: LogConcaveFunction, spec: QuadratureSpec) -> float:
    if f.support is not None:
        r = bd.inradius_circumradius(f.support)[1]
    else:
        r = spec.radius if spec.radius is not None else f.extent(spec.tail)
    if isinstance(f.phi, GridSampled):
        r = min(r, f.phi.grid.radius)
    return r


# moments -------------------------------------------------------------------------------


def growth_check(phi: ConvexFunctionRep, threshold: float = 1e-6) -> bool:
    """Finite-box proxy for ``liminf phi(x)/|x| > 0`` (true for bounded domains)."""
    if isinstance(phi, (Quadratic, ScaledNorm, BodyIndicator)):
        return True
    if isinstance(phi, SupportFn):
        return bd.inradius_circumradius(phi.body)[0] > threshold
    if isinstance(phi, MaxAffine):
        return _slope_inradius(phi.slopes) > threshold
    v = phi.values
    n = v.ndim
    pts = phi.grid.points()
    ring = np.zeros(v.shape, bool)
    for k in range(n):
        sl = [slice(None)] * n
        sl[k] = 0
        ring[tuple(sl)] = True
        sl[k] = -1
        ring[tuple(sl)] = True
    vals = v[ring]
    fin = np.isfinite(vals)
    if not fin.any():
        return True
    ratio = vals[fin] / np.linalg.norm(pts[ring][fin], axis=-1)
    return bool(ratio.min() > threshold)


def _guard(f: LogConcaveFunction):
    if f.support is None and not growth_check(f.phi):
        raise MomentDivergenceError("moment may be infinite")


def moment(f: LogConcaveFunction, w: Weight, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``int w(x) f(x) dx``."""
    _guard(f)
    pts, wts = integration_rule(f, w, spec)
    return float(np.dot(wts, f.value(pts)))


def moment_of_conjugate(phi: ConvexFunctionRep, w: Weight, spec: QuadratureSpec = QuadratureSpec(),
                        target: Optional[GridSpec] = None) -> float:
    """``int w exp(-phi*)``; grid input is conjugated onto ``target``."""
    star = conjugate(phi, target)
    return moment(LogConcaveFunction(star), w, spec)


# total variation -------------------------------------------------------------------------


@dataclass(frozen=True)
class TVResult:
    bulk: float
    boundary: float

    @property
    def total(self) -> float:
        return self.bulk + self.boundary


def boundary_rule(K: ConvexBody, w: Weight, n_angles: int = 4096, n_polar: int = 128):
    """Rule for ``int_{dK} g(x) w(x) dH^{n-1}`` returning points, normals and weights."""
    n = K.dim
    if w.kind != "power":
        raise ValueError("boundary integrals are implemented for power weights")
    if isinstance(K, Ball):
        dirs, wang = angular_rule(n, n_angles, n_polar)
        return K.r * dirs, dirs, wang * K.r ** (w.q - 1.0)
    pts, nrm, wts = [], [], []
    for i, ids in enumerate(K.facets):
        x, fw = bd.facet_rule(K.vertices[ids], K.normals[i], K.offsets[i], w.q)
        pts.append(x)
        nrm.append(np.broadcast_to(K.normals[i], x.shape))
        wts.append(fw)
    return np.concatenate(pts), np.concatenate(nrm), np.concatenate(wts)


def weighted_tv(f: LogConcaveFunction, L: ConvexBody, w: Weight, spec: QuadratureSpec = QuadratureSpec()) -> TVResult:
    """Anisotropic weighted total variation of ``f`` with gauge ``h_L``.

    The bulk part integrates ``h_L(grad phi) f w``; the jump part integrates
    ``h_L(nu) f w`` over the boundary of the support (zero when unbounded).
    """
    _guard(f)
    pts, wts = integration_rule(f, w, spec)
    fv = f.value(pts)
    live = fv > 0
    hv = np.zeros_like(fv)
    hv[live] = bd.support(L, gradient(f.phi, pts[live]))
    bulk = float(np.dot(wts, hv * fv))
    boundary = 0.0
    if f.support is not None:
        x, nu, bw = boundary_rule(f.support, w)
        boundary = float(np.dot(bw, bd.support(L, nu) * f.value(x)))
    return TVResult(bulk, boundary)


def logit_levels(M: float, levels: int = 200, width: float = 30.0) -> tuple[np.ndarray, np.ndarray]:
    """Levels ``s = M sigma(u)`` on a uniform ``u`` grid with trapezoid weights in ``s``.

    The map clusters levels geometrically near both 0 and ``M``.
    """
    u = np.linspace(-width, width, levels)
    sig = 0.5 * (1.0 + np.tanh(0.5 * u))
    s = M * sig
    du = u[1] - u[0]
    tw = np.full(levels, du)
    tw[0] = tw[-1] = 0.5 * du
    return s, tw * M * sig * (1.0 - sig)


def level_set_integral(f: LogConcaveFunction, L: ConvexBody, q: float, levels: int = 200) -> float:
    """``int_0^max f V_{1,q}([f >= s], L) ds`` by the trapezoid rule on logit levels."""
    s, ws = logit_levels(f.max_value, levels)
    vals = np.zeros_like(s)
    cache: dict = {}
    for i, si in enumerate(s):
        if not (0 < si < f.max_value):
            continue
        K = level_set(f, float(si))
        # bodies are kept alive alongside their values so ids are not recycled
        key = id(K)
        if key not in cache:
            cache[key] = (K, bd.dual_mixed(K, L, q))
        vals[i] = cache[key][1]
    return float(np.dot(ws, vals))


def coarea_tv(f: LogConcaveFunction, L: ConvexBody, w: Weight, levels: int = 200) -> float:
    """Total variation via the coarea formula: integrated weighted perimeters of level sets."""
    if w.kind != "power":
        raise ValueError("coarea route is implemented for power weights")
    return level_set_integral(f, L, w.q, levels)


# inequalities -------------------------------------------------------------------------------


def prekopa_leindler_check(f: LogConcaveFunction, g: LogConcaveFunction, lam: float,
                           spec: QuadratureSpec = QuadratureSpec(),
                           primal: Optional[GridSpec] = None, dual: Optional[GridSpec] = None) -> tuple[float, float]:
    """``(int (1-lam).f (+) lam.g, (int f)^(1-lam) (int g)^lam)``."""
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    w = Weight(float(f.dim), f.dim)
    h = sup_combine(f, g, 1.0 - lam, lam, primal, dual)
    lhs = moment(h, w, spec)
    rhs = moment(f, w, spec) ** (1.0 - lam) * moment(g, w, spec) ** lam
    return lhs, rhs


def derivative_control_check(f: LogConcaveFunction, t0: float, samples: int = 200001) -> tuple[float, float]:
    """``(int_{|t|>=t0} |f'|, 4 sup_{|t|>=t0} f)`` for a 1-D log-concave ``f``.

    ``|f'|`` is the total variation measure, so jumps of indicator-type
    functions are included.
    """
    if f.dim != 1:
        raise ValueError("derivative control applies to one-dimensional functions")
    if t0 < 0:
        raise ValueError("t0 must be nonnegative")
    T = max(f.extent(40.0) + float(abs(f.max_location[0])), t0)
    m = float(f.max_location[0])
    lhs, sup = 0.0, 0.0
    for sign in (1.0, -1.0):
        t = np.linspace(t0, T, samples)
        if t0 <= sign * m <= T:
            t = np.unique(np.append(t, sign * m))
        vals = f.value(sign * t[:, None])
        lhs += float(np.abs(np.diff(vals)).sum() + vals[-1])
        sup = max(sup, float(vals.max()))
    return lhs, 4.0 * sup
