"""Extended-real convex functions on R^n (n <= 3) and their basic transforms.

Values live in ``(-inf, +inf]``: ``+inf`` is the IEEE infinity (``math.inf``),
never a large sentinel, and ``nan`` or ``-inf`` are rejected. A function is
either a closed-form catalog entry or nodal values on a regular tensor grid
with an odd number of nodes per axis, so the origin is a node.

The grid conjugate is the separable linear-time discrete Legendre transform.
Its output remembers, for every node, the maximizing dual node. That
maximizer is an exact subgradient, and it lets :func:`evaluate` reproduce the
discrete conjugate between nodes as a maximum of supporting planes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import bodies as bd
from ._kernels import discrete_conjugate
from .bodies import Ball, ConvexBody, GeometryError, Polytope

INF = math.inf
CONVEXITY_TOL = 1e-9


class DomainError(ValueError):
    """Raised when a grid function is evaluated outside its box."""


class EmptyDomainError(ValueError):
    """Raised when a function is identically ``+inf``."""


# grids --------------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Regular tensor grid on ``[-radius, radius]^dim`` with ``nodes`` per axis."""

    dim: int
    radius: float
    nodes: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError("grid radius must be positive")
        if self.nodes < 3 or self.nodes % 2 == 0:
            raise ValueError("nodes per axis must be odd and at least 3")

    @classmethod
    def with_spacing(cls, dim: int, radius: float, h: float) -> "GridSpec":
        """Smallest odd grid on ``[-radius, radius]`` with spacing at most ``h``."""
        half = max(1, int(math.ceil(radius / h - 1e-9)))
        return cls(dim, float(radius), 2 * half + 1)

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.nodes - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes,) * self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        half = (self.nodes - 1) // 2
        a = self.h * np.arange(-half, half + 1, dtype=float)
        a[half] = 0.0
        a[0], a[-1] = -self.radius, self.radius
        a.setflags(write=False)
        return a

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*[self.axis] * self.dim, indexing="ij"), axis=-1)


# representations ----------------------------------------------------------------------


@dataclass(frozen=True)
class Quadratic:
    """``phi(x) = a |x|^2 / 2 + b``."""

    a: float
    dim: int = 2
    b: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise ValueError("a must be positive")
        if not np.isfinite(self.b):
            raise ValueError("b must be finite")

    @property
    def even(self) -> bool:
        return True


@dataclass(frozen=True)
class ScaledNorm:
    """``phi(x) = b + c |x|``."""

    c: float
    b: float = 0.0
    dim: int = 2

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError("c must be positive")
        if not np.isfinite(self.b):
            raise ValueError("b must be finite")

    @property
    def even(self) -> bool:
        return True


@dataclass(frozen=True)
class BodyIndicator:
    """``phi = offset`` on the body and ``+inf`` off it."""

    body: ConvexBody
    offset: float = 0.0

    @property
    def dim(self) -> int:
        return self.body.dim

    @property
    def even(self) -> bool:
        return self.body.symmetric


@dataclass(frozen=True)
class SupportFn:
    """``phi = h_K + offset``."""

    body: ConvexBody
    offset: float = 0.0

    @property
    def dim(self) -> int:
        return self.body.dim

    @property
    def even(self) -> bool:
        return self.body.symmetric


@dataclass(frozen=True, eq=False)
class MaxAffine:
    """``phi(x) = max_i <s_i, x> + o_i``."""

    slopes: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.array(self.slopes, dtype=float))
        o = np.array(self.offsets, dtype=float).ravel()
        if s.shape[0] != o.size or s.shape[1] not in (1, 2, 3):
            raise ValueError("slopes must be (m, n) with n <= 3 and match offsets")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(o))):
            raise ValueError("slopes and offsets must be finite")
        s.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "slopes", s)
        object.__setattr__(self, "offsets", o)

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    @cached_property
    def even(self) -> bool:
        a = np.hstack([self.slopes, self.offsets[:, None]])
        b = np.hstack([-self.slopes, self.offsets[:, None]])
        d = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
        return bool(np.all(d.min(axis=1) <= 1e-12 * (1.0 + np.abs(a).max())))


@dataclass(frozen=True, eq=False)
class GridSampled:
    """Nodal values on a :class:`GridSpec`.

    Parameters
    ----------
    grid : GridSpec
    values : ndarray
        Shape ``grid.shape``; entries are finite or ``+inf``.
    even : bool
        When set, values must be exactly symmetric under ``x -> -x``.
    subgradients : ndarray, optional
        Shape ``grid.shape + (dim,)``; an exact subgradient at each node whose
        supporting plane minorizes the function everywhere (as produced by
        the discrete conjugate). Enables plane-maximum evaluation.
    """

    grid: GridSpec
    values: np.ndarray
    even: bool = False
    subgradients: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError("values do not match the grid shape")
        if np.isnan(v).any() or np.isneginf(v).any():
            raise ValueError("values must be finite or +inf")
        if np.isposinf(v).all():
            raise EmptyDomainError("empty effective domain")
        if self.even and not np.array_equal(v, _flip(v)):
            raise ValueError("even grid function is not symmetric")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.subgradients is not None:
            g = np.array(self.subgradients, dtype=float)
            if g.shape != self.grid.shape + (self.grid.dim,):
                raise ValueError("subgradients have the wrong shape")
            g.setflags(write=False)
            object.__setattr__(self, "subgradients", g)

    @property
    def dim(self) -> int:
        return self.grid.dim


ConvexFunctionRep = Union[Quadratic, ScaledNorm, BodyIndicator, SupportFn, MaxAffine, GridSampled]
CLOSED_FORMS = (Quadratic, ScaledNorm, BodyIndicator, SupportFn, MaxAffine)


def _flip(v: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """Reflect ``x -> -x`` over the first ``n`` (default all) axes."""
    return v[(slice(None, None, -1),) * (v.ndim if n is None else n)]


def is_discretely_convex(values: np.ndarray, tol: float = CONVEXITY_TOL) -> bool:
    """Midpoint test along axis and diagonal directions on the finite region."""
    v = np.asarray(values, dtype=float)
    n = v.ndim
    for d in itertools.product((-1, 0, 1), repeat=n):
        if not any(d) or next(c for c in d if c) < 0:
            continue
        mid, lo, hi = [], [], []
        for c in d:
            if c == 0:
                mid.append(slice(None))
                lo.append(slice(None))
                hi.append(slice(None))
            elif c == 1:
                mid.append(slice(1, -1))
                lo.append(slice(0, -2))
                hi.append(slice(2, None))
            else:
                mid.append(slice(1, -1))
                lo.append(slice(2, None))
                hi.append(slice(0, -2))
        a, b, m = v[tuple(lo)], v[tuple(hi)], v[tuple(mid)]
        ok = np.isfinite(a) & np.isfinite(b) & np.isfinite(m)
        with np.errstate(invalid="ignore"):
            bad = ok & (m > 0.5 * (a + b) + tol * (1.0 + np.abs(m)))
        if bad.any():
            return False
    return True


def _as_points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise ValueError(f"points must have last dimension {dim}")
    return x


# evaluation ---------------------------------------------------------------------------


def evaluate(rep: ConvexFunctionRep, x) -> np.ndarray:
    """Values of ``rep`` at points ``x`` of shape ``(..., n)``.

    Grid functions use multilinear interpolation, or the maximum of the
    supporting planes of the cell corners when subgradients are stored; a
    cell with an infinite corner evaluates to ``+inf``.
    """
    x = _as_points(x, rep.dim)
    if isinstance(rep, Quadratic):
        return 0.5 * rep.a * np.einsum("...i,...i->...", x, x) + rep.b
    if isinstance(rep, ScaledNorm):
        return rep.b + rep.c * np.linalg.norm(x, axis=-1)
    if isinstance(rep, BodyIndicator):
        return np.where(bd.contains(rep.body, x), rep.offset, INF)
    if isinstance(rep, SupportFn):
        return bd.support(rep.body, x) + rep.offset
    if isinstance(rep, MaxAffine):
        return (x @ rep.slopes.T + rep.offsets).max(axis=-1)
    if isinstance(rep, GridSampled):
        return _grid_eval(rep, x)[0]
    raise TypeError(f"unsupported representation {type(rep).__name__}")


def _cell_index(grid: GridSpec, x: np.ndarray):
    R = grid.radius
    if np.any(np.abs(x) > R * (1.0 + 1e-12)):
        raise DomainError("out of domain")
    f = (np.clip(x, -R, R) + R) / grid.h
    i0 = np.clip(np.floor(f).astype(np.int64), 0, grid.nodes - 2)
    return i0, f - i0


def _grid_eval(rep: GridSampled, x: np.ndarray, want_grad: bool = False):
    grid = rep.grid
    n = grid.dim
    i0, frac = _cell_index(grid, x)
    ax = grid.axis
    v = rep.values
    out_shape = x.shape[:-1]
    any_inf = np.zeros(out_shape, bool)
    if rep.subgradients is not None:
        best = np.full(out_shape, -INF)
        best_g = np.zeros(out_shape + (n,)) if want_grad else None
        for corner in itertools.product((0, 1), repeat=n):
            idx = tuple(i0[..., k] + corner[k] for k in range(n))
            vc = v[idx]
            gc = rep.subgradients[idx]
            xc = np.stack([ax[idx[k]] for k in range(n)], axis=-1)
            fin = np.isfinite(vc)
            any_inf |= ~fin
            plane = np.where(fin, vc + np.einsum("...i,...i->...", gc, x - xc), -INF)
            if want_grad:
                gn, bn = np.linalg.norm(gc, axis=-1), np.linalg.norm(best_g, axis=-1)
                with np.errstate(invalid="ignore"):
                    tie = np.isfinite(best) & (np.abs(plane - best) <= 1e-12 * (1.0 + np.abs(best)))
                take = (plane > best) & ~tie | (tie & (gn < bn))
                best_g = np.where(take[..., None], gc, best_g)
            best = np.maximum(best, plane)
        val = np.where(any_inf, INF, best)
        if want_grad:
            best_g = np.where(any_inf[..., None], 0.0, best_g)
        return val, best_g
    val = np.zeros(out_shape)
    for corner in itertools.product((0, 1), repeat=n):
        idx = tuple(i0[..., k] + corner[k] for k in range(n))
        w = np.ones(out_shape)
        for k in range(n):
            w = w * (frac[..., k] if corner[k] else 1.0 - frac[..., k])
        vc = v[idx]
        fin = np.isfinite(vc)
        any_inf |= ~fin
        val = val + w * np.where(fin, vc, 0.0)
    val = np.where(any_inf, INF, val)
    if not want_grad:
        return val, None
    grad = np.zeros(out_shape + (n,))
    for k in range(n):
        dk = _cell_partial(rep, i0, frac, k)
        # on a cell face the one-sided slopes bracket the subdifferential
        on_face = (frac[..., k] == 0.0) & (i0[..., k] > 0)
        if on_face.any():
            j0 = i0.copy()
            j0[..., k] -= 1
            f1 = frac.copy()
            f1[..., k] = 1.0
            left = _cell_partial(rep, j0, f1, k)
            straddle = (left <= 0.0) & (dk >= 0.0)
            face_val = np.where(straddle, 0.0, 0.5 * (left + dk))
            dk = np.where(on_face, face_val, dk)
        grad[..., k] = dk
    grad = np.where(np.isfinite(val)[..., None], grad, 0.0)
    grad = np.nan_to_num(grad, nan=0.0, posinf=0.0, neginf=0.0)
    return val, grad


def _cell_partial(rep: GridSampled, i0, frac, k):
    n = rep.grid.dim
    h = rep.grid.h
    out = np.zeros(i0.shape[:-1])
    for corner in itertools.product((0, 1), repeat=n):
        idx = tuple(i0[..., j] + corner[j] for j in range(n))
        w = np.ones(out.shape)
        for j in range(n):
            if j == k:
                w = w * ((1.0 if corner[j] else -1.0) / h)
            else:
                w = w * (frac[..., j] if corner[j] else 1.0 - frac[..., j])
        vc = rep.values[idx]
        with np.errstate(invalid="ignore"):
            out = out + np.where(w != 0, w * vc, 0.0)
    return out


def gradient(rep: ConvexFunctionRep, x) -> np.ndarray:
    """Gradient, or the minimal-norm subgradient where ``rep`` is not differentiable.

    Off the effective domain no subgradient exists; zeros are returned there
    (such points carry zero weight in every integral of ``e^{-phi}``). On
    the face between two grid cells the minimal-norm element is used when the
    one-sided slopes have opposite signs, and their average otherwise.
    """
    x = _as_points(x, rep.dim)
    if isinstance(rep, Quadratic):
        return rep.a * x
    if isinstance(rep, ScaledNorm):
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return np.where(r > 0, rep.c * x / np.where(r > 0, r, 1.0), 0.0)
    if isinstance(rep, BodyIndicator):
        return np.zeros_like(x)
    if isinstance(rep, SupportFn):
        K = rep.body
        if isinstance(K, Ball):
            r = np.linalg.norm(x, axis=-1, keepdims=True)
            return np.where(r > 0, K.r * x / np.where(r > 0, r, 1.0), 0.0)
        return _argmax_face(K.vertices, np.zeros(len(K.vertices)), x)
    if isinstance(rep, MaxAffine):
        return _argmax_face(rep.slopes, rep.offsets, x)
    if isinstance(rep, GridSampled):
        return _grid_eval(rep, x, want_grad=True)[1]
    raise TypeError(f"unsupported representation {type(rep).__name__}")


def _argmax_face(slopes: np.ndarray, offsets: np.ndarray, x: np.ndarray) -> np.ndarray:
    flat = x.reshape(-1, x.shape[-1])
    vals = flat @ slopes.T + offsets
    top = vals.max(axis=1, keepdims=True)
    tied = vals >= top - 1e-12 * (1.0 + np.abs(top))
    out = slopes[np.argmax(vals, axis=1)].copy()
    for i in np.nonzero(tied.sum(axis=1) > 1)[0]:
        out[i] = bd.min_norm_point(slopes[tied[i]])
    return out.reshape(x.shape)


def sample(rep: ConvexFunctionRep, grid: GridSpec) -> GridSampled:
    """Nodal samples of ``rep`` on ``grid``."""
    if rep.dim != grid.dim:
        raise ValueError("dimension mismatch")
    vals = evaluate(rep, grid.points())
    even = bool(rep.even)
    if even:
        vals = np.maximum(vals, _flip(vals))
    return GridSampled(grid, vals, even=even)


# conjugation --------------------------------------------------------------------------


def max_adjacent_slope(rep: GridSampled) -> float:
    """Largest absolute difference quotient between finite neighbouring nodes."""
    v = rep.values
    best = 0.0
    for k in range(v.ndim):
        a = np.take(v, np.arange(1, v.shape[k]), axis=k)
        b = np.take(v, np.arange(0, v.shape[k] - 1), axis=k)
        ok = np.isfinite(a) & np.isfinite(b)
        if ok.any():
            best = max(best, float(np.abs(a[ok] - b[ok]).max()) / rep.grid.h)
    return best


def default_dual_grid(rep: GridSampled) -> GridSpec:
    """Dual box sized by the largest nodal slope, with the same node count."""
    slope = max_adjacent_slope(rep)
    radius = slope if slope > 0 else rep.grid.radius
    return GridSpec(rep.dim, radius, rep.grid.nodes)


def _symmetrize(values: np.ndarray, subgrads: Optional[np.ndarray]):
    v = np.maximum(values, _flip(values))
    if subgrads is None:
        return v, None
    size = values.size
    flat = np.arange(size).reshape(values.shape)
    own = flat < _flip(flat)
    g = np.where(own[..., None], subgrads, -_flip(subgrads, values.ndim))
    centre = (flat == _flip(flat))
    g = np.where(centre[..., None], 0.0, g)
    return v, g


def grid_conjugate(values: np.ndarray, source: GridSpec, target: GridSpec, even: bool = False) -> GridSampled:
    """Discrete conjugate of nodal values, with stored maximizers as subgradients."""
    if source.dim != target.dim:
        raise ValueError("dimension mismatch")
    if np.isposinf(values).all():
        raise EmptyDomainError("empty effective domain")
    out, idx = discrete_conjugate(values, [source.axis] * source.dim, [target.axis] * target.dim)
    sub = np.stack([source.axis[i] for i in idx], axis=-1)
    if even:
        out, sub = _symmetrize(out, sub)
    return GridSampled(target, out, even=even, subgradients=sub)


def conjugate(rep: ConvexFunctionRep, target: Optional[GridSpec] = None) -> ConvexFunctionRep:
    """Legendre-Fenchel conjugate ``sup_x <x, y> - phi(x)``.

    Closed forms map to closed forms (``target`` is ignored). Grid functions
    and max-affine functions are transformed onto ``target``; for grid input
    it defaults to a box whose radius is the largest nodal slope.
    """
    if isinstance(rep, Quadratic):
        return Quadratic(1.0 / rep.a, rep.dim, -rep.b)
    if isinstance(rep, ScaledNorm):
        return BodyIndicator(Ball(rep.c, rep.dim), -rep.b)
    if isinstance(rep, BodyIndicator):
        return SupportFn(rep.body, -rep.offset)
    if isinstance(rep, SupportFn):
        return BodyIndicator(rep.body, -rep.offset)
    if isinstance(rep, MaxAffine):
        return _max_affine_conjugate(rep, target)
    if isinstance(rep, GridSampled):
        target = target or default_dual_grid(rep)
        return grid_conjugate(rep.values, rep.grid, target, even=rep.even)
    raise TypeError(f"unsupported representation {type(rep).__name__}")


def _max_affine_conjugate(rep: MaxAffine, target: Optional[GridSpec]) -> GridSampled:
    S, o = rep.slopes, rep.offsets
    n = rep.dim
    if target is None:
        radius = 1.05 * float(np.abs(S).max())
        target = GridSpec.with_spacing(n, radius, radius / (100 if n < 3 else 32))
    pts = target.points().reshape(-1, n)
    # phi* on conv(S) is the lower convex envelope of the lifted points (s_i, -o_i)
    lifted = np.hstack([S, -o[:, None]])
    try:
        eq = ConvexHull(lifted).equations
        eq = eq[eq[:, n] < -1e-12]
        alpha = -eq[:, :n] / eq[:, n : n + 1]
        beta = -eq[:, n + 1] / eq[:, n]
    except QhullError:
        # all lifted points on one hyperplane: the envelope is affine
        A = np.hstack([S, np.ones((len(S), 1))])
        coef, *_ = np.linalg.lstsq(A, -o, rcond=None)
        alpha, beta = coef[None, :n], coef[n:]
    z = pts @ alpha.T + beta
    vals = z.max(axis=1)
    if n == 1:
        inside = (pts[:, 0] >= S.min() - 1e-12) & (pts[:, 0] <= S.max() + 1e-12)
    else:
        try:
            hull = ConvexHull(S)
        except QhullError as exc:
            raise GeometryError("slopes must affinely span R^n") from exc
        eq = hull.equations
        inside = np.all(pts @ eq[:, :n].T + eq[:, n] <= 1e-12 * (1.0 + np.abs(S).max()), axis=1)
    vals = np.where(inside, vals, INF).reshape(target.shape)
    even = rep.even
    if even:
        vals = np.maximum(vals, _flip(vals))
    return GridSampled(target, vals, even=even)


def convexify(rep: ConvexFunctionRep, dual: Optional[GridSpec] = None) -> ConvexFunctionRep:
    """Closed convex envelope ``phi**`` by two conjugations.

    Closed forms are already closed and convex and are returned unchanged.
    Grid output is ``+inf`` outside the convex hull of the finite nodes.
    """
    if not isinstance(rep, GridSampled):
        return rep
    dual = dual or default_dual_grid(rep)
    star = grid_conjugate(rep.values, rep.grid, dual, even=rep.even)
    back = grid_conjugate(star.values, dual, rep.grid, even=rep.even)
    finite = np.isfinite(rep.values)
    if finite.all():
        return back
    mask = _hull_mask(rep.grid, finite)
    vals = np.where(mask, back.values, INF)
    return GridSampled(rep.grid, vals, even=rep.even, subgradients=back.subgradients)


def _hull_mask(grid: GridSpec, finite: np.ndarray) -> np.ndarray:
    pts = grid.points()
    if grid.dim == 1:
        xs = pts[finite][:, 0]
        x = pts[..., 0]
        return (x >= xs.min()) & (x <= xs.max())
    try:
        hull = ConvexHull(pts[finite])
    except QhullError:
        return finite
    eq = hull.equations
    tol = 1e-9 * (1.0 + grid.radius)
    return np.all(pts @ eq[:, :-1].T + eq[:, -1] <= tol, axis=-1)


# log-concave functions ----------------------------------------------------------------

_AUTO = "auto"


@dataclass(frozen=True, eq=False)
class LogConcaveFunction:
    """``f = exp(-phi)`` with a support descriptor and a maximizer.

    ``support`` is a convex body or ``None`` for unbounded support; it is
    inferred from ``phi`` when left as ``"auto"``. ``max_location`` is a point
    where ``phi`` attains its minimum and is also inferred when omitted.
    """

    phi: ConvexFunctionRep
    support: object = _AUTO
    max_location: Optional[np.ndarray] = None

    def __post_init__(self):
        if isinstance(self.phi, GridSampled) and not is_discretely_convex(self.phi.values):
            raise ValueError("grid function is not discretely convex")
        if isinstance(self.support, str):
            object.__setattr__(self, "support", _infer_support(self.phi))
        if self.max_location is None:
            object.__setattr__(self, "max_location", _argmin(self.phi))
        else:
            object.__setattr__(self, "max_location", np.asarray(self.max_location, dtype=float).reshape(self.dim))

    @property
    def dim(self) -> int:
        return self.phi.dim

    @property
    def even(self) -> bool:
        return bool(self.phi.even)

    @property
    def bounded(self) -> bool:
        return self.support is not None

    def value(self, x) -> np.ndarray:
        return np.exp(-evaluate(self.phi, x))

    @cached_property
    def max_value(self) -> float:
        return float(np.exp(-evaluate(self.phi, self.max_location)))

    def extent(self, tail: float = 30.0) -> float:
        """Radius beyond which ``phi - min phi >= tail`` (circumradius if bounded)."""
        if self.support is not None:
            return bd.inradius_circumradius(self.support)[1]
        rep = self.phi
        if isinstance(rep, Quadratic):
            return math.sqrt(2.0 * tail / rep.a)
        if isinstance(rep, ScaledNorm):
            return tail / rep.c
        if isinstance(rep, SupportFn):
            r_in = bd.inradius_circumradius(rep.body)[0]
            if r_in <= 0:
                raise ValueError("support function does not grow in every direction")
            return tail / r_in
        if isinstance(rep, MaxAffine):
            r_in = _slope_inradius(rep.slopes)
            if r_in <= 0:
                raise ValueError("max-affine function does not grow in every direction")
            spread = float(rep.offsets.max() - rep.offsets.min())
            centre = float(np.linalg.norm(self.max_location))
            return centre + (tail + spread) / r_in
        return rep.grid.radius


def _slope_inradius(S: np.ndarray) -> float:
    n = S.shape[1]
    if n == 1:
        return float(min(-S.min(), S.max()))
    try:
        eq = ConvexHull(S).equations
    except QhullError:
        return 0.0
    return float((-eq[:, n]).min())


def _infer_support(rep: ConvexFunctionRep):
    if isinstance(rep, BodyIndicator):
        return rep.body
    if isinstance(rep, GridSampled):
        v = rep.values
        n = v.ndim
        boundary = np.zeros(v.shape, bool)
        for k in range(n):
            sl = [slice(None)] * n
            sl[k] = 0
            boundary[tuple(sl)] = True
            sl[k] = -1
            boundary[tuple(sl)] = True
        finite = np.isfinite(v)
        if finite[boundary].any():
            return None
        try:
            return Polytope.from_vertices(rep.grid.points()[finite])
        except GeometryError:
            return None
    return None


def _argmin(rep: ConvexFunctionRep) -> np.ndarray:
    n = rep.dim
    if isinstance(rep, (Quadratic, ScaledNorm)):
        return np.zeros(n)
    if isinstance(rep, (BodyIndicator, SupportFn)):
        K = rep.body
        if isinstance(K, Ball) or bool(bd.contains(K, np.zeros(n))):
            return np.zeros(n)
        if isinstance(rep, BodyIndicator):
            return K.vertices.mean(axis=0)
        raise ValueError("support function of a body missing the origin is unbounded below")
    if isinstance(rep, MaxAffine):
        from scipy.optimize import linprog

        c = np.zeros(n + 1)
        c[-1] = 1.0
        res = linprog(c, A_ub=np.hstack([rep.slopes, -np.ones((len(rep.offsets), 1))]), b_ub=-rep.offsets,
                      bounds=[(None, None)] * (n + 1), method="highs")
        if res.status != 0:
            raise ValueError("max-affine function is unbounded below")
        return res.x[:n]
    v = rep.values
    pts = rep.grid.points().reshape(-1, n)
    flat = v.ravel()
    m = flat.min()
    cand = np.nonzero(flat == m)[0]
    best = cand[np.argmin(np.linalg.norm(pts[cand], axis=1))]
    return pts[best].copy()


# sup-convolution ----------------------------------------------------------------------


def _bounded_dual_radius(rep: ConvexFunctionRep) -> Optional[float]:
    """Circumradius of the effective domain of ``rep*`` when it is bounded."""
    if isinstance(rep, ScaledNorm):
        return rep.c
    if isinstance(rep, SupportFn):
        return bd.inradius_circumradius(rep.body)[1]
    if isinstance(rep, MaxAffine):
        return float(np.linalg.norm(rep.slopes, axis=1).max())
    return None


def _auto_spacing(n: int, radius: float) -> float:
    return min(0.05, radius / 100.0) if n < 3 else radius / 32.0


def default_grids(f: LogConcaveFunction, g: LogConcaveFunction, a: float, b: float) -> tuple[GridSpec, GridSpec]:
    """Primal and dual grids used by :func:`sup_combine` when none are given."""
    n = f.dim
    if f.support is not None and g.support is not None:
        body = bd.combine(f.support, a, g.support, b)
        r_p = 1.05 * bd.inradius_circumradius(body)[1]
    else:
        r_p = a * f.extent() + b * g.extent()
    radii = [_bounded_dual_radius(f.phi)]
    if b > 0:
        radii.append(_bounded_dual_radius(g.phi))
    radii = [r for r in radii if r is not None]
    if radii:
        r_d = 1.05 * min(radii)
    else:
        probe = np.vstack([np.eye(n), -np.eye(n)]) * r_p / max(a, 1e-300)
        slopes = [np.linalg.norm(gradient(f.phi, _clip_to(f.phi, probe)), axis=-1).max()]
        if b > 0:
            slopes.append(np.linalg.norm(gradient(g.phi, _clip_to(g.phi, probe)), axis=-1).max())
        r_d = 1.05 * max(max(slopes), 1e-3)
    primal = GridSpec.with_spacing(n, r_p, _auto_spacing(n, r_p))
    dual = GridSpec.with_spacing(n, r_d, _auto_spacing(n, r_d))
    return primal, dual


def _clip_to(rep, pts):
    if isinstance(rep, GridSampled):
        return np.clip(pts, -rep.grid.radius, rep.grid.radius)
    return pts


def _dual_values(rep: ConvexFunctionRep, dual: GridSpec) -> np.ndarray:
    if isinstance(rep, GridSampled):
        return conjugate(rep, dual).values
    star = conjugate(rep, dual)
    if isinstance(star, GridSampled):
        if star.grid == dual:
            return star.values
        return evaluate(star, dual.points())
    return evaluate(star, dual.points())


def sup_combine(f: LogConcaveFunction, g: LogConcaveFunction, a: float, b: float,
                primal: Optional[GridSpec] = None, dual: Optional[GridSpec] = None) -> LogConcaveFunction:
    """``exp(-(a phi* + b psi*)*)``, i.e. ``a.f (+) b.g`` for ``a > 0, b >= 0``.

    Pairs of support-function or quadratic conjugates combine in closed form;
    everything else is sampled on the dual grid and transformed back onto the
    primal grid.
    """
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    if not (a > 0 and b >= 0):
        raise ValueError("coefficients must satisfy a > 0, b >= 0")
    fs = conjugate(f.phi) if isinstance(f.phi, CLOSED_FORMS[:4]) else None
    gs = conjugate(g.phi) if isinstance(g.phi, CLOSED_FORMS[:4]) else None
    if isinstance(fs, SupportFn) and isinstance(gs, SupportFn):
        body = bd.combine(fs.body, a, gs.body, b)
        return LogConcaveFunction(BodyIndicator(body, -(a * fs.offset + b * gs.offset)))
    if isinstance(fs, Quadratic) and isinstance(gs, Quadratic):
        kappa = a * fs.a + b * gs.a
        return LogConcaveFunction(Quadratic(1.0 / kappa, f.dim, -(a * fs.b + b * gs.b)))
    if primal is None or dual is None:
        p0, d0 = default_grids(f, g, a, b)
        primal = primal or p0
        dual = dual or d0
    vals = a * _dual_values(f.phi, dual)
    if b > 0:
        vals = vals + b * _dual_values(g.phi, dual)
    even = f.even and g.even
    rep = grid_conjugate(vals, dual, primal, even=even)
    support = None
    if f.support is not None and g.support is not None:
        support = bd.combine(f.support, a, g.support, b)
    return LogConcaveFunction(rep, support=support)


def sup_convolve(f: LogConcaveFunction, g: LogConcaveFunction, t: float,
                 primal: Optional[GridSpec] = None, dual: Optional[GridSpec] = None) -> LogConcaveFunction:
    """Sup-convolution ``f (+) t.g = exp(-(phi* + t psi*)*)`` for ``t >= 0``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return sup_combine(f, g, 1.0, t, primal, dual)


# level sets ---------------------------------------------------------------------------


def level_set(f: LogConcaveFunction, s: float) -> ConvexBody:
    """The superlevel set ``[f >= s]`` for ``0 < s < max f``."""
    M = f.max_value
    if not (0 < s < M):
        raise GeometryError("empty or degenerate level set")
    lam = -math.log(s)
    rep = f.phi
    n = f.dim
    if isinstance(rep, Quadratic):
        return Ball(math.sqrt(2.0 * (lam - rep.b) / rep.a), n)
    if isinstance(rep, ScaledNorm):
        return Ball((lam - rep.b) / rep.c, n)
    if isinstance(rep, BodyIndicator):
        return rep.body
    if isinstance(rep, SupportFn):
        return bd.scale(bd.polar(rep.body), lam - rep.offset)
    if isinstance(rep, MaxAffine):
        return Polytope.from_halfspaces(rep.slopes, lam - rep.offsets)
    return _grid_level_set(rep, lam)


def _grid_level_set(rep: GridSampled, lam: float) -> ConvexBody:
    v = rep.values
    pts = rep.grid.points()
    n = rep.grid.dim
    inside = v <= lam
    if not inside.any():
        raise GeometryError("empty level set")
    cand = [pts[inside]]
    for k in range(n):
        a = np.take(v, np.arange(0, v.shape[k] - 1), axis=k)
        b = np.take(v, np.arange(1, v.shape[k]), axis=k)
        pa = np.take(pts, np.arange(0, v.shape[k] - 1), axis=k)
        pb = np.take(pts, np.arange(1, v.shape[k]), axis=k)
        cross = (a <= lam) != (b <= lam)
        fin = cross & np.isfinite(a) & np.isfinite(b)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(fin, (lam - a) / (b - a), 0.0)
        cand.append((pa + t[..., None] * (pb - pa))[fin])
    return Polytope.from_vertices(np.concatenate(cand))
