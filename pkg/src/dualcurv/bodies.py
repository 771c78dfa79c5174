"""Convex bodies: balls and polytopes with support, radial and polar operations.

Also provides dual quermassintegrals, the dual curvature measures of bodies and
the mixed quantity ``V_{1,q}(K, L)``.

Bodies are immutable. Polytopes hold both a vertex and a halfspace description
(``<a_i, x> <= b_i`` with unit ``a_i``) and are validated on construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from ._quadrature import angular_rule, gauss_jacobi_radial, gauss_legendre, sphere_area

GEOM_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for invalid bodies or operations outside their preconditions."""


class SingularityError(GeometryError):
    """Raised when a facet integral has a non-integrable singularity at the origin."""


@dataclass(frozen=True)
class Ball:
    """Euclidean ball of radius ``r`` centred at the origin."""

    r: float
    dim: int = 2

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise GeometryError("ball radius must be positive and finite")
        if self.dim not in (1, 2, 3):
            raise GeometryError("dimension must be 1, 2 or 3")

    @property
    def origin_interior(self) -> bool:
        return True

    @property
    def symmetric(self) -> bool:
        return True


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex polytope with consistent vertex and halfspace descriptions.

    Attributes
    ----------
    vertices : (m, n) array
        Extreme points.
    normals : (k, n) array
        Unit outer facet normals.
    offsets : (k,) array
        Facet offsets ``b_i`` so that ``K = {x : normals @ x <= offsets}``.
    facets : tuple of int arrays
        Vertex indices of each facet; in 3-D ordered counter-clockwise seen
        from outside.
    """

    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    facets: tuple = field(repr=False)

    def __post_init__(self):
        for name in ("vertices", "normals", "offsets"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        scale = float(np.abs(self.vertices).max())
        slack = self.vertices @ self.normals.T - self.offsets
        if slack.max() > GEOM_TOL * scale:
            raise GeometryError("vertex and halfspace descriptions are inconsistent")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @cached_property
    def origin_interior(self) -> bool:
        return bool(np.all(self.offsets > GEOM_TOL * self._scale))

    @cached_property
    def symmetric(self) -> bool:
        v = self.vertices
        d = np.abs(v[:, None, :] + v[None, :, :]).max(axis=2)
        return bool(np.all(d.min(axis=1) <= GEOM_TOL * self._scale))

    @cached_property
    def _scale(self) -> float:
        # tolerances are relative so tiny level sets behave like unit bodies
        return float(np.abs(self.vertices).max())

    # constructors -----------------------------------------------------------------

    @classmethod
    def from_vertices(cls, points) -> "Polytope":
        """Convex hull of a point set (n = 1, 2 or 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise GeometryError("vertices must be finite")
        n = pts.shape[1]
        if n == 1:
            lo, hi = float(pts.min()), float(pts.max())
            if hi - lo <= GEOM_TOL * (abs(lo) + abs(hi)):
                raise GeometryError("degenerate polytope")
            return cls(np.array([[lo], [hi]]), np.array([[-1.0], [1.0]]), np.array([-lo, hi]), (np.array([0]), np.array([1])))
        if n not in (2, 3):
            raise GeometryError("dimension must be 1, 2 or 3")
        try:
            hull = ConvexHull(pts)
        except QhullError as exc:
            raise GeometryError("degenerate polytope") from exc
        verts = pts[hull.vertices]
        scale = 1.0 + float(np.abs(verts).max())
        eq = hull.equations
        normals = eq[:, :n]
        offsets = -eq[:, n]
        # merge coplanar simplices into facets
        key = np.round(np.hstack([normals, offsets[:, None] / scale]) / 1e-7).astype(np.int64)
        _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.ravel()
        order = np.argsort(first)
        vmap = {int(g): i for i, g in enumerate(hull.vertices)}
        facet_normals, facet_offsets, facets = [], [], []
        for grp in order:
            members = np.nonzero(inverse == grp)[0]
            a = normals[members[0]]
            b = offsets[members[0]]
            ids = np.unique(hull.simplices[members].ravel())
            # keep only extreme points that lie on the facet plane
            ids = np.array([vmap[i] for i in ids if i in vmap])
            on = np.abs(verts[ids] @ a - b) <= 1e-9 * scale
            ids = ids[on]
            ids = _order_facet(verts, ids, a)
            facet_normals.append(a)
            facet_offsets.append(b)
            facets.append(ids)
        return cls(verts, np.array(facet_normals), np.array(facet_offsets), tuple(facets))

    @classmethod
    def from_halfspaces(cls, normals, offsets) -> "Polytope":
        """Bounded intersection of halfspaces ``normals @ x <= offsets``."""
        a = np.atleast_2d(np.asarray(normals, dtype=float))
        b = np.asarray(offsets, dtype=float).ravel()
        norms = np.linalg.norm(a, axis=1)
        if np.any(norms == 0):
            raise GeometryError("zero halfspace normal")
        a = a / norms[:, None]
        b = b / norms
        # solve at unit scale, then dilate exactly
        size = float(np.abs(b).max())
        if size == 0.0:
            raise GeometryError("halfspaces do not bound a body with interior")
        if not math.isclose(size, 1.0):
            return cls.from_halfspaces(a, b / size)._dilated(size)
        n = a.shape[1]
        # Chebyshev centre as interior point
        c = np.zeros(n + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=np.hstack([a, np.ones((a.shape[0], 1))]), b_ub=b,
                      bounds=[(None, None)] * n + [(0, None)], method="highs")
        if res.status != 0 or res.x[-1] <= GEOM_TOL:
            raise GeometryError("halfspaces do not bound a body with interior")
        centre = res.x[:n]
        if n == 1:
            lo = max((-bi for ai, bi in zip(a[:, 0], b) if ai < 0), default=-np.inf)
            hi = min((bi for ai, bi in zip(a[:, 0], b) if ai > 0), default=np.inf)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise GeometryError("halfspaces are unbounded")
            return cls.from_vertices([[lo], [hi]])
        try:
            hs = HalfspaceIntersection(np.hstack([a, -b[:, None]]), centre)
        except QhullError as exc:
            raise GeometryError("halfspace intersection failed") from exc
        pts = hs.intersections
        if not np.all(np.isfinite(pts)):
            raise GeometryError("halfspaces are unbounded")
        return cls.from_vertices(pts)

    def _dilated(self, lam: float) -> "Polytope":
        return Polytope(self.vertices * lam, self.normals, self.offsets * lam, self.facets)

    @classmethod
    def box(cls, half_widths) -> "Polytope":
        """Axis-parallel box ``prod [-w_i, w_i]``."""
        w = np.asarray(half_widths, dtype=float)
        n = w.size
        corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
        return cls.from_vertices(corners * w)


ConvexBody = Union[Ball, Polytope]


def _order_facet(verts: np.ndarray, ids: np.ndarray, normal: np.ndarray) -> np.ndarray:
    n = verts.shape[1]
    if n == 2:
        # two extreme points along the edge, oriented counter-clockwise
        t = np.array([-normal[1], normal[0]])
        s = verts[ids] @ t
        return np.array([ids[np.argmin(s)], ids[np.argmax(s)]])
    p = verts[ids]
    c = p.mean(axis=0)
    e1 = p[0] - c
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    ang = np.arctan2((p - c) @ e2, (p - c) @ e1)
    return ids[np.argsort(ang)]


# basic functionals ------------------------------------------------------------------


def dim_of(K: ConvexBody) -> int:
    return K.dim


def support(K: ConvexBody, y) -> np.ndarray:
    """Support function ``h_K(y) = max_{x in K} <x, y>`` (vectorised over y)."""
    y = np.asarray(y, dtype=float)
    if isinstance(K, Ball):
        return K.r * np.linalg.norm(y, axis=-1)
    return (y @ K.vertices.T).max(axis=-1)


def _require_interior(K: ConvexBody):
    if not K.origin_interior:
        raise GeometryError("origin is not an interior point")


def radial(K: ConvexBody, u) -> np.ndarray:
    """Radial function ``rho_K(u) = max{t : t u in K}`` (vectorised over u)."""
    _require_interior(K)
    u = np.asarray(u, dtype=float)
    if isinstance(K, Ball):
        return K.r / np.linalg.norm(u, axis=-1)
    dots = u @ K.normals.T
    with np.errstate(divide="ignore"):
        ratio = np.where(dots > 0, K.offsets / np.where(dots > 0, dots, 1.0), np.inf)
    return ratio.min(axis=-1)


def gauge(K: ConvexBody, x) -> np.ndarray:
    """Minkowski functional ``||x||_K = h_{K*}(x)``."""
    _require_interior(K)
    x = np.asarray(x, dtype=float)
    if isinstance(K, Ball):
        return np.linalg.norm(x, axis=-1) / K.r
    return np.maximum((x @ K.normals.T / K.offsets).max(axis=-1), 0.0)


def contains(K: ConvexBody, x, tol: float = GEOM_TOL) -> np.ndarray:
    """Membership test with relative tolerance ``tol``."""
    x = np.asarray(x, dtype=float)
    if isinstance(K, Ball):
        return np.linalg.norm(x, axis=-1) <= K.r * (1.0 + tol)
    return np.all(x @ K.normals.T <= K.offsets + tol * K._scale, axis=-1)


def polar(K: ConvexBody) -> ConvexBody:
    """Polar body ``{y : <x, y> <= 1 for all x in K}``."""
    _require_interior(K)
    if isinstance(K, Ball):
        return Ball(1.0 / K.r, K.dim)
    return Polytope.from_vertices(K.normals / K.offsets[:, None])


def scale(K: ConvexBody, lam: float) -> ConvexBody:
    """Dilate ``K`` by ``lam > 0``."""
    if lam <= 0:
        raise GeometryError("scale factor must be positive")
    if isinstance(K, Ball):
        return Ball(K.r * lam, K.dim)
    return K._dilated(lam)


def inradius_circumradius(K: ConvexBody) -> tuple[float, float]:
    """Radii of the largest centred ball inside ``K`` and smallest containing it."""
    if isinstance(K, Ball):
        return K.r, K.r
    return max(float(K.offsets.min()), 0.0), float(np.linalg.norm(K.vertices, axis=1).max())


def ball_polygon(r: float, dim: int, n_sides: int = 256) -> Polytope:
    """Circumscribed regular polygon (n=2) or interval (n=1) approximating ``Ball(r)``."""
    if dim == 1:
        return Polytope.from_vertices([[-r], [r]])
    if dim != 2:
        raise GeometryError("polygonal ball approximation is only available for n <= 2")
    th = 2.0 * np.pi * np.arange(n_sides) / n_sides
    R = r / np.cos(np.pi / n_sides)
    return Polytope.from_vertices(np.stack([R * np.cos(th), R * np.sin(th)], axis=1))


def minkowski_sum(K: ConvexBody, t: float, L: ConvexBody) -> ConvexBody:
    """``K + t L`` for ``t >= 0``.

    Ball plus ball is exact. When a ball meets a polytope the ball is replaced
    by a circumscribed 256-gon.
    """
    if t < 0:
        raise GeometryError("t must be nonnegative")
    if t == 0:
        return K
    if isinstance(K, Ball) and isinstance(L, Ball):
        return Ball(K.r + t * L.r, K.dim)
    Kp = ball_polygon(K.r, K.dim) if isinstance(K, Ball) else K
    Lp = ball_polygon(L.r, L.dim) if isinstance(L, Ball) else L
    pts = (Kp.vertices[:, None, :] + t * Lp.vertices[None, :, :]).reshape(-1, Kp.dim)
    return Polytope.from_vertices(pts)


def combine(K: ConvexBody, a: float, L: ConvexBody, b: float) -> ConvexBody:
    """``a K + b L`` for ``a > 0, b >= 0``."""
    return minkowski_sum(scale(K, a), b, L) if b > 0 else scale(K, a)


# spherical measures -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SphericalMeasure:
    """Finite atomic measure on the unit sphere."""

    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        d = np.array(self.directions, dtype=float).reshape(len(self.weights), -1) if len(self.weights) else np.zeros((0, 1))
        w = np.array(self.weights, dtype=float)
        if w.size and (not np.all(np.isfinite(w)) or w.min() < 0):
            raise GeometryError("weights must be finite and nonnegative")
        if w.size and np.abs(np.linalg.norm(d, axis=1) - 1.0).max() > 1e-12:
            raise GeometryError("directions must be unit vectors")
        d.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "weights", w)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        if self.weights.size == 0:
            return 0.0
        return float(np.dot(self.weights, fn(self.directions)))

    def scaled(self, factor) -> "SphericalMeasure":
        return SphericalMeasure(self.directions, self.weights * factor)

    def rows(self) -> np.ndarray:
        return np.hstack([self.directions, self.weights[:, None]])


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# facet quadrature -------------------------------------------------------------------

_PANEL = 0.5
_ORDER = 16


def _split_panels(a: float, b: float, width: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(_ORDER)
    k = max(1, int(np.ceil(abs(b - a) / width)))
    edges = np.linspace(a, b, k + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), np.broadcast_to(weights, nodes.shape).ravel()


def _jacobi_segment(length: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, length] for the weight s**beta (beta > -1)."""
    r, w = gauss_jacobi_radial(_ORDER, beta + 1.0)
    return r * length, w * length ** (beta + 1.0)


def facet_rule(points: np.ndarray, normal: np.ndarray, offset: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature for ``g -> int_F g(x) |x|**(q-n) dH^{n-1}(x)`` on one facet.

    ``points`` are the facet vertices (ordered counter-clockwise in 3-D), and
    ``normal``/``offset`` its supporting plane. The rule removes the weight's
    singularity at the foot point of the origin: a hyperbolic substitution
    when the plane misses the origin, a Jacobi rule when it contains it.

    Returns points of shape (m, n) and weights of shape (m,).
    """
    n = points.shape[1]
    d = float(offset)
    scale_ = float(np.abs(points).max())
    if n == 1:
        x = points[:1]
        if abs(x[0, 0]) <= GEOM_TOL * scale_:
            if q < 1:
                raise SingularityError("non-integrable singularity at the origin")
            # H^0 weight |x|^(q-1) at x = 0 is 1 for q = 1 and 0 for q > 1
            return x, np.array([1.0 if q == 1 else 0.0])
        return x, np.array([abs(x[0, 0]) ** (q - 1.0)])
    through_origin = abs(d) <= GEOM_TOL * scale_
    if through_origin and q <= 1:
        raise SingularityError("non-integrable singularity at the origin")
    foot = d * normal
    if n == 2:
        p, r = points[0], points[1]
        tang = _unit(r - p)
        sp, sr = float((p - foot) @ tang), float((r - foot) @ tang)
        if not through_origin:
            ad = abs(d)
            u, wu = _split_panels(np.arcsinh(sp / ad), np.arcsinh(sr / ad), _PANEL)
            s = ad * np.sinh(u)
            w = wu * ad ** (q - 1.0) * np.cosh(u) ** (q - 1.0)
            return foot + s[:, None] * tang, w
        if sp > 0 or sr < 0:
            raise GeometryError("a facet whose plane contains the origin must contain it")
        pieces_s, pieces_w = [], []
        if sr > 0:
            s, w = _jacobi_segment(sr, q - 2.0)
            pieces_s.append(s)
            pieces_w.append(w)
        if sp < 0:
            s, w = _jacobi_segment(-sp, q - 2.0)
            pieces_s.append(-s)
            pieces_w.append(w)
        s = np.concatenate(pieces_s)
        return foot + s[:, None] * tang, np.concatenate(pieces_w)
    return _facet_rule_3d(points, normal, d, q, through_origin)


def _facet_rule_3d(points, normal, d, q, through_origin):
    foot = d * normal
    e1 = points[0] - foot
    if np.linalg.norm(e1) < 1e-12:
        e1 = points[1] - foot
    e1 = e1 - (e1 @ normal) * normal
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    loc = np.stack([(points - foot) @ e1, (points - foot) @ e2], axis=1)
    xg, wg = gauss_legendre(_ORDER)
    all_x, all_w = [], []
    m = len(points)
    for i in range(m):
        a, b = loc[i], loc[(i + 1) % m]
        cross = a[0] * b[1] - a[1] * b[0]
        edge = b - a
        elen = np.linalg.norm(edge)
        if elen == 0:
            continue
        h_e = abs(cross) / elen
        if h_e <= 1e-14 * (1.0 + np.abs(loc).max()):
            continue
        th_a, th_b = np.arctan2(a[1], a[0]), np.arctan2(b[1], b[0])
        dth = np.angle(np.exp(1j * (th_b - th_a)))
        # angle of the edge line's normal from the foot point
        nvec = np.array([edge[1], -edge[0]]) / elen
        if nvec @ a < 0:
            nvec = -nvec
        th_n = np.arctan2(nvec[1], nvec[0])
        th, wth = _split_panels(th_a, th_a + dth, 0.25)
        R = h_e / np.cos(th - th_n)
        if not through_origin:
            d = abs(d)
            U = np.arcsinh(R / d)
            n_pan = max(1, int(np.ceil(U.max() / _PANEL)))
            width = U / n_pan
            k = np.arange(n_pan)
            u = (width[:, None, None] * (k[None, :, None] + 0.5 * (xg[None, None, :] + 1.0))).reshape(len(th), -1)
            wu = np.broadcast_to((0.5 * width[:, None, None] * wg[None, None, :]), (len(th), n_pan, _ORDER)).reshape(len(th), -1)
            rho = d * np.sinh(u)
            wr = wu * d ** (q - 1.0) * np.cosh(u) ** (q - 2.0) * np.sinh(u)
        else:
            r01, w01 = gauss_jacobi_radial(_ORDER, q - 1.0)
            rho = R[:, None] * r01[None, :]
            wr = w01[None, :] * R[:, None] ** (q - 1.0)
        pts = foot + (rho * np.cos(th)[:, None])[..., None] * e1 + (rho * np.sin(th)[:, None])[..., None] * e2
        all_x.append(pts.reshape(-1, 3))
        all_w.append((wr * wth[:, None]).ravel())
    return np.concatenate(all_x), np.concatenate(all_w)


def facet_rules(K: Polytope, q: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Facet rules for every facet of ``K`` (see :func:`facet_rule`)."""
    return [facet_rule(K.vertices[ids], K.normals[i], K.offsets[i], q) for i, ids in enumerate(K.facets)]


# dual quermassintegrals --------------------------------------------------------------


def _check_q(q: float):
    if not (np.isfinite(q) and q > 0):
        raise GeometryError("q must be positive")


def dual_quermass(K: ConvexBody, q: float) -> float:
    """Dual quermassintegral ``(1/q) int_{S^{n-1}} rho_K(u)**q du``.

    Balls use the closed form. Polygons integrate each facet's angular sector
    with adaptive quadrature; 3-D polytopes project each facet triangle
    centrally onto the sphere and use a tensor Gauss rule on the triangle.
    """
    _check_q(q)
    _require_interior(K)
    n = K.dim
    if isinstance(K, Ball):
        return sphere_area(n) * K.r**q / q
    if n == 1:
        return float((radial(K, np.array([1.0])) ** q + radial(K, np.array([-1.0])) ** q) / q)
    if n == 2:
        total = 0.0
        for i, ids in enumerate(K.facets):
            p, r = K.vertices[ids[0]], K.vertices[ids[1]]
            ta = np.arctan2(p[1], p[0])
            dth = np.angle(np.exp(1j * (np.arctan2(r[1], r[0]) - ta)))
            alpha = np.arctan2(K.normals[i, 1], K.normals[i, 0])
            d = K.offsets[i]
            val, _ = quad(lambda th: (d / np.cos(th - alpha)) ** q, ta, ta + dth,
                          epsabs=0.0, epsrel=1e-13, limit=200)
            total += val
        return total / q
    return _dual_quermass_3d(K, q)


def _triangle_rule(m: int = 24, levels: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric (v, w) nodes and weights on the reference triangle, area 1/2."""
    x, wx = gauss_legendre(m)
    xi, eta = 0.5 * (x + 1.0), 0.5 * (x + 1.0)
    XI, ETA = np.meshgrid(xi, eta, indexing="ij")
    W = np.outer(wx, wx) * 0.25 * XI
    v, w = (XI * (1.0 - ETA)).ravel(), (XI * ETA).ravel()
    W = W.ravel()
    tris = [(np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))]
    for _ in range(levels):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (bc, ca, ab)]
        tris = nxt
    nodes, weights = [], []
    for a, b, c in tris:
        jac = abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0])
        nodes.append(a + np.outer(v, b - a) + np.outer(w, c - a))
        weights.append(W * jac)
    return np.concatenate(nodes), np.concatenate(weights)


def _dual_quermass_3d(K: Polytope, q: float) -> float:
    # central projection of each fan triangle (A, B, C): x = s * p(v, w), dx = s^2 |det(A,B,C)| ds dv dw
    vw, wt = _triangle_rule()
    total = 0.0
    for ids in K.facets:
        P = K.vertices[ids]
        for j in range(1, len(P) - 1):
            A, B, C = P[0], P[j], P[j + 1]
            det = abs(np.linalg.det(np.stack([A, B, C])))
            p = A + np.outer(vw[:, 0], B - A) + np.outer(vw[:, 1], C - A)
            total += det * float(np.dot(wt, np.linalg.norm(p, axis=1) ** (q - 3.0)))
    return total / q


def normalized_dual_quermass(K: ConvexBody, q: float) -> float:
    """``(V_q(K))**(1/q)``, homogeneous of degree one."""
    return dual_quermass(K, q) ** (1.0 / q)


# dual curvature measures -----------------------------------------------------------


def _ball_measure(r: float, n: int, density_scale: float) -> SphericalMeasure:
    dirs, w = angular_rule(n, n_angles=4096, n_polar=128)
    return SphericalMeasure(dirs, w * density_scale)


def dual_curvature_measure(K: ConvexBody, q: float) -> SphericalMeasure:
    """Dual curvature measure ``C_q(K, .)``.

    Polytopes get one atom per facet with weight ``d_i * int_F |x|**(q-n)``;
    balls get uniform samples with total ``|S^{n-1}| r**q``. Facets through the
    origin carry zero weight (``x . nu = 0`` there) but are rejected for
    ``q < 1``.
    """
    _check_q(q)
    if isinstance(K, Ball):
        return _ball_measure(K.r, K.dim, K.r**q)
    if not np.all(K.offsets >= -GEOM_TOL * K._scale):
        raise GeometryError("origin must belong to the body")
    weights = []
    for i, ids in enumerate(K.facets):
        d = K.offsets[i]
        if abs(d) <= GEOM_TOL * K._scale:
            if q < 1:
                raise SingularityError("non-integrable singularity at the origin")
            weights.append(0.0)
            continue
        _, w = facet_rule(K.vertices[ids], K.normals[i], d, q)
        weights.append(d * float(w.sum()))
    return SphericalMeasure(K.normals.copy(), np.array(weights))


def pq_dual_curvature(K: ConvexBody, p: float, q: float) -> SphericalMeasure:
    """``C_{p,q}(K, .) = h_K**(-p) dC_q(K, .)``."""
    base = dual_curvature_measure(K, q)
    if p == 0:
        return base
    _require_interior(K)
    if isinstance(K, Ball):
        return base.scaled(K.r ** (-p))
    return SphericalMeasure(base.directions, base.weights * K.offsets ** (-p))


def dual_mixed(K: ConvexBody, L: ConvexBody, q: float) -> float:
    """``V_{1,q}(K, L) = int h_L dC_{1,q}(K, .)``."""
    return pq_dual_curvature(K, 1.0, q).integrate(lambda u: support(L, u))


def facet_weight_integrals(K: Polytope, q: float, g: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Per-facet integrals ``int_F g(x) |x|**(q-n) dH^{n-1}`` (g = 1 if omitted)."""
    out = []
    for i, ids in enumerate(K.facets):
        x, w = facet_rule(K.vertices[ids], K.normals[i], K.offsets[i], q)
        out.append(float(np.dot(w, g(x))) if g is not None else float(w.sum()))
    return np.array(out)


def min_norm_point(points: np.ndarray) -> np.ndarray:
    """Minimal-norm point of the convex hull of a few points."""
    if len(points) == 1:
        return points[0].copy()
    big = 1e3 * (1.0 + np.abs(points).max())
    A = np.vstack([points.T, big * np.ones(len(points))])
    b = np.concatenate([np.zeros(points.shape[1]), [big]])
    lam, _ = nnls(A, b)
    lam = lam / lam.sum()
    return lam @ points


def vertex_normal_cone_argmax(K: Polytope, y: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Minimal-norm element of the face of ``K`` maximizing ``<., y>``."""
    vals = K.vertices @ y
    top = vals.max()
    tied = K.vertices[vals >= top - tol * (1.0 + abs(top))]
    return min_norm_point(tied)
