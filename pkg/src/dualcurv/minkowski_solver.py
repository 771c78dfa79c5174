"""Even functional dual Minkowski problem by projected descent.

Given an even measure ``mu`` on R^n, look for a convex even ``chi >= 0`` on a
grid minimizing

    J(chi) = int chi dmu - |mu| log V_q(exp(-chi*)),

subject to ``V_q(exp(-chi*)) = A``. A stationary point gives
``mu = (|mu| / A) C^e_q(exp(-chi*); .)``, so ``f0 = (|mu| / A) exp(-chi*)``
solves the problem.

The discrete conjugate ``chi*`` on the dual grid carries, for every dual
node, the primal node where the supremum is attained. This node is the
gradient of ``chi*`` there, so the pushforward measure aggregates onto the
primal nodes by a single ``bincount`` and the nodal gradient of ``J`` is exact
for the discrete functional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from ._kernels import discrete_conjugate
from ._quadrature import sphere_area
from .core_convex import (
    ConvexFunctionRep,
    GridSampled,
    GridSpec,
    LogConcaveFunction,
    _flip,
    _symmetrize,
    is_discretely_convex,
    sample,
)
from .dual_curvature import EuclideanMeasure, TestFunctionDictionary, discrepancy, integrate
from .weighted_variation import Weight, cell_weights


class DegenerateIterateError(ArithmeticError):
    """The moment of ``exp(-chi*)`` vanished or overflowed."""


class InadmissibleMeasureError(ValueError):
    """The prescribed measure fails the existence hypotheses."""


@dataclass(frozen=True, eq=False)
class PrescribedMeasure:
    """Finite atomic measure with positive masses to be matched."""

    measure: EuclideanMeasure

    def __post_init__(self):
        m = self.measure
        keep = m.weights > 0
        if not keep.all():
            object.__setattr__(self, "measure", EuclideanMeasure(m.points[keep], m.weights[keep], m.provenance))

    @classmethod
    def from_atoms(cls, points, weights) -> "PrescribedMeasure":
        return cls(EuclideanMeasure(points, weights, "prescribed"))

    @property
    def points(self) -> np.ndarray:
        return self.measure.points

    @property
    def weights(self) -> np.ndarray:
        return self.measure.weights

    @property
    def dim(self) -> int:
        return self.measure.dim

    @cached_property
    def total(self) -> float:
        return self.measure.total

    @cached_property
    def first_moment(self) -> float:
        return float(np.dot(self.weights, np.linalg.norm(self.points, axis=1)))

    @cached_property
    def reach(self) -> float:
        """Largest atom norm."""
        return float(np.linalg.norm(self.points, axis=1).max()) if self.weights.size else 0.0

    def scaled(self, factor: float) -> "PrescribedMeasure":
        return PrescribedMeasure(self.measure.scaled(factor))


def discretized_density(grid: GridSpec, w: Weight, density) -> PrescribedMeasure:
    """Atoms ``(y_j, int_{cell_j} w * density(y_j))`` on the nodes of ``grid``."""
    pts = grid.points()
    mass = cell_weights(grid, w) * density(pts)
    return PrescribedMeasure.from_atoms(pts.reshape(-1, grid.dim), mass.ravel())


# admissibility -------------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    reasons: tuple
    total: float
    first_moment: float
    min_eigenvalue: float
    even_defect: float

    def as_dict(self) -> dict:
        return {
            "admissible": self.admissible,
            "reasons": list(self.reasons),
            "total": self.total,
            "first_moment": self.first_moment,
            "min_eigenvalue": self.min_eigenvalue,
            "even_defect": self.even_defect,
        }


def _even_defect(mu: PrescribedMeasure) -> float:
    """Largest relative mass mismatch between each atom and its mirror (inf if unmatched)."""
    scale = 1.0 + mu.reach
    pts, wts = mu.points, mu.weights
    # merge coincident atoms so the pairing is one-to-one
    key = np.round(pts / (scale * 1e-12)).astype(np.int64)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    P = np.zeros((len(uniq), mu.dim))
    np.add.at(P, inv, pts)
    counts = np.bincount(inv)
    P /= counts[:, None]
    W = np.bincount(inv, weights=wts)
    dist, j = cKDTree(P).query(-P)
    # locations match to the 12 significant digits that survive a JSON round trip
    if np.any(dist > 2e-11 * scale):
        return math.inf
    return float(np.max(np.abs(W - W[j])) / W.max())


def check_admissible(mu: PrescribedMeasure) -> AdmissibilityReport:
    """Evenness, non-concentration on subspaces and finiteness of the first moment."""
    reasons = []
    if mu.weights.size == 0 or mu.total <= 0:
        raise InadmissibleMeasureError("measure is zero")
    defect = _even_defect(mu)
    if not defect <= 1e-12:
        reasons.append("not even")
    M = (mu.points * mu.weights[:, None]).T @ mu.points
    lam = float(np.linalg.eigvalsh(M)[0])
    diam = 2.0 * mu.reach
    if not lam > 1e-10 * mu.total * diam**2:
        reasons.append("concentrated on a proper subspace")
    if not math.isfinite(mu.first_moment):
        reasons.append("infinite first moment")
    return AdmissibilityReport(not reasons, tuple(reasons), mu.total, mu.first_moment, lam, defect)


# configuration and problem data --------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Numerics of the projected descent.

    ``grid`` carries ``chi`` and ``dual_grid`` carries ``chi*``; both default
    to the smallest odd grid with ``nodes`` points per axis covering the
    atoms. ``tol`` is relative to ``|mu|``.
    """

    grid: Optional[GridSpec] = None
    dual_grid: Optional[GridSpec] = None
    nodes: int = 65
    A: Union[float, str] = "auto"
    max_iter: int = 500
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 40
    memory: int = 10
    tol: float = 0.01
    seed: int = 0
    n_bumps: int = 16
    trial_iter: int = 20
    margin: float = 0.1

    def __post_init__(self):
        if isinstance(self.A, str):
            if self.A != "auto":
                raise ValueError("A must be positive or 'auto'")
        elif not (self.A > 0 and math.isfinite(self.A)):
            raise ValueError("A must be positive or 'auto'")
        if not (self.max_iter >= 0 and self.step0 > 0 and 0 < self.backtrack < 1 and 0 < self.armijo < 1):
            raise ValueError("invalid step rule")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.nodes < 3 or self.nodes % 2 == 0:
            raise ValueError("nodes must be odd and at least 3")

    def resolve(self, mu: PrescribedMeasure) -> tuple[GridSpec, GridSpec]:
        grid = self.grid
        if grid is None:
            radius = float(np.abs(mu.points).max()) if mu.weights.size else 1.0
            lattice = _lattice_nodes(mu.points, radius)
            # atoms on a coarser lattice are matched by that lattice; tiny lattices are too crude
            nodes = lattice if lattice is not None and 17 <= lattice <= self.nodes else self.nodes
            grid = GridSpec(mu.dim, max(radius, 1e-6), nodes)
        dual = self.dual_grid or grid
        if grid.dim != mu.dim or dual.dim != mu.dim:
            raise ValueError("grid dimension does not match the measure")
        if np.abs(mu.points).max() > grid.radius * (1 + 1e-12):
            raise ValueError("grid does not cover the atoms of mu")
        return grid, dual


def _lattice_nodes(points: np.ndarray, radius: float, tol: float = 1e-9) -> Optional[int]:
    """Nodes per axis of the centered lattice on ``[-radius, radius]`` holding ``points``, if any."""
    if points.size == 0 or radius <= 0:
        return None
    coords = np.unique(np.round(points.ravel() / radius, 12))
    gaps = np.diff(coords)
    if gaps.size == 0:
        return None
    h = gaps.min()
    steps = (coords + 1.0) / h
    m = round(2.0 / h)
    if m < 2 or abs(2.0 / h - m) > 1e-6 * m or np.abs(steps - np.round(steps)).max() > tol * m + 1e-9:
        return None
    return m + 1 if m % 2 == 0 else None


def _hat_matrix(grid: GridSpec, points: np.ndarray) -> sparse.csr_matrix:
    """Rows: multilinear nodal basis functions evaluated at ``points``."""
    n, N, h = grid.dim, grid.nodes, grid.h
    u = np.clip((points + grid.radius) / h, 0.0, N - 1.0)
    i0 = np.minimum(np.floor(u).astype(np.int64), N - 2)
    frac = u - i0
    rows, cols, vals = [], [], []
    for corner in np.ndindex(*([2] * n)):
        c = np.array(corner)
        idx = i0 + c
        wt = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
        rows.append(np.arange(len(points)))
        cols.append(np.ravel_multi_index(tuple(idx.T), grid.shape))
        vals.append(wt)
    H = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(len(points), N**n))
    return H


@dataclass
class _Evaluation:
    J: float
    grad: np.ndarray
    log_V: float
    nu: np.ndarray  # (|mu| / V) * C on the primal nodes
    conj: np.ndarray
    argmax: np.ndarray


class _Problem:
    def __init__(self, mu: PrescribedMeasure, w: Weight, grid: GridSpec, dual: GridSpec):
        self.mu, self.w, self.grid, self.dual = mu, w, grid, dual
        H = _hat_matrix(grid, mu.points)
        self.m = np.asarray(H.T @ mu.weights).reshape(grid.shape)
        self.WX = cell_weights(dual, w)
        self.total = mu.total

    def evaluate(self, chi: np.ndarray, even: bool = False) -> _Evaluation:
        n = self.grid.dim
        conj, idx = discrete_conjugate(chi, [self.grid.axis] * n, [self.dual.axis] * n)
        flat = np.ravel_multi_index(idx, self.grid.shape)
        c0 = float(conj.min())
        e = self.WX * np.exp(-(conj - c0))
        s = float(e.sum())
        if not (s > 0 and math.isfinite(s)):
            raise DegenerateIterateError("degenerate iterate")
        log_V = math.log(s) - c0
        C = np.bincount(flat.ravel(), weights=e.ravel(), minlength=chi.size).reshape(chi.shape)
        if even:
            # ties are broken by index order; for even chi the mirrored choice is equally valid
            C = 0.5 * (C + _flip(C))
        nu = self.total * C / s
        J = float(np.sum(self.m * chi)) - self.total * log_V
        return _Evaluation(J, self.m - nu, log_V, nu, conj, flat)

    def project(self, chi: np.ndarray, A: float) -> tuple[np.ndarray, _Evaluation]:
        """Convexify, symmetrize, clip at 0, then shift so the moment equals ``A``."""
        n = self.grid.dim
        conj, _ = discrete_conjugate(chi, [self.grid.axis] * n, [self.dual.axis] * n)
        cvx, _ = discrete_conjugate(conj, [self.dual.axis] * n, [self.grid.axis] * n)
        cvx = np.minimum(cvx, chi)
        sym = 0.5 * (cvx + _flip(cvx))
        clipped = np.maximum(sym, 0.0)
        ev = self.evaluate(clipped, even=True)
        shift = math.log(A) - ev.log_V
        out = clipped + shift
        ev.J += float(np.sum(self.m)) * shift - self.total * shift
        ev.conj = ev.conj - shift
        ev.log_V = math.log(A)
        return out, ev


# reports -------------------------------------------------------------------------------------


@dataclass
class SolverReport:
    """Outcome of ``solve``.

    ``trace`` rows are ``(J, V_q(exp(-chi*)), residual)`` per iterate; the
    residual is the dictionary discrepancy between ``mu`` and the measure
    generated by ``f0``, in units of ``|mu|``.
    """

    chi: GridSampled
    phi_star: GridSampled
    A: float
    scale: float
    trace: list
    converged: bool
    iterations: int
    admissibility: AdmissibilityReport
    flags: dict = field(default_factory=dict)
    generated: Optional[EuclideanMeasure] = None

    @property
    def residual(self) -> float:
        return self.trace[-1][2] if self.trace else math.inf

    @property
    def f0(self) -> LogConcaveFunction:
        """``(|mu| / A) exp(-chi*)``."""
        vals = self.phi_star.values - math.log(self.scale)
        rep = GridSampled(self.phi_star.grid, vals, even=True, subgradients=self.phi_star.subgradients)
        return LogConcaveFunction(rep)

    def as_dict(self) -> dict:
        return {
            "A": self.A,
            "scale": self.scale,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "trace": [list(r) for r in self.trace],
            "admissibility": self.admissibility.as_dict(),
            "flags": dict(self.flags),
        }


# core operations ----------------------------------------------------------------------------


def _dictionary(mu: PrescribedMeasure, grid: GridSpec, cfg: SolverConfig) -> TestFunctionDictionary:
    return TestFunctionDictionary(mu.dim, grid.radius * math.sqrt(mu.dim), cfg.n_bumps, cfg.seed)


def _generated(problem: _Problem, ev: _Evaluation) -> EuclideanMeasure:
    pts = problem.grid.points().reshape(-1, problem.grid.dim)
    nu = ev.nu.ravel()
    keep = nu > 0
    return EuclideanMeasure(pts[keep], nu[keep], "solver")


def objective(chi: ConvexFunctionRep, mu: PrescribedMeasure, w: Weight,
              config: SolverConfig = SolverConfig()) -> tuple[float, np.ndarray]:
    """``J(chi)`` and its nodal gradient on the primal grid.

    The gradient is ``sum_i mu_i hat_j(y_i) - (|mu| / V) int hat_j dC^e_q``
    with ``hat_j`` the multilinear nodal basis.
    """
    grid, dual = config.resolve(mu)
    vals = chi.values if isinstance(chi, GridSampled) and chi.grid == grid else sample(chi, grid).values
    ev = _Problem(mu, w, grid, dual).evaluate(np.asarray(vals, dtype=float))
    return ev.J, ev.grad


def gradient_norm(grad: np.ndarray, grid: GridSpec, dictionary: TestFunctionDictionary) -> float:
    """Dictionary norm ``max |sum_j g_j zeta(y_j)| / (1 + Lip diam)`` of a nodal gradient."""
    pts = grid.points().reshape(-1, grid.dim)
    g = grad.ravel()
    return max(abs(float(np.dot(g, z(pts)))) / (1.0 + z.lip * dictionary.diameter) for z in dictionary.members)


def gamma_witness(grid: GridSpec, q: float, A: float) -> np.ndarray:
    """``ln A + c_n |y|`` with ``V_q(exp(-Gamma*)) = A`` in the continuum."""
    c = (q / sphere_area(grid.dim)) ** (1.0 / q)
    return math.log(A) + c * np.linalg.norm(grid.points(), axis=-1)


def _run(problem: _Problem, A: float, cfg: SolverConfig, max_iter: int, dictionary, check_every: bool = True,
         adaptive: bool = False):
    chi, ev = problem.project(gamma_witness(problem.grid, problem.w.q, A), A)
    mu_meas = problem.mu.measure
    total = problem.total
    trace = []

    def residual(e):
        return discrepancy(mu_meas, _generated(problem, e), dictionary) / total

    res = residual(ev)
    trace.append((ev.J, math.exp(ev.log_V), res))
    step = cfg.step0
    converged = res <= cfg.tol
    stalled = False
    it = 0
    precond = np.maximum(problem.m, 1e-3 * problem.m.max())
    memory: list = []
    centre = tuple(c // 2 for c in problem.grid.shape)
    raised = 0
    while not converged and it < max_iter:
        d = _lbfgs_direction(ev.grad, memory, precond)
        slope = float(np.sum(ev.grad * d))
        if slope >= 0:
            memory.clear()
            d = -ev.grad / precond
            slope = float(np.sum(ev.grad * d))
        accepted = False
        s = step
        for _ in range(cfg.max_backtracks):
            cand, cev = problem.project(chi + s * d, A)
            if cev.J <= ev.J + cfg.armijo * s * slope:
                accepted = True
                break
            s *= cfg.backtrack
        if not accepted:
            stalled = True
            break
        sk = (cand - chi).ravel()
        yk = (cev.grad - ev.grad).ravel()
        if float(sk @ yk) > 1e-12 * float(np.linalg.norm(sk) * np.linalg.norm(yk)):
            memory.append((sk, yk))
            if len(memory) > cfg.memory:
                memory.pop(0)
        chi, ev = cand, cev
        if adaptive and chi[centre] < cfg.margin:
            # the interiority margin is lost: move to the next A = 2^k (a pure shift, J unchanged)
            k = max(1, math.ceil((cfg.margin - chi[centre]) / math.log(2.0)))
            A *= 2.0**k
            chi, ev = problem.project(chi + k * math.log(2.0), A)
            raised += k
            memory.clear()
        step = min(cfg.step0, 2.0 * s) if memory else cfg.step0
        it += 1
        res = residual(ev) if check_every or it == max_iter else math.inf
        trace.append((ev.J, math.exp(ev.log_V), res))
        converged = res <= cfg.tol
    return chi, ev, trace, converged, it, stalled, A, raised


def _lbfgs_direction(grad: np.ndarray, memory: list, precond: np.ndarray) -> np.ndarray:
    """Two-loop recursion with the diagonal ``1 / precond`` as initial inverse metric."""
    q = grad.ravel().copy()
    inv = 1.0 / precond.ravel()
    alphas = []
    for sk, yk in reversed(memory):
        rho = 1.0 / float(yk @ sk)
        a = rho * float(sk @ q)
        alphas.append((a, rho, sk, yk))
        q -= a * yk
    if memory:
        sk, yk = memory[-1]
        gamma = float(sk @ yk) / float(yk @ (inv * yk))
    else:
        gamma = 1.0
    r = gamma * inv * q
    for a, rho, sk, yk in reversed(alphas):
        b = rho * float(yk @ r)
        r += (a - b) * sk
    return -r.reshape(grad.shape)


def choose_A(mu: PrescribedMeasure, w: Weight, config: SolverConfig = SolverConfig()) -> float:
    """Smallest ``A = 2^k`` (k >= 0) whose short trial run keeps ``chi(o) >= margin``.

    A numeric ``config.A`` is returned unchanged.
    """
    if not isinstance(config.A, str):
        return float(config.A)
    return _choose_A(mu, w, config)[0]


def _choose_A(mu, w, config) -> tuple[float, bool]:
    grid, dual = config.resolve(mu)
    problem = _Problem(mu, w, grid, dual)
    dictionary = _dictionary(mu, grid, config)
    centre = tuple(s // 2 for s in grid.shape)
    A = 1.0
    for _ in range(60):
        chi, *_ = _run(problem, A, config, config.trial_iter, dictionary, check_every=False)
        if chi[centre] >= config.margin:
            return A, False
        A *= 2.0
    return A, True


def solve(mu: PrescribedMeasure, w: Weight, config: SolverConfig = SolverConfig()) -> SolverReport:
    """Projected descent on ``J`` with the moment pinned at ``A``."""
    adm = check_admissible(mu)
    if not adm.admissible:
        raise InadmissibleMeasureError("; ".join(adm.reasons))
    if w.dim != mu.dim:
        raise ValueError("dimension mismatch between weight and measure")
    grid, dual = config.resolve(mu)
    flags: dict = {"A_source": "user"}
    if isinstance(config.A, str):
        A, fallback = _choose_A(mu, w, config)
        flags["A_source"] = "fallback" if fallback else "search"
    else:
        A = float(config.A)
    problem = _Problem(mu, w, grid, dual)
    dictionary = _dictionary(mu, grid, config)
    chi, ev, trace, converged, it, stalled, A, raised = _run(problem, A, config, config.max_iter, dictionary,
                                                             adaptive=isinstance(config.A, str))
    flags["A_raised"] = raised
    centre = tuple(s // 2 for s in grid.shape)
    flags.update({
        "stalled": stalled,
        "chi_origin": float(chi[centre]),
        "interior": bool(chi[centre] > 0),
        "convex": is_discretely_convex(chi),
        "even": bool(np.array_equal(chi, _flip(chi))),
        "monotone": all(b[0] <= a[0] + 1e-12 * (1.0 + abs(a[0])) for a, b in zip(trace, trace[1:])),
    })
    generated = _generated(problem, ev)
    # |y|-weighted agreement; looser than the dictionary residual, which damps unbounded tests
    flags["first_moment_ratio"] = integrate(generated, lambda y: np.linalg.norm(y, axis=-1)) / mu.first_moment
    idx = np.unravel_index(ev.argmax, grid.shape)
    sub = np.stack([grid.axis[i] for i in idx], axis=-1)
    conj, sub = _symmetrize(ev.conj, sub)
    phi_star = GridSampled(dual, conj, even=True, subgradients=sub)
    return SolverReport(
        chi=GridSampled(grid, chi, even=True),
        phi_star=phi_star,
        A=A,
        scale=mu.total / A,
        trace=trace,
        converged=converged,
        iterations=it,
        admissibility=adm,
        flags=flags,
        generated=generated,
    )
