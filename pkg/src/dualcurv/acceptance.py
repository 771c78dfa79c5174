"""The acceptance suite, shared by ``dualcurv selftest`` and the test suite.

Each criterion returns a :class:`CriterionResult` whose ``details`` hold only
deterministic numbers (no timings), so serialized results are byte-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from . import bodies as bd
from ._kernels import get_threads, set_threads
from ._quadrature import sphere_area
from .bodies import Ball, Polytope
from .core_convex import (
    BodyIndicator,
    GridSpec,
    LogConcaveFunction,
    MaxAffine,
    Quadratic,
    ScaledNorm,
    SupportFn,
    conjugate,
    sample,
)
from .dual_curvature import first_moment_identity, layer_cake_delta, variational_lhs, variational_rhs
from .io import dumps
from .minkowski_solver import (
    PrescribedMeasure,
    SolverConfig,
    check_admissible,
    discretized_density,
    solve,
)
from .weighted_variation import (
    Weight,
    coarea_tv,
    derivative_control_check,
    moment,
    prekopa_leindler_check,
    weighted_tv,
)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "summary": self.summary, "details": self.details}

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title}: {self.summary}"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# test objects --------------------------------------------------------------------------------


def square() -> Polytope:
    return Polytope.box([1.0, 1.0])


def random_symmetric_hexagon(seed: int = 0) -> Polytope:
    """Symmetric hexagon with seeded vertex angles and radii."""
    rng = np.random.default_rng(seed)
    ang = np.arange(3) * np.pi / 3 + rng.uniform(-0.25, 0.25, 3)
    rad = rng.uniform(0.7, 1.5, 3)
    half = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    return Polytope.from_vertices(np.vstack([half, -half]))


def random_max_affine(rng: np.random.Generator, dim: int, k: int) -> MaxAffine:
    """Coercive max-affine function: the slopes surround the origin."""
    if dim == 1:
        neg = -rng.uniform(0.3, 3.0, max(1, k // 2))
        pos = rng.uniform(0.3, 3.0, max(1, k - k // 2))
        S = np.concatenate([neg, pos])[:, None]
    else:
        ang = (np.arange(k) + rng.uniform(-0.2, 0.2, k)) * 2 * np.pi / k + rng.uniform(0, 2 * np.pi)
        S = rng.uniform(0.5, 2.5, k)[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return MaxAffine(S, rng.uniform(-1.0, 1.0, len(S)))


GAUSS = LogConcaveFunction(Quadratic(1.0))
EXPNORM = LogConcaveFunction(ScaledNorm(1.0))
BALL2 = LogConcaveFunction(BodyIndicator(Ball(2.0)))


def gaussian_moment(n: int, q: float) -> float:
    """``int |x|^(q-n) exp(-|x|^2/2) dx``."""
    return sphere_area(n) * 2.0 ** (q / 2 - 1) * gamma_fn(q / 2)


# criteria ------------------------------------------------------------------------------------


def criterion_1(seed: int = 0) -> CriterionResult:
    """Grid conjugates against closed forms on N=257, R=4."""
    G = GridSpec(2, 4.0, 257)
    h = G.h
    y = G.points()
    r = np.linalg.norm(y, axis=-1)
    rows = {}
    # quadratic: Lip of |x|^2/2 on the box is R sqrt(2)
    star = conjugate(sample(Quadratic(1.0), G), G)
    err = float(np.abs(star.values - 0.5 * r**2).max())
    rows["quadratic"] = (err, 2 * h * 4.0 * math.sqrt(2))
    # Gamma = ln A + c|x| against the shifted ball indicator
    A, c = 3.0, 1.5
    star = conjugate(sample(ScaledNorm(c, math.log(A)), G), G)
    inside = r <= c
    err_in = float(np.abs(star.values[inside] + math.log(A)).max())
    # off the ball the box-restricted conjugate grows at least like R (|y| - c) / sqrt(2)
    far = r >= c + 2 * h
    growth = bool(np.all(star.values[far] >= -math.log(A) + G.radius * (r[far] - c) / math.sqrt(2) - 2 * h * c))
    closed = conjugate(ScaledNorm(c, math.log(A)))
    closed_ok = isinstance(closed, BodyIndicator) and isinstance(closed.body, Ball) \
        and closed.body.r == c and abs(closed.offset + math.log(A)) < 1e-15
    rows["gamma_inside"] = (err_in, 2 * h * c)
    # indicators against support functions
    for name, K in (("square", square()), ("ball", Ball(1.0))):
        star = conjugate(sample(BodyIndicator(K), G), G)
        exact = bd.support(K, y.reshape(-1, 2)).reshape(G.shape)
        lip = bd.inradius_circumradius(K)[1]
        rows[f"indicator_{name}"] = (float(np.abs(star.values - exact).max()), 2 * h * lip)
    G1 = GridSpec(1, 4.0, 257)
    star = conjugate(sample(BodyIndicator(Ball(1.0, 1)), G1), G1)
    rows["indicator_interval"] = (float(np.abs(star.values - np.abs(G1.axis)).max()), 2 * G1.h)
    closed_sf = isinstance(conjugate(BodyIndicator(Ball(1.0, 1))), SupportFn)
    passed = all(e <= tol for e, tol in rows.values()) and growth and closed_ok and closed_sf
    worst = max(e / tol for e, tol in rows.values())
    return CriterionResult(1, "conjugate oracle", passed, f"max error / (2 h Lip) = {worst:.3g}", {
        "errors": {k: {"error": e, "tolerance": t} for k, (e, t) in rows.items()},
        "gamma_outside_growth": growth, "gamma_closed_form": closed_ok, "indicator_closed_form": closed_sf})


def criterion_2(seed: int = 0) -> CriterionResult:
    """Gaussian moments against the radial closed form."""
    rows = []
    for n in (1, 2):
        f = LogConcaveFunction(Quadratic(1.0, n))
        for q in (0.5, 1.0, 2.0, 3.0):
            v = moment(f, Weight(q, n))
            ref = gaussian_moment(n, q)
            rows.append({"n": n, "q": q, "value": v, "reference": ref, "rel_error": _rel(v, ref)})
    worst = max(r["rel_error"] for r in rows)
    return CriterionResult(2, "moment oracle", worst <= 1e-2, f"max rel error {worst:.3g} (tol 1e-2)", {"rows": rows})


def criterion_3(seed: int = 0) -> CriterionResult:
    """Total mass of the dual curvature measure equals q times the dual quermassintegral."""
    rows = []
    for name, K in (("square", square()), ("hexagon", random_symmetric_hexagon(seed)), ("ball2", Ball(2.0))):
        for q in (0.5, 1.0, 2.0, 3.0):
            mass = bd.dual_curvature_measure(K, q).total
            ref = q * bd.dual_quermass(K, q)
            rows.append({"body": name, "q": q, "mass": mass, "q_times_quermass": ref, "rel_error": _rel(mass, ref)})
    worst = max(r["rel_error"] for r in rows)
    return CriterionResult(3, "body mass identity", worst <= 1e-6, f"max rel error {worst:.3g} (tol 1e-6)",
                           {"rows": rows})


def criterion_4(seed: int = 0) -> CriterionResult:
    """Finite differences, two-term formula and layer cake agree."""
    g = LogConcaveFunction(BodyIndicator(Ball(1.0)))
    cases = (
        ("ball2", BALL2, lambda q: 2 * math.pi * 2 ** (q - 1)),
        ("gaussian", GAUSS, lambda q: gaussian_moment(2, q + 1)),
        ("exp_norm", EXPNORM, lambda q: 2 * math.pi * gamma_fn(q)),
    )
    rows = []
    for name, f, exact in cases:
        for q in (1.0, 2.0, 3.0):
            w = Weight(q)
            lhs = variational_lhs(f, g, w)
            rhs = variational_rhs(f, g, w).total
            lc = layer_cake_delta(f, Ball(1.0), w)
            vals = (lhs.value, rhs, lc)
            pair = max(_rel(a, b) for a in vals for b in vals)
            rows.append({"f": name, "q": q, "lhs": lhs.value, "rhs": rhs, "layer_cake": lc, "exact": exact(q),
                         "max_pairwise_rel": pair, "max_rel_to_exact": max(_rel(v, exact(q)) for v in vals),
                         "hypotheses_met": lhs.flags["hypotheses_met"]})
    worst = max(r["max_pairwise_rel"] for r in rows)
    return CriterionResult(4, "variational three-route agreement", worst <= 0.02,
                           f"max pairwise rel diff {worst:.3g} (tol 2e-2)", {"rows": rows})


def criterion_5(seed: int = 0) -> CriterionResult:
    """For indicators the two-term formula reduces to the dual mixed quantity."""
    tri = Polytope.from_vertices(np.array([[1.0, 0.0], [-0.5, 0.8], [-0.4, -0.9]]))
    bodies_K = (("square", square()), ("hexagon", random_symmetric_hexagon(seed)), ("ball2", Ball(2.0)))
    bodies_L = (("ball1", Ball(1.0)), ("square", square()), ("triangle", tri))
    rows = []
    for kn, K in bodies_K:
        for ln, L in bodies_L:
            for q in (0.5, 1.0, 2.0, 3.0):
                rhs = variational_rhs(LogConcaveFunction(BodyIndicator(K)), LogConcaveFunction(BodyIndicator(L)),
                                      Weight(q)).total
                ref = bd.dual_mixed(K, L, q)
                rows.append({"K": kn, "L": ln, "q": q, "rhs": rhs, "dual_mixed": ref, "rel_error": _rel(rhs, ref)})
    worst = max(r["rel_error"] for r in rows)
    return CriterionResult(5, "indicator reduction", worst <= 1e-2, f"max rel error {worst:.3g} (tol 1e-2)",
                           {"rows": rows})


def criterion_6(seed: int = 0) -> CriterionResult:
    """Weighted total variation by decomposition and by the coarea formula."""
    rows = []
    for fname, f in (("ball2", BALL2), ("gaussian", GAUSS), ("exp_norm", EXPNORM)):
        for lname, L in (("ball1", Ball(1.0)), ("square", square())):
            for q in (0.5, 1.0, 2.0, 3.0):
                w = Weight(q)
                tv = weighted_tv(f, L, w).total
                co = coarea_tv(f, L, w)
                rows.append({"f": fname, "L": lname, "q": q, "tv": tv, "coarea": co, "rel_error": _rel(tv, co)})
    worst = max(r["rel_error"] for r in rows)
    return CriterionResult(6, "coarea equivalence", worst <= 0.02, f"max rel diff {worst:.3g} (tol 2e-2)",
                           {"rows": rows})


def criterion_7(seed: int = 0) -> CriterionResult:
    """First moment of the Euclidean measure equals the weighted gradient integral."""
    rows = []
    ok = True
    for fname, f in (("gaussian", GAUSS), ("exp_norm", EXPNORM), ("ball2", BALL2)):
        for q in (0.5, 1.0, 2.0, 3.0):
            lhs, rhs = first_moment_identity(f, Weight(q))
            if fname == "ball2":
                good = lhs == 0.0 and rhs == 0.0
                err = 0.0 if good else math.inf
            else:
                err = _rel(lhs, rhs)
                good = err <= 1e-2
            ok &= good
            rows.append({"f": fname, "q": q, "lhs": lhs, "rhs": rhs, "rel_error": err})
    worst = max(r["rel_error"] for r in rows)
    return CriterionResult(7, "first-moment identity", ok, f"max rel diff {worst:.3g} (tol 1e-2; 0 = 0 for ball)",
                           {"rows": rows})


def criterion_8(seed: int = 0) -> CriterionResult:
    """Tail variation of 1-D log-concave functions is controlled by four times the tail sup."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(20):
        f = LogConcaveFunction(random_max_affine(rng, 1, int(rng.integers(2, 7))))
        for t0 in (0.0, 0.5, 2.0):
            lhs, rhs = derivative_control_check(f, t0)
            rows.append({"sample": i, "t0": t0, "lhs": lhs, "rhs": rhs, "margin": rhs + 1e-6 - lhs})
    worst = min(r["margin"] for r in rows)
    return CriterionResult(8, "derivative control", worst >= 0, f"min margin {worst:.3g} (must be >= 0)",
                           {"rows": rows})


def criterion_9(seed: int = 0) -> CriterionResult:
    """Scale invariance of the polar product and the slab sweep."""
    rows = []
    p = q = 0.5
    for name, K in (("square", square()), ("hexagon", random_symmetric_hexagon(seed))):
        prods = [bd.normalized_dual_quermass(bd.polar(bd.scale(K, lam)), q)
                 * bd.normalized_dual_quermass(bd.scale(K, lam), p) for lam in (0.5, 1.0, 2.0)]
        spread = (max(prods) - min(prods)) / prods[1]
        rows.append({"body": name, "products": prods, "rel_spread": spread})
    santalo_ok = all(r["rel_spread"] <= 1e-9 for r in rows)
    Ls = (1.0, 10.0, 100.0, 1000.0)
    slab = [bd.dual_quermass(Polytope.box([1.0, L]), 0.5) for L in Ls]
    increasing = all(b > a for a, b in zip(slab, slab[1:]))
    tail = (slab[3] - slab[2]) / slab[2]
    slab_ok = increasing and tail < 0.01
    passed = santalo_ok and slab_ok
    summary = (f"scale spread {max(r['rel_spread'] for r in rows):.3g} (tol 1e-9); "
               f"slab increasing={increasing}, increase 100->1000 = {tail:.4g} (bound 1e-2)")
    return CriterionResult(9, "Santalo scale invariance and slab sweep", passed, summary, {
        "santalo": rows, "santalo_ok": santalo_ok, "slab_lengths": list(Ls), "slab_values": slab,
        "slab_increasing": increasing, "slab_relative_increase_100_1000": tail, "slab_ok": slab_ok})


def criterion_10(seed: int = 0) -> CriterionResult:
    """Prekopa-Leindler on seeded max-affine pairs and two closed-form cases."""
    rng = np.random.default_rng(seed + 1)
    rows = []
    for i in range(20):
        f = LogConcaveFunction(random_max_affine(rng, 2, int(rng.integers(4, 8))))
        g = LogConcaveFunction(random_max_affine(rng, 2, int(rng.integers(4, 8))))
        lam = float(rng.uniform(0.2, 0.8))
        lhs, rhs = prekopa_leindler_check(f, g, lam)
        rows.append({"pair": i, "lam": lam, "lhs": lhs, "rhs": rhs, "ok": lhs >= rhs - 1e-3 * rhs})
    gl, gr = prekopa_leindler_check(GAUSS, GAUSS, 0.5)
    bl, br = prekopa_leindler_check(LogConcaveFunction(BodyIndicator(Ball(1.0))),
                                    LogConcaveFunction(BodyIndicator(Ball(3.0))), 0.5)
    gauss_ok = _rel(gl, gr) <= 1e-3 and _rel(gl, 2 * math.pi) <= 1e-3
    balls_ok = _rel(bl, 4 * math.pi) <= 1e-3 and _rel(br, 3 * math.pi) <= 1e-3 and bl >= br
    passed = all(r["ok"] for r in rows) and gauss_ok and balls_ok
    worst = min((r["lhs"] - r["rhs"]) / r["rhs"] for r in rows)
    return CriterionResult(10, "Prekopa-Leindler", passed,
                           f"min (lhs-rhs)/rhs over pairs {worst:.3g}; gaussian equality {gauss_ok}; balls {balls_ok}",
                           {"pairs": rows, "gaussian": {"lhs": gl, "rhs": gr}, "balls": {"lhs": bl, "rhs": br}})


def criterion_11(seed: int = 0) -> CriterionResult:
    """Minkowski solver on discretized Gaussian measures, plus admissibility rejections."""
    grid = GridSpec(2, 4.0, 65)
    rows, reports = [], {}
    ok = True
    for q in (1.0, 2.0):
        w = Weight(q)
        mu = discretized_density(grid, w, lambda y: np.exp(-0.5 * np.sum(y**2, axis=-1)))
        rep = solve(mu, w, SolverConfig(max_iter=500, seed=seed))
        good = rep.converged and rep.residual <= 0.05 and rep.iterations <= 500 and rep.flags["monotone"]
        ok &= good
        rows.append({"q": q, "converged": rep.converged, "iterations": rep.iterations, "residual": rep.residual,
                     "A": rep.A, "monotone": rep.flags["monotone"], "total": mu.total,
                     "final_J": rep.trace[-1][0]})
        reports[f"q={q:g}"] = rep.as_dict()
    sub = check_admissible(PrescribedMeasure.from_atoms([[1.0, 0.0], [-1.0, 0.0]], [0.5, 0.5]))
    odd = check_admissible(PrescribedMeasure.from_atoms(
        [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.25 + 1e-6, 0.25, 0.25, 0.25]))
    good = check_admissible(PrescribedMeasure.from_atoms(
        [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.25] * 4))
    rejections = (not sub.admissible and "concentrated on a proper subspace" in sub.reasons
                  and not odd.admissible and "not even" in odd.reasons and good.admissible)
    passed = ok and rejections
    worst = max(r["residual"] for r in rows)
    return CriterionResult(11, "Minkowski solver", passed,
                           f"max residual {worst:.3g} |mu| (tol 5e-2), rejections {rejections}",
                           {"runs": rows, "reports": reports, "subspace": sub.as_dict(), "non_even": odd.as_dict(),
                            "accepted": good.as_dict()})


CRITERIA: dict[int, Callable[[int], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run(numbers: Optional[Sequence[int]] = None, seed: int = 0,
        report: Optional[Callable[[CriterionResult], None]] = None) -> list[CriterionResult]:
    """Run criteria 1-11 (or a subset) in order."""
    out = []
    for k in numbers or sorted(CRITERIA):
        res = CRITERIA[k](seed)
        if report:
            report(res)
        out.append(res)
    return out


def artifact_text(results: Sequence[CriterionResult]) -> str:
    return dumps({"criteria": [r.as_dict() for r in results]})


def determinism(results: Sequence[CriterionResult], seed: int = 0,
                numbers: Optional[Sequence[int]] = None, threads: Sequence[int] = (1, 8)) -> CriterionResult:
    """Recompute under other thread counts and compare serialized artifacts byte for byte."""
    reference = artifact_text(results)
    saved = get_threads()
    same = {}
    try:
        for t in threads:
            set_threads(t)
            same[str(t)] = artifact_text(run(numbers, seed)) == reference
    finally:
        set_threads(saved)
    passed = all(same.values())
    return CriterionResult(12, "determinism", passed,
                           "artifacts byte-identical for thread counts " + ", ".join(same), {"identical": same})
