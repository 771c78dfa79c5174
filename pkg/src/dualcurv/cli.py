"""The ``dualcurv`` command.

Every subcommand reads JSON descriptors (see :mod:`dualcurv.io`) and writes a
JSON report, or CSV with ``--format csv``, to ``--out`` or standard output.

Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure
(including a solver that did not converge and a failing selftest).
Option precedence is command-line flag, then ``--config`` file, then the
built-in default. The default thread count comes from ``DUALCURV_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import acceptance
from . import bodies as bd
from ._kernels import get_threads, set_threads
from .bodies import SingularityError
from .core_convex import (
    BodyIndicator,
    DomainError,
    EmptyDomainError,
    GridSpec,
    LogConcaveFunction,
    conjugate,
    sample,
    sup_convolve,
)
from .dual_curvature import (
    euclidean_dcm,
    layer_cake_delta,
    spherical_dcm,
    variational_lhs,
    variational_rhs,
)
from .io import (
    FormatError,
    body_from_dict,
    body_to_dict,
    csv_text,
    dumps,
    function_from_dict,
    function_to_dict,
    measure_csv_rows,
    measure_from_dict,
    measure_to_dict,
    read_json,
)
from .minkowski_solver import (
    DegenerateIterateError,
    InadmissibleMeasureError,
    PrescribedMeasure,
    SolverConfig,
    solve,
)
from .weighted_variation import MomentDivergenceError, Weight, coarea_tv, moment, weighted_tv

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

SUMMARY_HEADER = ["criterion", "title", "passed", "summary"]


class NumericalFailure(RuntimeError):
    """A computation finished but did not meet its own success criterion."""


# argument types ------------------------------------------------------------------------------


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _nonnegative(text: str) -> float:
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text!r}")
    return v


def _odd_nodes(text: str) -> int:
    v = int(text)
    if v < 3 or v % 2 == 0:
        raise argparse.ArgumentTypeError("grid resolution must be odd and at least 3")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _t_list(text) -> list[float]:
    vals = text if isinstance(text, list) else [s for s in str(text).split(",") if s.strip()]
    out = [_positive(str(v)) for v in vals]
    if not out:
        raise argparse.ArgumentTypeError("t-list is empty")
    return out


def _a_value(text: str):
    return "auto" if text == "auto" else _positive(text)


# parser --------------------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--threads", type=_count, help="worker threads (default: $DUALCURV_THREADS or 1)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--config", help="JSON file of option defaults")
    g.add_argument("--out", help="output file (selftest: directory); default standard output")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualcurv", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = [_common()]

    p = sub.add_parser("conjugate", parents=common, help="Legendre conjugate of a convex function")
    p.add_argument("--fn", required=True, help="convex function descriptor")
    p.add_argument("--grid-res", type=_odd_nodes, help="sample on this many nodes per axis first")
    p.add_argument("--radius", type=_positive, default=4.0, help="box half-width for --grid-res")

    p = sub.add_parser("supconv", parents=common, help="sup-convolution f (+) t.g")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--t", type=_nonnegative, default=1.0)

    p = sub.add_parser("moment", parents=common, help="weighted moment of exp(-phi)")
    p.add_argument("--fn", required=True)
    p.add_argument("--q", type=_positive, required=True)

    for name, hlp in (("tv", "weighted anisotropic total variation"), ("coarea", "total variation by coarea")):
        p = sub.add_parser(name, parents=common, help=hlp)
        p.add_argument("--fn", required=True)
        p.add_argument("--L", required=True, help="body descriptor of the gauge")
        p.add_argument("--q", type=_positive, required=True)
        if name == "coarea":
            p.add_argument("--levels", type=_count, default=200)

    p = sub.add_parser("body", parents=common, help="dual quermassintegral and dual curvature measure of a body")
    p.add_argument("--body", required=True)
    p.add_argument("--q", type=_positive, required=True)
    p.add_argument("--p", type=float, default=0.0, help="use the (p,q) measure h^-p dC_q")

    p = sub.add_parser("dualcurv", parents=common, help="Euclidean and spherical dual curvature measures")
    p.add_argument("--fn", required=True)
    p.add_argument("--q", type=_positive, required=True)

    p = sub.add_parser("varcheck", parents=common, help="first variation of the moment by three routes")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--q", type=_positive, required=True)
    p.add_argument("--t-list", type=_t_list, default=[0.1, 0.05, 0.025])

    p = sub.add_parser("minkowski", parents=common, help="solve the functional dual Minkowski problem")
    p.add_argument("--mu", required=True, help="measure descriptor")
    p.add_argument("--q", type=_positive, required=True)
    p.add_argument("--A", type=_a_value, default="auto")
    p.add_argument("--grid-res", type=_odd_nodes, default=65,
                   help="nodes per axis; atoms on a coarser centered lattice use that lattice")
    p.add_argument("--max-iter", type=_count, default=500)
    p.add_argument("--tol", type=_positive, default=0.01, help="residual tolerance relative to |mu|")

    p = sub.add_parser("selftest", parents=common, help="run the acceptance suite")
    p.add_argument("--no-repeat", action="store_true", help="skip the repeated runs of the determinism check")
    p.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")], help="comma-separated criteria")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    """Install the ``--config`` file as subcommand defaults, then parse."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((tok for tok in rest if tok in COMMANDS), None)
    if known.config and command:
        cfg = read_json(known.config)
        if not isinstance(cfg, dict):
            raise FormatError("config file must hold a JSON object")
        subparser = parser._subparsers._group_actions[0].choices[command]
        actions = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in actions or dest in ("help", "config"):
                raise FormatError(f"unknown config key {key!r} for {command}")
            action = actions[dest]
            if action.type is not None and not isinstance(value, bool):
                try:
                    value = action.type(value if isinstance(value, list) else str(value))
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise FormatError(f"config key {key!r}: {exc}") from exc
            if action.choices is not None and value not in action.choices:
                raise FormatError(f"config key {key!r}: invalid choice {value!r}")
            action.required = False
            defaults[dest] = value
        subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# helpers -------------------------------------------------------------------------------------


# keys under which subcommand outputs carry a reusable descriptor
FUNCTION_KEYS = ("conjugate", "result", "f0")
BODY_KEYS = ("body",)
MEASURE_KEYS = ("measure", "euclidean")


def _descriptor(path: str, keys: Sequence[str]):
    """Read a descriptor, unwrapping it from a subcommand report if needed."""
    d = read_json(path)
    if isinstance(d, dict) and "kind" not in d:
        for k in keys:
            if k in d:
                return d[k]
    return d


def _function_rep(path: str):
    return function_from_dict(_descriptor(path, FUNCTION_KEYS))


def _function(path: str) -> LogConcaveFunction:
    return LogConcaveFunction(_function_rep(path))


def _body(path: str):
    return body_from_dict(_descriptor(path, BODY_KEYS))


def _emit(args, payload: dict, csv: Optional[tuple] = None) -> None:
    if args.format == "csv":
        if csv is None:
            raise FormatError(f"{args.command} has no CSV output")
        text = csv_text(*csv)
    else:
        text = dumps(payload)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _grid_csv(rep) -> tuple:
    pts = rep.grid.points().reshape(-1, rep.grid.dim)
    rows = np.column_stack([pts, rep.values.reshape(-1)])
    return [f"x{i}" for i in range(rep.grid.dim)] + ["value"], rows


# subcommands ---------------------------------------------------------------------------------


def cmd_conjugate(args) -> int:
    rep = _function_rep(args.fn)
    if args.grid_res:
        grid = GridSpec(rep.dim, args.radius, args.grid_res)
        star = conjugate(sample(rep, grid), grid)
    else:
        star = conjugate(rep)
    desc = function_to_dict(star)
    _emit(args, {"conjugate": desc}, _grid_csv(star) if desc["kind"] == "grid" else None)
    return EXIT_OK


def cmd_supconv(args) -> int:
    h = sup_convolve(_function(args.f), _function(args.g), args.t)
    desc = function_to_dict(h)
    _emit(args, {"t": args.t, "result": desc}, _grid_csv(h.phi) if desc["kind"] == "grid" else None)
    return EXIT_OK


def cmd_moment(args) -> int:
    f = _function(args.fn)
    v = moment(f, Weight(args.q, f.dim))
    _emit(args, {"q": args.q, "dim": f.dim, "moment": v}, (["q", "moment"], [[args.q, v]]))
    return EXIT_OK


def cmd_tv(args) -> int:
    f = _function(args.fn)
    res = weighted_tv(f, _body(args.L), Weight(args.q, f.dim))
    row = [args.q, res.bulk, res.boundary, res.total]
    _emit(args, {"q": args.q, "bulk": res.bulk, "boundary": res.boundary, "total": res.total},
          (["q", "bulk", "boundary", "total"], [row]))
    return EXIT_OK


def cmd_coarea(args) -> int:
    f = _function(args.fn)
    v = coarea_tv(f, _body(args.L), Weight(args.q, f.dim), args.levels)
    _emit(args, {"q": args.q, "levels": args.levels, "total": v}, (["q", "total"], [[args.q, v]]))
    return EXIT_OK


def cmd_body(args) -> int:
    K = _body(args.body)
    m = bd.pq_dual_curvature(K, args.p, args.q) if args.p else bd.dual_curvature_measure(K, args.q)
    payload = {
        "body": body_to_dict(K),
        "q": args.q,
        "p": args.p,
        "dual_quermass": bd.dual_quermass(K, args.q),
        "normalized_dual_quermass": bd.normalized_dual_quermass(K, args.q),
        "polar": body_to_dict(bd.polar(K)),
        "measure": measure_to_dict(m),
        "measure_total": m.total,
    }
    _emit(args, payload, measure_csv_rows(m))
    return EXIT_OK


def cmd_dualcurv(args) -> int:
    f = _function(args.fn)
    w = Weight(args.q, f.dim)
    me, ms = euclidean_dcm(f, w), spherical_dcm(f, w)
    payload = {"q": args.q, "euclidean": measure_to_dict(me), "spherical": measure_to_dict(ms),
               "euclidean_total": me.total, "spherical_total": ms.total}
    _emit(args, payload, measure_csv_rows(me))
    return EXIT_OK


def cmd_varcheck(args) -> int:
    f, g = _function(args.f), _function(args.g)
    w = Weight(args.q, f.dim)
    lhs = variational_lhs(f, g, w, args.t_list)
    rhs = variational_rhs(f, g, w)
    lc = None
    if isinstance(g.phi, BodyIndicator) and g.phi.offset == 0.0:
        lc = layer_cake_delta(f, g.phi.body, w)
    values = {"lhs": lhs.value, "rhs": rhs.total}
    if lc is not None:
        values["layer_cake"] = lc
    rel = {}
    names = sorted(values)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            rel[f"{a}_vs_{b}"] = abs(values[a] - values[b]) / max(abs(values[a]), abs(values[b]), 1e-300)
    payload = {
        "q": args.q,
        "lhs": lhs.value,
        "rhs": rhs.total,
        "rhs_euclidean": rhs.euclidean,
        "rhs_spherical": rhs.spherical,
        "layer_cake": lc,
        "rel_errors": rel,
        "t_list": lhs.t_list,
        "quotients": lhs.quotients,
        "hypothesis_flags": lhs.flags,
    }
    row = [args.q, lhs.value, rhs.total, "" if lc is None else lc]
    _emit(args, payload, (["q", "lhs", "rhs", "layer_cake"], [row]))
    return EXIT_OK


def cmd_minkowski(args) -> int:
    m = measure_from_dict(_descriptor(args.mu, MEASURE_KEYS))
    if not hasattr(m, "points"):
        raise FormatError("the prescribed measure must be euclidean")
    mu = PrescribedMeasure(m)
    cfg = SolverConfig(nodes=args.grid_res, A=args.A, max_iter=args.max_iter, tol=args.tol, seed=args.seed)
    rep = solve(mu, Weight(args.q, mu.dim), cfg)
    payload = rep.as_dict()
    payload["q"] = args.q
    payload["f0"] = function_to_dict(rep.f0)
    rows = [[i, J, V, r] for i, (J, V, r) in enumerate(rep.trace)]
    _emit(args, payload, (["iteration", "J", "moment", "residual"], rows))
    if not rep.converged:
        raise NumericalFailure(f"solver did not converge in {rep.iterations} iterations "
                               f"(residual {rep.residual:.3g} of |mu|)")
    return EXIT_OK


def cmd_selftest(args) -> int:
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    numbers = args.only
    results = acceptance.run(numbers, args.seed, report=lambda r: print(r.line(), flush=True))
    if not args.no_repeat:
        det = acceptance.determinism(results, args.seed, numbers)
        print(det.line(), flush=True)
        results = results + [det]
    if out:
        (out / "results.json").write_text(acceptance.artifact_text(results), encoding="utf-8")
        rows = [[r.number, r.title, "PASS" if r.passed else "FAIL", r.summary] for r in results]
        (out / "summary.csv").write_text(csv_text(SUMMARY_HEADER, rows), encoding="utf-8")
        for r in results:
            if r.number == 11:
                (out / "minkowski_report.json").write_text(dumps(r.details["reports"]), encoding="utf-8")
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {', '.join(map(str, failed))}" if failed else ""))
    return EXIT_NUMERICAL if failed else EXIT_OK


COMMANDS = {
    "conjugate": cmd_conjugate, "supconv": cmd_supconv, "moment": cmd_moment, "tv": cmd_tv,
    "coarea": cmd_coarea, "body": cmd_body, "dualcurv": cmd_dualcurv, "varcheck": cmd_varcheck,
    "minkowski": cmd_minkowski, "selftest": cmd_selftest,
}

# numerical errors first: several of them subclass ValueError
NUMERICAL_ERRORS = (MomentDivergenceError, DegenerateIterateError, EmptyDomainError, SingularityError,
                    NumericalFailure, ArithmeticError, np.linalg.LinAlgError)
INVALID_ERRORS = (FormatError, InadmissibleMeasureError, DomainError, ValueError, KeyError, TypeError,
                  json.JSONDecodeError)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        try:
            args = _apply_config(parser, argv)
        except SystemExit as exc:
            return EXIT_INVALID if exc.code else EXIT_OK
        saved = get_threads()
        if args.threads:
            set_threads(args.threads)
        try:
            return COMMANDS[args.command](args)
        finally:
            set_threads(saved)
    except NUMERICAL_ERRORS as exc:
        print(f"dualcurv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except INVALID_ERRORS as exc:
        print(f"dualcurv: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"dualcurv: cannot access {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
