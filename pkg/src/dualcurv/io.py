"""JSON and CSV formats for functions, bodies, measures and reports.

Floats are written with 12 significant digits and infinities as the token
``"inf"``; keys are sorted, so equal inputs give byte-identical files.

Function descriptor::

    {"kind": "quadratic", "a": 1.0, "b": 0.0, "dim": 2}
    {"kind": "scaled_norm", "c": 1.0, "b": 0.0, "dim": 2}
    {"kind": "indicator", "body": <body>, "offset": 0.0}
    {"kind": "support", "body": <body>, "offset": 0.0}
    {"kind": "max_affine", "slopes": [[...], ...], "offsets": [...]}
    {"kind": "grid", "dim": 2, "radius": 4.0, "nodes": 65, "values": [...], "even": false}

Grid values are row-major. Body descriptor::

    {"kind": "ball", "r": 2.0, "dim": 2}
    {"kind": "polytope", "vertices": [[...], ...]}

Measure descriptor (``"kind"`` is ``"euclidean"`` or ``"spherical"``)::

    {"kind": "euclidean", "dim": 2, "atoms": [[y_1, ..., y_n, weight], ...]}
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

from .bodies import Ball, ConvexBody, Polytope, SphericalMeasure
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
)
from .dual_curvature import EuclideanMeasure

SIG_DIGITS = 12


class FormatError(ValueError):
    """Malformed descriptor or file."""


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        raise FormatError("NaN cannot be serialized")
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.{SIG_DIGITS}g}"
    return "0" if s == "-0" else s


def _canon(obj: Any) -> Any:
    """Round floats and convert numpy types; infinities become string tokens."""
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canon(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        s = fmt_float(obj)
        return s if "inf" in s else float(s)
    if obj is None or isinstance(obj, str):
        return obj
    raise FormatError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(_canon(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: Union[str, Path], obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path: Union[str, Path]) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON in {path}: {exc.msg}") from exc


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).write_text(csv_text(header, rows), encoding="utf-8")


def _num(v) -> float:
    if isinstance(v, str):
        t = v.strip().lower()
        if t in ("inf", "+inf", "infinity"):
            return math.inf
        raise FormatError(f"unexpected token {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"expected a number, got {v!r}")
    return float(v)


def _get(d: dict, key: str, default=None, required: bool = True):
    if key in d:
        return d[key]
    if required and default is None:
        raise FormatError(f"missing field {key!r}")
    return default


# bodies --------------------------------------------------------------------------------------


def body_to_dict(K: ConvexBody) -> dict:
    if isinstance(K, Ball):
        return {"kind": "ball", "r": K.r, "dim": K.dim}
    return {"kind": "polytope", "vertices": K.vertices}


def body_from_dict(d: dict) -> ConvexBody:
    if not isinstance(d, dict):
        raise FormatError("body descriptor must be an object")
    kind = _get(d, "kind")
    if kind == "ball":
        return Ball(_num(_get(d, "r")), int(d.get("dim", 2)))
    if kind == "polytope":
        verts = np.array([[_num(v) for v in row] for row in _get(d, "vertices")], dtype=float)
        return Polytope.from_vertices(verts)
    raise FormatError(f"unknown body kind {kind!r}")


# functions -----------------------------------------------------------------------------------


def function_to_dict(rep: Union[ConvexFunctionRep, LogConcaveFunction]) -> dict:
    if isinstance(rep, LogConcaveFunction):
        rep = rep.phi
    if isinstance(rep, Quadratic):
        return {"kind": "quadratic", "a": rep.a, "b": rep.b, "dim": rep.dim, "even": True}
    if isinstance(rep, ScaledNorm):
        return {"kind": "scaled_norm", "c": rep.c, "b": rep.b, "dim": rep.dim, "even": True}
    if isinstance(rep, BodyIndicator):
        return {"kind": "indicator", "body": body_to_dict(rep.body), "offset": rep.offset, "even": rep.even}
    if isinstance(rep, SupportFn):
        return {"kind": "support", "body": body_to_dict(rep.body), "offset": rep.offset, "even": rep.even}
    if isinstance(rep, MaxAffine):
        return {"kind": "max_affine", "slopes": rep.slopes, "offsets": rep.offsets, "even": rep.even}
    if isinstance(rep, GridSampled):
        g = rep.grid
        return {"kind": "grid", "dim": g.dim, "radius": g.radius, "nodes": g.nodes,
                "values": rep.values.ravel(), "even": rep.even}
    raise FormatError(f"unsupported representation {type(rep).__name__}")


def function_from_dict(d: dict) -> ConvexFunctionRep:
    if not isinstance(d, dict):
        raise FormatError("function descriptor must be an object")
    kind = _get(d, "kind")
    dim = int(d.get("dim", 2))
    if kind == "quadratic":
        return Quadratic(_num(_get(d, "a")), dim, _num(d.get("b", 0.0)))
    if kind == "scaled_norm":
        return ScaledNorm(_num(_get(d, "c")), _num(d.get("b", 0.0)), dim)
    if kind == "indicator":
        return BodyIndicator(body_from_dict(_get(d, "body")), _num(d.get("offset", 0.0)))
    if kind == "support":
        return SupportFn(body_from_dict(_get(d, "body")), _num(d.get("offset", 0.0)))
    if kind == "max_affine":
        S = np.array([[_num(v) for v in row] for row in _get(d, "slopes")], dtype=float)
        o = np.array([_num(v) for v in _get(d, "offsets")], dtype=float)
        return MaxAffine(S, o)
    if kind == "grid":
        grid = GridSpec(dim, _num(_get(d, "radius")), int(_get(d, "nodes")))
        vals = np.array([_num(v) for v in _get(d, "values")], dtype=float)
        if vals.size != int(np.prod(grid.shape)):
            raise FormatError("grid payload has the wrong number of values")
        return GridSampled(grid, vals.reshape(grid.shape), even=bool(d.get("even", False)))
    raise FormatError(f"unknown function kind {kind!r}")


def log_concave_from_dict(d: dict) -> LogConcaveFunction:
    return LogConcaveFunction(function_from_dict(d))


# measures ------------------------------------------------------------------------------------


def measure_to_dict(m: Union[EuclideanMeasure, SphericalMeasure]) -> dict:
    if isinstance(m, EuclideanMeasure):
        return {"kind": "euclidean", "dim": m.dim, "atoms": m.rows(), "provenance": m.provenance}
    return {"kind": "spherical", "dim": m.directions.shape[1], "atoms": m.rows()}


def measure_from_dict(d: dict) -> Union[EuclideanMeasure, SphericalMeasure]:
    if isinstance(d, list):
        d = {"kind": "euclidean", "atoms": d}
    if not isinstance(d, dict):
        raise FormatError("measure descriptor must be an object or an atom list")
    rows = _get(d, "atoms")
    if not isinstance(rows, list):
        raise FormatError("atoms must be a list")
    arr = np.array([[_num(v) for v in r] for r in rows], dtype=float) if rows else np.zeros((0, int(d.get("dim", 2)) + 1))
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise FormatError("each atom needs point coordinates and a weight")
    kind = d.get("kind", "euclidean")
    if kind == "euclidean":
        return EuclideanMeasure(arr[:, :-1], arr[:, -1], str(d.get("provenance", "file")))
    if kind == "spherical":
        return SphericalMeasure(arr[:, :-1], arr[:, -1])
    raise FormatError(f"unknown measure kind {kind!r}")


def measure_csv_rows(m: Union[EuclideanMeasure, SphericalMeasure]) -> tuple[list[str], np.ndarray]:
    rows = m.rows()
    n = rows.shape[1] - 1
    prefix = "y" if isinstance(m, EuclideanMeasure) else "v"
    return [f"{prefix}{i}" for i in range(n)] + ["weight"], rows
