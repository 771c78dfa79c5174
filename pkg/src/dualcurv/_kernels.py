"""Compiled one-dimensional lower-envelope sweep used by the discrete conjugate."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np

_THREADS = [max(1, int(os.environ.get("DUALCURV_THREADS", "1") or 1))]
# below this many lines per call the pool overhead dominates
_MIN_PARALLEL_LINES = 4096


def set_threads(n: int) -> None:
    """Worker count for the line sweeps. Results do not depend on it."""
    if int(n) < 1:
        raise ValueError("thread count must be positive")
    _THREADS[0] = int(n)


def get_threads() -> int:
    return _THREADS[0]


@numba.njit(cache=True, nogil=True)
def conjugate_lines(vals, xs, ys, out, arg):
    """Discrete conjugate of many sampled lines at once.

    For every row ``l``, computes ``out[l, j] = max_i xs[i]*ys[j] - vals[l, i]``
    over the finite entries of the row, in linear time, using the lower convex
    hull of the points ``(xs[i], vals[l, i])``. ``arg[l, j]`` receives the
    maximizing index, or -1 for rows without finite entries, whose output is
    ``-inf``. ``xs`` and ``ys`` must be increasing.
    """
    n_lines, n_in = vals.shape
    n_out = ys.shape[0]
    hx = np.empty(n_in)
    hv = np.empty(n_in)
    hi = np.empty(n_in, np.int64)
    for line in range(n_lines):
        k = 0
        for i in range(n_in):
            v = vals[line, i]
            if v == np.inf:
                continue
            x = xs[i]
            while k >= 2:
                x1 = hx[k - 2]
                v1 = hv[k - 2]
                x2 = hx[k - 1]
                v2 = hv[k - 1]
                if (v2 - v1) * (x - x1) >= (v - v1) * (x2 - x1):
                    k -= 1
                else:
                    break
            hx[k] = x
            hv[k] = v
            hi[k] = i
            k += 1
        if k == 0:
            for j in range(n_out):
                out[line, j] = -np.inf
                arg[line, j] = -1
            continue
        p = 0
        for j in range(n_out):
            y = ys[j]
            while p < k - 1 and (hv[p + 1] - hv[p]) <= y * (hx[p + 1] - hx[p]):
                p += 1
            out[line, j] = hx[p] * y - hv[p]
            arg[line, j] = hi[p]
    return out, arg


def _sweep(lines, xs, ys, res, arg):
    k = _THREADS[0]
    if k == 1 or lines.shape[0] < _MIN_PARALLEL_LINES:
        conjugate_lines(lines, xs, ys, res, arg)
        return
    # lines are independent, so chunking cannot change any output bit
    bounds = np.linspace(0, lines.shape[0], k + 1).astype(int)
    with ThreadPoolExecutor(k) as pool:
        jobs = [pool.submit(conjugate_lines, lines[a:b], xs, ys, res[a:b], arg[a:b])
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        for j in jobs:
            j.result()


def discrete_conjugate(values: np.ndarray, axes_in: list[np.ndarray], axes_out: list[np.ndarray]):
    """Separable discrete Legendre transform on tensor grids.

    Returns the conjugate values on the output grid together with the index
    tuple (one integer array per axis) of the maximizing input node.
    """
    n = values.ndim
    cur = np.ascontiguousarray(values, dtype=float)
    # arg_maps[ax] gives, on the partially transformed array, the input index along ax
    arg_maps: list[np.ndarray] = []
    for ax in range(n - 1, -1, -1):
        moved = np.moveaxis(cur, ax, -1)
        lead = moved.shape[:-1]
        lines = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))
        res = np.empty((lines.shape[0], axes_out[ax].size))
        arg = np.empty(res.shape, np.int64)
        _sweep(lines, np.ascontiguousarray(axes_in[ax]), np.ascontiguousarray(axes_out[ax]), res, arg)
        res = np.moveaxis(res.reshape(lead + (axes_out[ax].size,)), -1, ax)
        arg = np.moveaxis(arg.reshape(lead + (axes_out[ax].size,)), -1, ax)
        # earlier (higher) axes were already mapped; gather them through this argmax
        arg_maps = [np.take_along_axis(m, np.maximum(arg, 0), axis=ax) for m in arg_maps]
        arg_maps.append(arg)
        cur = -res if ax > 0 else res
    if np.isneginf(cur).any():
        raise ValueError("empty effective domain")
    # arg_maps holds axes n-1, ..., 0 in that order
    idx = tuple(arg_maps[n - 1 - ax] for ax in range(n))
    return cur, idx
