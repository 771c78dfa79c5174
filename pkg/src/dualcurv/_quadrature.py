"""Low-level quadrature rules shared by the geometry and integration modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi


@lru_cache(maxsize=64)
def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=64)
def gauss_jacobi_radial(m: int, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [0, 1] and weights exact for r**(q-1) times polynomials.

    The rule integrates ``r**(q-1) * p(r)`` over [0, 1] exactly when ``p`` has
    degree below ``2m``.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    x, w = roots_jacobi(m, 0.0, q - 1.0)
    r = 0.5 * (1.0 + x)
    w = w * 0.5**q
    r.setflags(write=False)
    w.setflags(write=False)
    return r, w


def panel_rule(a, b, n_panels: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on each interval ``[a_k, b_k]``.

    ``a`` and ``b`` may be arrays of equal shape; every interval is split into
    ``n_panels`` equal panels with ``m`` nodes each. Returns nodes and weights of
    shape ``a.shape + (n_panels * m,)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = gauss_legendre(m)
    width = (b - a) / n_panels
    k = np.arange(n_panels)
    left = a[..., None] + width[..., None] * k
    nodes = left[..., None] + 0.5 * width[..., None, None] * (x + 1.0)
    weights = np.broadcast_to(0.5 * width[..., None, None] * w, nodes.shape)
    shape = a.shape + (n_panels * m,)
    return nodes.reshape(shape), np.array(weights).reshape(shape)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (n=1 gives 2)."""
    return 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)


def angular_rule(n: int, n_angles: int = 512, n_polar: int = 48) -> tuple[np.ndarray, np.ndarray]:
    """Direction samples and weights integrating functions on the unit sphere.

    n=1 uses the two points +-1. n=2 uses ``n_angles`` equally spaced angles
    offset by half a step, so the set is closed under negation when
    ``n_angles`` is even. n=3 uses a product of Gauss-Legendre nodes in the
    polar cosine with ``2 * n_polar`` equally spaced azimuths.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        if n_angles % 2:
            raise ValueError("n_angles must be even")
        th = 2.0 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        return dirs, np.full(n_angles, 2.0 * np.pi / n_angles)
    if n == 3:
        z, wz = gauss_legendre(n_polar)
        n_az = 2 * n_polar
        az = 2.0 * np.pi * (np.arange(n_az) + 0.5) / n_az
        s = np.sqrt(1.0 - z**2)
        dirs = np.stack(
            [
                (s[:, None] * np.cos(az)[None, :]).ravel(),
                (s[:, None] * np.sin(az)[None, :]).ravel(),
                np.repeat(z, n_az),
            ],
            axis=1,
        )
        w = np.repeat(wz, n_az) * (2.0 * np.pi / n_az)
        return dirs, w
    raise ValueError("dimension must be 1, 2 or 3")
