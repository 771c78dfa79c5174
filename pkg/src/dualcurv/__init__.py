"""Dual curvature measures of log-concave functions and the functional dual Minkowski problem.

Modules
-------
core_convex
    Convex function representations, Legendre conjugates, sup-convolution, level sets.
bodies
    Convex bodies, radial and support functions, dual quermassintegrals and dual curvature measures.
weighted_variation
    Weighted moments, anisotropic total variation, coarea and functional inequalities.
dual_curvature
    Euclidean and spherical dual curvature measures and the first variation of the moment.
minkowski_solver
    Projected descent for the functional dual Minkowski problem.
cli
    The ``dualcurv`` command.
"""

from ._kernels import get_threads, set_threads
from .bodies import Ball, Polytope
from .core_convex import (
    BodyIndicator,
    GridSampled,
    GridSpec,
    LogConcaveFunction,
    MaxAffine,
    Quadratic,
    ScaledNorm,
    SupportFn,
    conjugate,
    sup_convolve,
)
from .weighted_variation import Weight

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BodyIndicator",
    "GridSampled",
    "GridSpec",
    "LogConcaveFunction",
    "MaxAffine",
    "Polytope",
    "Quadratic",
    "ScaledNorm",
    "SupportFn",
    "Weight",
    "conjugate",
    "get_threads",
    "set_threads",
    "sup_convolve",
]
