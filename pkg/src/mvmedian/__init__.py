"""Multivariate medians, median filters, and their PDE limits."""

from .core import (
    AffineMap,
    ConvexPolytope,
    ImageGrid,
    Interval,
    MedianResult,
    ProjectiveMap,
    WeightedPointSet,
    convex_hull_2d,
)
from .errors import InputError, MvmedianError, SolverFailure

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "ConvexPolytope",
    "ImageGrid",
    "Interval",
    "MedianResult",
    "ProjectiveMap",
    "WeightedPointSet",
    "convex_hull_2d",
    "InputError",
    "MvmedianError",
    "SolverFailure",
    "__version__",
]
