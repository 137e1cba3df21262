"""Shared geometric types: weighted point sets, intervals, polytopes,
affine/projective maps, image grids, and the 2D convex hull."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import defaults
from .errors import (
    DenominatorVanishes,
    DimensionMismatch,
    DimUnsupported,
    EmptyInput,
)


def as_points(points) -> np.ndarray:
    """Coerce to an (N, n) float64 array; 1D input becomes (N, 1)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DimensionMismatch("points must be a 1D or 2D array")
    return pts


@dataclass(frozen=True)
class WeightedPointSet:
    """Finite multiset of points in R^n with positive weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        w = np.asarray(self.weights, dtype=np.float64)
        if pts.shape[0] == 0:
            raise EmptyInput("point set is empty")
        if w.shape != (pts.shape[0],):
            raise DimensionMismatch("weights must be one scalar per point")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise DimensionMismatch("points and weights must be finite")
        if np.any(w <= 0.0):
            raise DimensionMismatch("weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points, weights=None) -> "WeightedPointSet":
        pts = as_points(points)
        if weights is None:
            weights = np.ones(pts.shape[0])
        return cls(pts, np.asarray(weights, dtype=np.float64))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def normalized(self) -> "WeightedPointSet":
        return WeightedPointSet(self.points, self.weights / self.total_weight)

    def bbox_diameter(self) -> float:
        span = self.points.max(axis=0) - self.points.min(axis=0)
        return float(np.sqrt(np.sum(span * span)))


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; a point when lo == hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise DimensionMismatch("interval endpoints must be finite")
        if self.lo > self.hi:
            raise DimensionMismatch("interval demands lo <= hi")

    def representative(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    @property
    def width(self) -> float:
        return self.hi - self.lo


def orientation(p, q, r) -> float:
    """Signed cross product (q - p) x (r - p); positive for a left turn."""
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def turn(p, q, r, scale: float) -> int:
    """-1 / 0 / +1 classification of orientation, with the zero band
    ORIENT_EPS * scale^2 (scale should be a bounding-box diameter)."""
    c = orientation(p, q, r)
    band = defaults.ORIENT_EPS * scale * scale
    if c > band:
        return 1
    if c < -band:
        return -1
    return 0


def convex_hull_2d(points, tol: Optional[float] = None) -> np.ndarray:
    """Strict hull vertices, counterclockwise from the lexicographic minimum.

    Points interior to hull edges are not vertices and are dropped. The
    collinearity band defaults to ORIENT_EPS * diameter^2.
    """
    pts = as_points(points)
    if pts.shape[1] != 2:
        raise DimUnsupported("convex_hull_2d expects planar points")
    if pts.shape[0] == 0:
        raise EmptyInput("no points")
    uniq = np.unique(pts, axis=0)  # sorts lexicographically
    m = uniq.shape[0]
    if m == 1:
        return uniq
    if tol is None:
        span = uniq.max(axis=0) - uniq.min(axis=0)
        diam2 = float(np.sum(span * span))
        tol = defaults.ORIENT_EPS * diam2
    if m == 2:
        return uniq

    def chain(idx_iter):
        out = []
        for i in idx_iter:
            p = uniq[i]
            while len(out) >= 2 and orientation(uniq[out[-2]], uniq[out[-1]], p) <= tol:
                out.pop()
            out.append(i)
        return out

    lower = chain(range(m))
    upper = chain(range(m - 1, -1, -1))
    idx = lower[:-1] + upper[:-1]
    if len(idx) == 0:
        idx = [0]
    verts = uniq[idx]
    if len(idx) >= 2 and np.array_equal(verts[0], verts[-1]):
        verts = verts[:-1]
    return verts


def _canonical_2d(verts: np.ndarray) -> np.ndarray:
    """Rotate a CCW vertex cycle so it starts at the lexicographic minimum."""
    start = np.lexsort((verts[:, 1], verts[:, 0]))[0]
    return np.roll(verts, -start, axis=0)


@dataclass(frozen=True)
class ConvexPolytope:
    """Convex polytope given by its vertices, canonically ordered.

    2D: counterclockwise cycle starting at the lexicographic minimum
    (a segment or single point degenerates to 2 or 1 vertices).
    1D/3D: vertices in lexicographic order.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = as_points(self.vertices)
        if v.shape[0] == 0:
            raise EmptyInput("polytope needs at least one vertex")
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_points(cls, points) -> "ConvexPolytope":
        """Hull of the given points, canonicalized."""
        pts = as_points(points)
        if pts.shape[1] == 2:
            hull = convex_hull_2d(pts)
            if hull.shape[0] >= 3:
                hull = _canonical_2d(hull)
            return cls(hull)
        # 1D / 3D: keep extreme ordering simple — unique lex-sorted vertices
        if pts.shape[1] == 1:
            return cls(np.array([[pts.min()], [pts.max()]])
                       if pts.min() < pts.max() else np.array([[pts.min()]]))
        return cls(np.unique(pts, axis=0))

    @classmethod
    def single(cls, point) -> "ConvexPolytope":
        return cls(np.asarray(point, dtype=np.float64)[None, :])

    @classmethod
    def segment(cls, a, b) -> "ConvexPolytope":
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        two = np.stack([a, b])
        if np.array_equal(a, b):
            return cls(a[None, :])
        return cls(two[np.lexsort(tuple(two[:, k] for k in range(two.shape[1] - 1, -1, -1)))])

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def centroid(self) -> np.ndarray:
        """Area centroid for a proper 2D polygon, vertex mean otherwise.

        Works in vertex-mean-centered coordinates; the shoelace formula on
        raw coordinates cancels catastrophically for slivers far from the
        origin. Degenerate (near-zero area) polygons fall back to the
        vertex mean, which always lies inside the hull.
        """
        v = self.vertices
        if self.dim == 2 and v.shape[0] >= 3:
            mean = v.mean(axis=0)
            x = v[:, 0] - mean[0]
            y = v[:, 1] - mean[1]
            xn = np.roll(x, -1)
            yn = np.roll(y, -1)
            cr = x * yn - xn * y
            a = 0.5 * np.sum(cr)
            scale2 = float(np.max(x * x + y * y))
            if abs(a) > 1e-12 * max(scale2, 1e-300):
                cx = np.sum((x + xn) * cr) / (6.0 * a)
                cy = np.sum((y + yn) * cr) / (6.0 * a)
                return mean + np.array([cx, cy])
        return v.mean(axis=0)

    def area(self) -> float:
        if self.dim != 2 or self.vertices.shape[0] < 3:
            return 0.0
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def diameter(self) -> float:
        v = self.vertices
        if v.shape[0] == 1:
            return 0.0
        d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))

    def contains(self, x, tol: Optional[float] = None) -> bool:
        x = np.asarray(x, dtype=np.float64)
        v = self.vertices
        scale = max(self.diameter(), float(np.sqrt(np.sum(x * x))), 1.0)
        if tol is None:
            tol = defaults.POLY_CONTAINS_REL * scale
        if v.shape[0] == 1:
            return bool(np.sqrt(np.sum((x - v[0]) ** 2)) <= tol)
        if self.dim == 1:
            return bool(v[0, 0] - tol <= x[0] <= v[-1, 0] + tol)
        if self.dim == 2:
            if v.shape[0] == 2:
                a, b = v[0], v[1]
                ab = b - a
                t = float(np.dot(x - a, ab) / np.dot(ab, ab))
                t = min(1.0, max(0.0, t))
                return bool(np.sqrt(np.sum((a + t * ab - x) ** 2)) <= tol)
            for k in range(v.shape[0]):
                a = v[k]
                b = v[(k + 1) % v.shape[0]]
                if orientation(a, b, x) < -tol * scale:
                    return False
            return True
        # 3D support is only needed for axis-aligned boxes
        lo = v.min(axis=0) - tol
        hi = v.max(axis=0) + tol
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def approx_equal(self, other: "ConvexPolytope", tol: float) -> bool:
        if self.dim != other.dim or self.n_vertices != other.n_vertices:
            return False
        return bool(np.all(np.abs(self.vertices - other.vertices) <= tol))


@dataclass(frozen=True)
class MedianResult:
    """Outcome of a multivariate median computation."""

    representative: np.ndarray
    objective_value: Optional[float] = None
    median_set: Optional[ConvexPolytope] = None
    iterations: int = 0
    status: str = "exact"

    def __post_init__(self):
        object.__setattr__(
            self, "representative", np.asarray(self.representative, dtype=np.float64)
        )


@dataclass(frozen=True)
class AffineMap:
    """x -> A x + t."""

    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or t.shape != (a.shape[0],):
            raise DimensionMismatch("affine map needs (n, n) matrix and (n,) shift")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + self.translation

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other: x -> self(other(x))."""
        return AffineMap(
            self.matrix @ other.matrix,
            self.matrix @ other.translation + self.translation,
        )

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.matrix)
        return AffineMap(inv, -inv @ self.translation)


@dataclass(frozen=True)
class ProjectiveMap:
    """x -> (P x + q) / (r . x + s)."""

    linear: np.ndarray
    offset: np.ndarray
    denom_row: np.ndarray
    denom_const: float

    def __post_init__(self):
        p = np.asarray(self.linear, dtype=np.float64)
        q = np.asarray(self.offset, dtype=np.float64)
        r = np.asarray(self.denom_row, dtype=np.float64)
        n = p.shape[0]
        if p.shape != (n, n) or q.shape != (n,) or r.shape != (n,):
            raise DimensionMismatch("projective map blocks have inconsistent shapes")
        object.__setattr__(self, "linear", p)
        object.__setattr__(self, "offset", q)
        object.__setattr__(self, "denom_row", r)
        object.__setattr__(self, "denom_const", float(self.denom_const))

    @classmethod
    def from_affine(cls, amap: AffineMap) -> "ProjectiveMap":
        n = amap.dim
        return cls(amap.matrix, amap.translation, np.zeros(n), 1.0)

    @classmethod
    def from_matrix(cls, block: np.ndarray) -> "ProjectiveMap":
        block = np.asarray(block, dtype=np.float64)
        n = block.shape[0] - 1
        return cls(block[:n, :n], block[:n, n], block[n, :n], block[n, n])

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    def block_matrix(self) -> np.ndarray:
        n = self.dim
        out = np.empty((n + 1, n + 1))
        out[:n, :n] = self.linear
        out[:n, n] = self.offset
        out[n, :n] = self.denom_row
        out[n, n] = self.denom_const
        return out

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        den = pts @ self.denom_row + self.denom_const
        if np.any(np.abs(den) <= 1e-12):
            raise DenominatorVanishes("projective denominator vanishes at a point")
        num = pts @ self.linear.T + self.offset
        out = num / den[:, None]
        return out[0] if single else out

    def compose(self, other: "ProjectiveMap") -> "ProjectiveMap":
        return ProjectiveMap.from_matrix(self.block_matrix() @ other.block_matrix())

    def inverse(self) -> "ProjectiveMap":
        return ProjectiveMap.from_matrix(np.linalg.inv(self.block_matrix()))


@dataclass
class ImageGrid:
    """Pixel grid with n channels: data has shape extent + (channels,).

    maxval records the quantization range of integer-typed sources
    (255 or 65535); None means unquantized float data.
    """

    data: np.ndarray
    spacing: float = 1.0
    maxval: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim == 2:
            d = d[:, :, None]
        if d.ndim not in (3, 4):
            raise DimensionMismatch("image data must be (H, W[, C]) or (D, H, W, C)")
        if not np.all(np.isfinite(d)):
            raise DimensionMismatch("image data must be finite")
        if self.spacing <= 0:
            raise DimensionMismatch("spacing must be positive")
        self.data = np.ascontiguousarray(d)

    @property
    def extent(self):
        return self.data.shape[:-1]

    @property
    def channels(self) -> int:
        return self.data.shape[-1]

    def copy(self) -> "ImageGrid":
        return ImageGrid(self.data.copy(), self.spacing, self.maxval, dict(self.meta))

    def quantized(self) -> "ImageGrid":
        """Round back to the integer range when maxval is set (ties to even)."""
        if self.maxval is None:
            return self
        q = np.clip(np.rint(self.data), 0.0, float(self.maxval))
        return ImageGrid(q, self.spacing, self.maxval, dict(self.meta))
