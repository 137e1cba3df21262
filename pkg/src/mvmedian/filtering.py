"""Sliding-window and amoeba median filtering of 2D images.

Each output pixel is produced in two steps: selection gathers the window
values (a translated structuring element, or an amoeba grown from
image-adaptive path distances around the pixel), and aggregation replaces
the center value by a median of the gathered values. Single-channel images
use the classical rank-order median; multichannel images plug in any of
the vector medians from :mod:`mvmedian.medians`.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import defaults as dflt
from ._kernels import amoeba_distances, rank_filter_2d
from ._kernels.numpy_impl import _map_index
from .core import ImageGrid
from .errors import (
    DimUnsupported,
    IncompatibleAggregator,
    InputError,
    SolverFailure,
)
from .medians import (
    median_chs,
    median_componentwise,
    median_halfspace,
    median_l1,
    median_oja,
    median_oja_2in3,
    median_trl1,
    medoid,
)

BOUNDARY_MODES = ("mirror", "clamp", "skip-outside")
_BOUNDARY_CODE = {"mirror": 0, "clamp": 1, "skip-outside": 2}

AGGREGATORS = (
    "rank",
    "componentwise",
    "l1",
    "trl1",
    "oja",
    "oja23",
    "halfspace",
    "chs",
    "medoid",
)


def resolve_threads(threads=None) -> int:
    """Worker count: explicit argument, else MVMEDIAN_THREADS, else 1."""
    if threads is None:
        threads = os.environ.get("MVMEDIAN_THREADS", "1")
    try:
        t = int(threads)
    except (TypeError, ValueError):
        raise InputError(f"thread count must be an integer, got {threads!r}")
    if t < 1:
        raise InputError("thread count must be >= 1")
    return t


@dataclass(frozen=True)
class BoundaryPolicy:
    """How window pixels outside the image domain are treated.

    mirror reflects across the border (no edge repeat), clamp repeats the
    edge pixel, skip-outside drops out-of-domain pixels from the window.
    """

    mode: str = "mirror"

    def __post_init__(self):
        if self.mode not in BOUNDARY_MODES:
            raise InputError(
                f"boundary mode must be one of {BOUNDARY_MODES}, got {self.mode!r}"
            )

    @property
    def code(self) -> int:
        return _BOUNDARY_CODE[self.mode]


def _as_boundary(boundary) -> BoundaryPolicy:
    if isinstance(boundary, BoundaryPolicy):
        return boundary
    return BoundaryPolicy(str(boundary))


@dataclass(frozen=True)
class StructuringElement:
    """Finite set of integer pixel offsets, always containing the origin."""

    offsets: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.offsets)
        if off.ndim != 2 or off.shape[0] == 0:
            raise InputError("offsets must be a nonempty (K, m) integer array")
        if not np.issubdtype(off.dtype, np.integer):
            if not np.all(off == np.round(off)):
                raise InputError("offsets must be integers")
        off = np.unique(off.astype(np.int64), axis=0)
        if not np.any(np.all(off == 0, axis=1)):
            raise InputError("the structuring element must contain the zero offset")
        off.flags.writeable = False
        object.__setattr__(self, "offsets", off)

    def __len__(self) -> int:
        return self.offsets.shape[0]

    @property
    def ndim(self) -> int:
        return self.offsets.shape[1]

    @property
    def halfwidth(self) -> int:
        return int(np.abs(self.offsets).max())

    @classmethod
    def box(cls, halfwidth: int) -> "StructuringElement":
        r = np.arange(-int(halfwidth), int(halfwidth) + 1)
        di, dj = np.meshgrid(r, r, indexing="ij")
        return cls(np.stack([di.ravel(), dj.ravel()], axis=1))


def disc_element(radius: float) -> StructuringElement:
    """All integer offsets (di, dj) with di^2 + dj^2 <= radius^2."""
    radius = float(radius)
    if radius < 0:
        raise InputError("radius must be nonnegative")
    a = int(np.floor(radius))
    r = np.arange(-a, a + 1)
    di, dj = np.meshgrid(r, r, indexing="ij")
    keep = di * di + dj * dj <= radius * radius
    return StructuringElement(np.stack([di[keep], dj[keep]], axis=1))


@dataclass(frozen=True)
class AmoebaConfig:
    """Image-adaptive window parameters.

    An amoeba around a pixel is the set of pixels reachable by a path of
    total amoeba length <= rho, where a step of spatial length s across a
    value jump dv costs 1 + beta*|dv| (L1 metric) or sqrt(s^2 + beta^2
    |dv|^2) (L2 metric); |dv| is the Euclidean norm over channels. The
    pilot flag chooses whether iterated filtering measures distances in
    the evolving image or in the original one.
    """

    rho: float
    beta: float = 1.0
    metric: str = "l1"
    neighborhood: int = 8
    pilot: str = "evolving"

    def __post_init__(self):
        if not self.rho > 0:
            raise InputError("amoeba radius rho must be positive")
        if self.beta < 0:
            raise InputError("amoeba contrast weight beta must be >= 0")
        m = str(self.metric).lower()
        if m not in ("l1", "l2"):
            raise InputError(f"amoeba metric must be 'l1' or 'l2', got {self.metric!r}")
        object.__setattr__(self, "metric", m)
        if self.neighborhood not in (4, 8):
            raise InputError("neighborhood must be 4 or 8")
        if self.pilot not in ("evolving", "initial"):
            raise InputError("pilot must be 'evolving' or 'initial'")

    @property
    def metric_code(self) -> int:
        return 0 if self.metric == "l1" else 1

    @property
    def halfwidth(self) -> int:
        # every step costs at least its spatial length, which is at least 1
        return int(np.floor(self.rho))


def _as_image(image) -> ImageGrid:
    if isinstance(image, ImageGrid):
        return image
    return ImageGrid(np.asarray(image, dtype=np.float64))


def _amoeba_window(src, i, j, a, code):
    """(2a+1, 2a+1, C) window around (i, j) plus validity mask."""
    h, w = src.shape[:2]
    ri = np.arange(i - a, i + a + 1)
    rj = np.arange(j - a, j + a + 1)
    if code == 2:
        oki = (ri >= 0) & (ri < h)
        okj = (rj >= 0) & (rj < w)
        valid = (oki[:, None] & okj[None, :]).astype(np.uint8)
        ri = np.clip(ri, 0, h - 1)
        rj = np.clip(rj, 0, w - 1)
    else:
        valid = np.ones((2 * a + 1, 2 * a + 1), dtype=np.uint8)
        ri = _map_index(ri, h, code)
        rj = _map_index(rj, w, code)
    return np.ascontiguousarray(src[np.ix_(ri, rj)]), valid, ri, rj


def amoeba_mask(image, pivot, cfg: AmoebaConfig,
                boundary="skip-outside") -> StructuringElement:
    """Offsets of the amoeba grown from ``pivot``.

    With the default skip-outside boundary the shortest paths run over
    in-domain pixels only; mirror or clamp boundaries measure contrast in
    the padded image instead.
    """
    grid = _as_image(image)
    if grid.data.ndim != 3:
        raise DimUnsupported("amoebas are defined on 2D images")
    i, j = int(pivot[0]), int(pivot[1])
    h, w = grid.data.shape[:2]
    if not (0 <= i < h and 0 <= j < w):
        raise InputError(f"pivot {(i, j)} outside the {h}x{w} image")
    code = _as_boundary(boundary).code
    a = cfg.halfwidth
    win, valid, _, _ = _amoeba_window(grid.data, i, j, a, code)
    dist = amoeba_distances(win, valid, a, a, float(cfg.beta),
                            cfg.metric_code, cfg.neighborhood)
    keep = dist <= cfg.rho + 1e-12
    di, dj = np.nonzero(keep)
    return StructuringElement(np.stack([di - a, dj - a], axis=1))


def _check_aggregator(name: str, channels: int) -> None:
    if name not in AGGREGATORS:
        raise InputError(f"unknown aggregator {name!r}; choose from {AGGREGATORS}")
    need = {
        "rank": channels == 1,
        "oja": channels == 2,
        "halfspace": channels == 2,
        "chs": channels == 2,
        "oja23": channels == 3,
    }
    if name in need and not need[name]:
        raise IncompatibleAggregator(
            f"aggregator {name!r} does not apply to {channels}-channel pixels"
        )


def _aggregate(name: str, vals: np.ndarray) -> np.ndarray:
    """Median of the (k, C) value sample; returns a (C,) vector."""
    if vals.shape[1] == 1:
        # every listed median of a univariate sample is the classical one
        return np.atleast_1d(np.median(vals[:, 0]))
    if name == "componentwise":
        return median_componentwise(vals).representative
    if name == "medoid":
        return medoid(vals).representative
    if name == "l1":
        return median_l1(vals).representative
    if name == "trl1":
        return median_trl1(vals).representative
    if name == "oja":
        return median_oja(vals).representative
    if name == "oja23":
        return median_oja_2in3(vals).representative
    if name == "halfspace":
        return median_halfspace(vals).representative
    if name == "chs":
        return median_chs(vals).representative
    raise IncompatibleAggregator(f"aggregator {name!r} needs single-channel data")


def _filter_rows(rows, out, cur, pilot_src, element, cfg, name, code, a):
    """Filter the given row range of the current frame into ``out``.

    Returns the number of per-pixel solver failures in the strip.
    """
    h, w = cur.shape[:2]
    failures = 0
    for i in rows:
        for j in range(w):
            if cfg is not None:
                dwin, valid, ri, rj = _amoeba_window(pilot_src, i, j, a, code)
                dist = amoeba_distances(dwin, valid, a, a, float(cfg.beta),
                                        cfg.metric_code, cfg.neighborhood)
                keep = dist <= cfg.rho + 1e-12
                if pilot_src is cur:
                    vals = dwin[keep]
                else:
                    vals = cur[np.ix_(ri, rj)][keep]
            else:
                ri = _map_index(i + element.offsets[:, 0], h, min(code, 1))
                rj = _map_index(j + element.offsets[:, 1], w, min(code, 1))
                vals = cur[ri, rj]
                if code == 2:
                    inside = ((i + element.offsets[:, 0] >= 0)
                              & (i + element.offsets[:, 0] < h)
                              & (j + element.offsets[:, 1] >= 0)
                              & (j + element.offsets[:, 1] < w))
                    vals = vals[inside]
            try:
                out[i, j] = _aggregate(name, vals)
            except SolverFailure:
                failures += 1
                out[i, j] = cur[i, j]
    return failures


def median_filter(image, element=None, amoeba=None, aggregator="rank",
                  boundary="mirror", iterations=1, threads=None) -> ImageGrid:
    """Iterated median filtering of a 2D image.

    Exactly one of ``element`` (a StructuringElement, applied as a sliding
    window) and ``amoeba`` (an AmoebaConfig, recomputed per pixel) selects
    the window. The aggregator names the median used on the window values;
    incompatible channel counts raise IncompatibleAggregator up front.
    Pixels where a vector median solver fails keep their input value; the
    failure count is reported in the output meta under 'solver_failures'.
    Quantized sources (maxval set) are filtered in real arithmetic and
    re-quantized once at output, rounding ties to even.
    """
    grid = _as_image(image)
    if grid.data.ndim != 3:
        raise DimUnsupported("median_filter handles 2D images only")
    if isinstance(element, AmoebaConfig):
        element, amoeba = None, element
    if (element is None) == (amoeba is None):
        raise InputError("pass exactly one of element= and amoeba=")
    if element is not None and not isinstance(element, StructuringElement):
        element = StructuringElement(np.asarray(element))
    if element is not None and element.ndim != 2:
        raise InputError("structuring element offsets must be 2D")
    iterations = int(iterations)
    if iterations < 0:
        raise InputError("iterations must be >= 0")
    code = _as_boundary(boundary).code
    name = str(aggregator)
    _check_aggregator(name, grid.channels)
    nthreads = resolve_threads(threads)

    cur = grid.data.copy()
    original = grid.data
    failures = 0
    a = amoeba.halfwidth if amoeba is not None else 0
    for _ in range(iterations):
        if name == "rank" and element is not None:
            cur = rank_filter_2d(
                np.ascontiguousarray(cur[:, :, 0]), element.offsets, code
            )[:, :, None]
            continue
        pilot_src = original if (amoeba is not None
                                 and amoeba.pilot == "initial") else cur
        out = np.empty_like(cur)
        h = cur.shape[0]
        if nthreads == 1:
            failures += _filter_rows(range(h), out, cur, pilot_src,
                                     element, amoeba, name, code, a)
        else:
            strips = [range(s, h, nthreads) for s in range(nthreads)]
            with ThreadPoolExecutor(max_workers=nthreads) as pool:
                jobs = [pool.submit(_filter_rows, rows, out, cur, pilot_src,
                                    element, amoeba, name, code, a)
                        for rows in strips]
                failures += sum(job.result() for job in jobs)
        cur = out

    meta = dict(grid.meta)
    meta["solver_failures"] = failures
    result = ImageGrid(cur, grid.spacing, grid.maxval, meta)
    if grid.maxval is not None:
        result = result.quantized()
    return result
