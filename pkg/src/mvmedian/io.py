"""File formats: CSV point lists, binary PGM/PPM images, PFM float maps."""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .core import ImageGrid, WeightedPointSet
from .errors import DimensionMismatch, EmptyInput, ParseError

_COORD_HEADERS = (["x"], ["x", "y"], ["x", "y", "z"])


def read_points_csv(path) -> WeightedPointSet:
    """Read a point multiset from CSV.

    Header must be x[,y[,z]][,w]; a missing w column means unit weights.
    """
    path = Path(path)
    with path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInput(f"{path}: file is empty")
        header = [h.strip().lower() for h in header]
        has_w = header[-1:] == ["w"]
        coords = header[:-1] if has_w else header
        if coords not in _COORD_HEADERS:
            raise ParseError(
                f"{path}: header must be x[,y[,z]][,w], got {','.join(header)}"
            )
        dim = len(coords)
        pts: list = []
        wts: list = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != dim + (1 if has_w else 0):
                raise ParseError(f"{path}: line {lineno}: expected "
                                 f"{dim + (1 if has_w else 0)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            pts.append(vals[:dim])
            wts.append(vals[dim] if has_w else 1.0)
        if not pts:
            raise EmptyInput(f"{path}: no data rows")
        try:
            return WeightedPointSet(np.array(pts), np.array(wts))
        except DimensionMismatch as exc:
            raise ParseError(f"{path}: {exc}") from None


def write_points_csv(path, pset: WeightedPointSet, include_weights: bool = True):
    path = Path(path)
    dim = pset.dim
    header = list("xyz"[:dim]) + (["w"] if include_weights else [])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for p, w in zip(pset.points, pset.weights):
            row = [repr(float(v)) for v in p]
            if include_weights:
                row.append(repr(float(w)))
            writer.writerow(row)


def _read_pnm_tokens(data: bytes, count: int, path):
    """Pull `count` whitespace-separated header tokens, skipping comments.
    Returns (tokens, offset_of_binary_payload)."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace():
            j += 1
        if i == j:
            raise ParseError(f"{path}: truncated header")
        tokens.append(data[i:j])
        i = j
    # exactly one whitespace byte separates header from payload
    if i >= n:
        raise ParseError(f"{path}: missing payload")
    i += 1
    return tokens, i


def read_image(path) -> ImageGrid:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 2:
        raise ParseError(f"{path}: not an image file")
    magic = data[:2]
    if magic in (b"P5", b"P6"):
        return _read_pnm(data, magic, path)
    if magic in (b"Pf", b"PF"):
        return _read_pfm(data, magic, path)
    raise ParseError(f"{path}: unsupported magic {magic!r}")


def _read_pnm(data: bytes, magic: bytes, path) -> ImageGrid:
    tokens, off = _read_pnm_tokens(data[2:], 3, path)
    off += 2
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ParseError(f"{path}: bad header tokens") from None
    if w <= 0 or h <= 0 or not (0 < maxval < 65536):
        raise ParseError(f"{path}: bad dimensions or maxval")
    channels = 1 if magic == b"P5" else 3
    count = w * h * channels
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    need = count * dtype.itemsize
    payload = data[off : off + need]
    if len(payload) != need:
        raise ParseError(f"{path}: payload has {len(payload)} bytes, need {need}")
    arr = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    arr = arr.reshape(h, w, channels)
    return ImageGrid(arr, maxval=maxval)


def write_image(path, grid: ImageGrid):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".ppm"):
        _write_pnm(path, grid)
    elif suffix == ".pfm":
        write_pfm(path, grid)
    else:
        raise ParseError(f"{path}: unsupported image extension {suffix!r}")


def _write_pnm(path: Path, grid: ImageGrid):
    if len(grid.extent) != 2:
        raise DimensionMismatch("PNM wants a 2D grid")
    ch = grid.channels
    if ch not in (1, 3):
        raise DimensionMismatch("PNM supports 1 or 3 channels")
    maxval = grid.maxval if grid.maxval is not None else 255
    magic = b"P5" if ch == 1 else b"P6"
    vals = np.clip(np.rint(grid.data), 0, maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    h, w = grid.extent
    header = b"%s\n%d %d\n%d\n" % (magic, w, h, maxval)
    path.write_bytes(header + vals.astype(dtype).tobytes())


def _read_pfm(data: bytes, magic: bytes, path) -> ImageGrid:
    tokens, off = _read_pnm_tokens(data[2:], 3, path)
    off += 2
    try:
        w, h = int(tokens[0]), int(tokens[1])
        scale = float(tokens[2])
    except ValueError:
        raise ParseError(f"{path}: bad PFM header") from None
    if w <= 0 or h <= 0 or scale == 0.0:
        raise ParseError(f"{path}: bad PFM dimensions or scale")
    channels = 1 if magic == b"Pf" else 3
    count = w * h * channels
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    need = count * 4
    payload = data[off : off + need]
    if len(payload) != need:
        raise ParseError(f"{path}: payload has {len(payload)} bytes, need {need}")
    arr = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    arr = arr.reshape(h, w, channels)
    arr = arr[::-1]  # PFM scanlines run bottom to top
    return ImageGrid(np.ascontiguousarray(arr))


def write_pfm(path, grid: ImageGrid):
    path = Path(path)
    if len(grid.extent) != 2:
        raise DimensionMismatch("PFM wants a 2D grid")
    ch = grid.channels
    if ch not in (1, 3):
        raise DimensionMismatch("PFM supports 1 or 3 channels")
    magic = b"Pf" if ch == 1 else b"PF"
    h, w = grid.extent
    header = b"%s\n%d %d\n-1.0\n" % (magic, w, h)
    payload = grid.data[::-1].astype("<f4").tobytes()
    path.write_bytes(header + payload)


def read_volume(paths) -> ImageGrid:
    """Stack per-slice images (sorted by name) into a 3D grid."""
    paths = sorted(Path(p) for p in paths)
    if not paths:
        raise EmptyInput("no slices")
    slices = [read_image(p) for p in paths]
    shape0 = slices[0].data.shape
    for p, s in zip(paths, slices):
        if s.data.shape != shape0:
            raise DimensionMismatch(f"{p}: slice shape {s.data.shape} != {shape0}")
    vol = np.stack([s.data for s in slices], axis=0)
    return ImageGrid(vol, maxval=slices[0].maxval)


_GLOB_CHARS = re.compile(r"[*?\[]")


def expand_inputs(pattern: str):
    """Expand a glob-ish CLI argument into a sorted path list."""
    p = Path(pattern)
    if _GLOB_CHARS.search(pattern):
        return sorted(p.parent.glob(p.name))
    return [p]
