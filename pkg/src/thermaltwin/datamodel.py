"""Frame/matrix types, THERM1 dataset I/O, and time regularization.

Pixels are stored as float32 (camera precision is far below that); all
numerical work downstream happens in float64.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    MalformedHeader,
    NonFinitePixel,
    NonMonotonicTimestamps,
    TooFewFrames,
)

THERM1_MAGIC = b"THERM1\x00\x00"


@dataclass(frozen=True)
class Frame:
    """A single timestamped temperature image, row-major float32 values."""

    width: int
    height: int
    t: float
    values: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimensionMismatch("width and height must be >= 1")
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.size != self.width * self.height:
            raise DimensionMismatch(
                f"expected {self.width * self.height} values, got {vals.size}"
            )
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise NonFinitePixel(int(bad[0]))
        object.__setattr__(self, "values", vals.reshape(-1))

    @property
    def n(self) -> int:
        return self.width * self.height

    def image(self) -> np.ndarray:
        """Values reshaped to (height, width)."""
        return self.values.reshape(self.height, self.width)


@dataclass(frozen=True)
class SnapshotMatrix:
    """Column-stacked frames: data[:, j] is frame j, in float64."""

    n: int
    k: int
    data: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        ts = np.asarray(self.timestamps, dtype=np.float64)
        if data.shape != (self.n, self.k):
            raise DimensionMismatch(f"data shape {data.shape} != ({self.n}, {self.k})")
        if ts.shape != (self.k,):
            raise DimensionMismatch("one timestamp per column required")
        if self.k > 1 and np.any(np.diff(ts) <= 0):
            raise NonMonotonicTimestamps("timestamps must be strictly increasing")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "timestamps", ts)

    @property
    def dt(self) -> float:
        if self.k < 2:
            raise TooFewFrames("dt undefined for fewer than 2 columns")
        return float(self.timestamps[1] - self.timestamps[0])


@dataclass(frozen=True)
class RunMeta:
    voltage: float
    phase: str  # "heating" | "cooling"
    label: str = ""

    def __post_init__(self):
        if self.voltage < 0:
            raise DimensionMismatch("voltage must be >= 0")


@dataclass(frozen=True)
class Dataset:
    snapshots: SnapshotMatrix
    meta: RunMeta
    width: int = 0
    height: int = 0

    def __post_init__(self):
        if self.width and self.height and self.width * self.height != self.snapshots.n:
            raise DimensionMismatch("width*height must equal snapshot row count")


def stack(frames) -> SnapshotMatrix:
    """Column-stack frames into a SnapshotMatrix (float64 working copy)."""
    frames = list(frames)
    if not frames:
        raise TooFewFrames("cannot stack zero frames")
    n = frames[0].n
    for f in frames:
        if f.n != n or f.width != frames[0].width:
            raise DimensionMismatch("all frames must share dimensions")
    data = np.empty((n, len(frames)), dtype=np.float64)
    for j, f in enumerate(frames):
        data[:, j] = f.values
    ts = np.array([f.t for f in frames], dtype=np.float64)
    return SnapshotMatrix(n=n, k=len(frames), data=data, timestamps=ts)


def unstack(matrix: SnapshotMatrix, width: int, height: int):
    """Inverse of stack; returns a list of Frames."""
    if width * height != matrix.n:
        raise DimensionMismatch(f"{width}x{height} != {matrix.n} rows")
    return [
        Frame(width=width, height=height, t=float(matrix.timestamps[j]),
              values=matrix.data[:, j].astype(np.float32))
        for j in range(matrix.k)
    ]


def regularize_time(frames, dt: float) -> SnapshotMatrix:
    """Resample frames onto a uniform grid t0, t0+dt, ... by per-pixel
    linear interpolation. No extrapolation: the grid stops at the last
    input timestamp (trailing partial interval dropped)."""
    frames = list(frames)
    if len(frames) < 2:
        raise TooFewFrames("need at least 2 frames to interpolate")
    if dt <= 0:
        raise DimensionMismatch("dt must be positive")
    ts = np.array([f.t for f in frames], dtype=np.float64)
    if np.any(np.diff(ts) <= 0):
        raise NonMonotonicTimestamps("frame timestamps must be strictly increasing")

    t0, t_last = ts[0], ts[-1]
    n_grid = int(np.floor((t_last - t0) / dt + 1e-12)) + 1
    grid = t0 + dt * np.arange(n_grid)

    raw = np.empty((frames[0].n, len(frames)), dtype=np.float64)
    for j, f in enumerate(frames):
        if f.n != frames[0].n:
            raise DimensionMismatch("all frames must share dimensions")
        raw[:, j] = f.values

    # Bracketing indices and linear weights per grid point, vectorized
    # across pixels.
    hi = np.searchsorted(ts, grid, side="left")
    hi = np.clip(hi, 1, len(ts) - 1)
    lo = hi - 1
    w = (grid - ts[lo]) / (ts[hi] - ts[lo])
    w = np.clip(w, 0.0, 1.0)
    out = raw[:, lo] * (1.0 - w) + raw[:, hi] * w

    return SnapshotMatrix(n=frames[0].n, k=n_grid, data=out, timestamps=grid)


_HEADER = struct.Struct("<8sIIII")


def save_dataset(path, dataset: Dataset, width: int | None = None,
                 height: int | None = None) -> None:
    """Write a Dataset in the THERM1 binary format (little-endian)."""
    w = width or dataset.width
    h = height or dataset.height
    if not w or not h or w * h != dataset.snapshots.n:
        raise DimensionMismatch("valid width/height required to serialize")
    m = dataset.snapshots
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(THERM1_MAGIC, w, h, m.k, 0))
        fh.write(m.timestamps.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(m.data.T).astype("<f4").tobytes())


def load_dataset(path, meta: RunMeta | None = None) -> Dataset:
    """Read a THERM1 file back into a Dataset; rejects NaN/Inf pixels."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise MalformedHeader("file too short for THERM1 header")
        magic, w, h, k, flags = _HEADER.unpack(head)
        if magic != THERM1_MAGIC:
            raise MalformedHeader(f"bad magic {magic!r}")
        if flags != 0:
            raise MalformedHeader(f"unsupported flags {flags}")
        if w < 1 or h < 1 or k < 1:
            raise MalformedHeader("non-positive dimensions in header")
        ts_bytes = fh.read(8 * k)
        if len(ts_bytes) != 8 * k:
            raise DimensionMismatch("truncated timestamp block")
        ts = np.frombuffer(ts_bytes, dtype="<f8")
        n = w * h
        px_bytes = fh.read(4 * n * k)
        if len(px_bytes) != 4 * n * k:
            raise DimensionMismatch("truncated pixel payload")
        if fh.read(1):
            raise DimensionMismatch("trailing bytes after declared payload")
        pixels = np.frombuffer(px_bytes, dtype="<f4").reshape(k, n)
    bad = np.flatnonzero(~np.isfinite(pixels))
    if bad.size:
        raise NonFinitePixel(int(bad[0] % n))
    data = pixels.T.astype(np.float64)
    snap = SnapshotMatrix(n=n, k=k, data=data, timestamps=ts.copy())
    return Dataset(snapshots=snap, meta=meta or RunMeta(0.0, "heating"),
                   width=w, height=h)


def export_csv(path, dataset: Dataset) -> None:
    """Debug export: one row per frame, timestamp then pixel values."""
    m = dataset.snapshots
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for j in range(m.k):
            writer.writerow([repr(float(m.timestamps[j]))]
                            + [repr(float(v)) for v in m.data[:, j]])
