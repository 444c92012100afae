"""Model-based reconstruction from spike streams.

Two classic estimators: a virtual-exposure-window average (tfp) and the
inverse inter-spike interval around the stream's mid time (tfi), plus the
temporal binning (voxelize) used to shorten network inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParameterError, TruncatedError
from .image import IntensityImage
from .stream import SpikeStream


@dataclass(frozen=True, eq=False)
class IsiMap:
    """Per-pixel inter-spike interval in frames; +inf where no bracketing
    spike pair exists."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ParameterError(f"expected a 2-D array, got shape {arr.shape}")
        finite = arr[np.isfinite(arr)]
        if finite.size and finite.min() < 1:
            raise ParameterError("finite intervals must be >= 1 frame")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """c temporal bins of per-pixel spike counts."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 3:
            raise ParameterError(f"expected a 3-D array, got shape {arr.shape}")
        if arr.min() < 0:
            raise ParameterError("spike counts cannot be negative")
        arr = arr.astype(np.int32, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def c(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> int:
        return self.values.shape[1]

    @property
    def w(self) -> int:
        return self.values.shape[2]


def tfp(stream: SpikeStream, window: int, theta: float = 1.0) -> IntensityImage:
    """Average spike count over a window centered at the stream's mid time.

    The window covers [m - window//2, m - window//2 + window) with
    m = k // 2; the result is theta * count / window clamped to [0, 1].
    """
    if not 1 <= window <= stream.k:
        raise ParameterError(f"window must be in [1, {stream.k}], got {window}")
    start = stream.k // 2 - window // 2
    counts = stream.to_dense()[start:start + window].sum(axis=0, dtype=np.int64)
    return IntensityImage.from_array(theta * counts / window)


def isi_map(stream: SpikeStream, t_mid: int) -> IsiMap:
    """Bracketing inter-spike interval around t_mid for every pixel.

    The previous spike is the latest at or before t_mid (a spike exactly at
    t_mid counts as the previous one); the next spike is the earliest after
    t_mid. Pixels missing either side map to +inf.
    """
    if not 0 <= t_mid < stream.k:
        raise IndexError(f"t_mid {t_mid} out of range for k={stream.k}")
    dense = stream.to_dense()

    back = dense[t_mid::-1]
    has_prev = back.any(axis=0)
    t_prev = t_mid - back.argmax(axis=0)

    fwd = dense[t_mid + 1:]
    if fwd.shape[0]:
        has_next = fwd.any(axis=0)
        t_next = t_mid + 1 + fwd.argmax(axis=0)
    else:
        has_next = np.zeros(has_prev.shape, dtype=bool)
        t_next = np.zeros(has_prev.shape, dtype=np.int64)

    values = np.where(has_prev & has_next, (t_next - t_prev).astype(np.float64), np.inf)
    return IsiMap(values)


def tfi(stream: SpikeStream, theta: float = 1.0) -> IntensityImage:
    """Reconstruct intensity as theta / ISI around the mid time (k // 2).

    Pixels with no bracketing spike pair render as 0.
    """
    if stream.k < 2:
        raise ParameterError(f"tfi needs k >= 2, got k={stream.k}")
    isi = isi_map(stream, stream.k // 2).values
    with np.errstate(divide="ignore"):
        values = np.where(np.isfinite(isi), theta / isi, 0.0)
    return IntensityImage.from_array(values)


def voxelize(stream: SpikeStream, bins: int) -> VoxelGrid:
    """Sum spike frames into ``bins`` equal temporal bins.

    Counts are summed, not averaged, so the total spike count is conserved.
    """
    if bins < 1 or stream.k % bins:
        raise ParameterError(f"bins must divide k={stream.k}, got {bins}")
    width = stream.k // bins
    dense = stream.to_dense()
    values = dense.reshape(bins, width, stream.h, stream.w).sum(axis=1, dtype=np.int32)
    return VoxelGrid(values)


def save_voxels(grid: VoxelGrid, path) -> None:
    """Write a voxel grid as flat little-endian float32 in c, h, w order,
    with a JSON sidecar at ``<path>.json`` describing the shape."""
    with open(path, "wb") as f:
        f.write(grid.values.astype("<f4").tobytes())
    sidecar = {"c": grid.c, "h": grid.h, "w": grid.w, "dtype": "f32le"}
    with open(str(path) + ".json", "w") as f:
        json.dump(sidecar, f, sort_keys=True)
        f.write("\n")


def load_voxels(path) -> VoxelGrid:
    """Read a voxel grid written by :func:`save_voxels`."""
    with open(str(path) + ".json") as f:
        meta = json.load(f)
    if meta.get("dtype") != "f32le":
        raise FormatError(f"unsupported voxel dtype {meta.get('dtype')!r}")
    c, h, w = int(meta["c"]), int(meta["h"]), int(meta["w"])
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) != 4 * c * h * w:
        raise TruncatedError(f"voxel payload is {len(raw)} bytes, sidecar claims {4 * c * h * w}")
    values = np.frombuffer(raw, dtype="<f4").reshape(c, h, w)
    return VoxelGrid(np.round(values).astype(np.int32))
