"""Binary spike streams: the bit-packed tensor type and its file codec.

A spike stream is a K x H x W tensor of {0, 1}. On disk and in memory it is
bit-packed frame-major, then row-major with x fastest; each row is padded to
a whole number of bytes and bits are stored LSB-first within a byte (bit 0 of
a byte is the lowest x it covers). The ``.spk`` container prepends a small
little-endian header so files are self-describing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, TruncatedError
from .image import IntensityImage

MAGIC = b"SPK1"
VERSION = 1

# magic, version, h, w, k, theta_milli, 16 reserved zero bytes
_HEADER = struct.Struct("<4sHHHII16s")
HEADER_SIZE = _HEADER.size


def row_bytes(w: int) -> int:
    """Bytes per packed row: ceil(w / 8)."""
    return (w + 7) // 8


@dataclass(frozen=True, eq=False)
class SpikeStream:
    """Immutable bit-packed spike tensor with k frames of h x w pixels."""

    k: int
    h: int
    w: int
    bits: bytes

    def __post_init__(self):
        if self.k < 1 or self.h < 1 or self.w < 1:
            raise FormatError(f"k, h, w must be positive, got ({self.k}, {self.h}, {self.w})")
        expect = self.k * self.h * row_bytes(self.w)
        if len(self.bits) != expect:
            raise FormatError(f"payload is {len(self.bits)} bytes, expected {expect}")
        if self.w % 8:
            # padding bits beyond w in each row byte must be zero
            packed = np.frombuffer(self.bits, dtype=np.uint8)
            last = packed.reshape(self.k * self.h, row_bytes(self.w))[:, -1]
            if np.any(last >> (self.w % 8)):
                raise FormatError("nonzero padding bits in packed rows")

    @classmethod
    def from_dense(cls, dense) -> "SpikeStream":
        """Pack a k x h x w array of 0/1 values."""
        arr = np.asarray(dense)
        if arr.ndim != 3:
            raise FormatError(f"expected a 3-D array, got shape {arr.shape}")
        arr = (arr != 0).astype(np.uint8)
        packed = np.packbits(arr, axis=-1, bitorder="little")
        return cls(arr.shape[0], arr.shape[1], arr.shape[2], packed.tobytes())

    def to_dense(self) -> np.ndarray:
        """Unpack to a k x h x w uint8 array of 0/1."""
        packed = np.frombuffer(self.bits, dtype=np.uint8)
        packed = packed.reshape(self.k, self.h, row_bytes(self.w))
        return np.unpackbits(packed, axis=-1, count=self.w, bitorder="little")

    def get_bit(self, t: int, y: int, x: int) -> int:
        """Read one spike bit; indices must be in range."""
        if not (0 <= t < self.k and 0 <= y < self.h and 0 <= x < self.w):
            raise IndexError(f"index ({t}, {y}, {x}) out of range for ({self.k}, {self.h}, {self.w})")
        byte = self.bits[(t * self.h + y) * row_bytes(self.w) + x // 8]
        return (byte >> (x % 8)) & 1

    def count_spikes(self) -> int:
        """Total number of 1 bits in the stream."""
        return int(self.to_dense().sum())


def firing_rate(stream: SpikeStream) -> IntensityImage:
    """Per-pixel spike count divided by the frame count; always in [0, 1]."""
    counts = stream.to_dense().sum(axis=0, dtype=np.int64)
    return IntensityImage(counts / stream.k)


def encode(stream: SpikeStream, theta: float = 1.0) -> bytes:
    """Serialize to the .spk wire format: header followed by the bit payload.

    theta is stored quantized to milli-units in the header.
    """
    header = _HEADER.pack(
        MAGIC, VERSION, stream.h, stream.w, stream.k,
        int(round(theta * 1000.0)), b"\x00" * 16,
    )
    return header + stream.bits


def decode(data: bytes) -> tuple[SpikeStream, float]:
    """Inverse of :func:`encode`; returns the stream and its threshold."""
    if len(data) < HEADER_SIZE:
        raise TruncatedError(f"data is {len(data)} bytes, header alone needs {HEADER_SIZE}")
    magic, _version, h, w, k, theta_milli, _reserved = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if h < 1 or w < 1 or k < 1:
        raise FormatError(f"header claims non-positive dimensions ({k}, {h}, {w})")
    expect = k * h * row_bytes(w)
    payload = data[HEADER_SIZE:]
    if len(payload) < expect:
        raise TruncatedError(f"payload is {len(payload)} bytes, header claims {expect}")
    if len(payload) > expect:
        raise FormatError(f"{len(payload) - expect} trailing bytes after payload")
    return SpikeStream(k, h, w, payload), theta_milli / 1000.0


def write_spk(path, stream: SpikeStream, theta: float = 1.0) -> None:
    with open(path, "wb") as f:
        f.write(encode(stream, theta))


def read_spk(path) -> tuple[SpikeStream, float]:
    with open(path, "rb") as f:
        return decode(f.read())


def load_dat(data: bytes, h: int, w: int, k: int | None = None, flipud: bool = False) -> SpikeStream:
    """Import a headerless raw spike dump.

    Raw dumps pack each frame as h*w contiguous bits (row-major, x fastest,
    LSB-first), padded to a whole byte per frame. Dimensions come from the
    caller; when ``k`` is omitted it is inferred from the data length.
    ``flipud`` undoes the vertical inversion some cameras apply.
    """
    frame_bytes = (h * w + 7) // 8
    if k is None:
        k, rem = divmod(len(data), frame_bytes)
        if k < 1 or rem:
            raise TruncatedError(f"{len(data)} bytes is not a whole number of {frame_bytes}-byte frames")
    elif len(data) != k * frame_bytes:
        raise TruncatedError(f"expected {k * frame_bytes} bytes for k={k}, got {len(data)}")
    packed = np.frombuffer(data, dtype=np.uint8).reshape(k, frame_bytes)
    dense = np.unpackbits(packed, axis=-1, count=h * w, bitorder="little").reshape(k, h, w)
    if flipud:
        dense = dense[:, ::-1, :]
    return SpikeStream.from_dense(dense)
