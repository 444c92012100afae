"""Readers for the dataset hand-off formats.

The trainer consumes the reconstruction toolkit's exported artifacts:
``manifest.json``, bit-packed ``.spk`` spike files, ``.vox`` voxel tensors
with JSON sidecars, and 8-bit grayscale PNGs. Coarse targets are computed
here directly from the spike files (inverse bracketing interval around the
mid frame), so no other package needs to be importable at train time.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError

_SPK_HEADER = struct.Struct("<4sHHHII16s")
_SPK_MAGIC = b"SPK1"


@dataclass
class ClipRecord:
    clip_id: str
    class_label: str
    spike_path: Path
    voxel_path: Path
    hq_path: Path | None
    lq_path: Path | None
    niqe_scores: dict
    chosen_method: str


def read_spike_file(path) -> tuple[np.ndarray, float]:
    """Decode a .spk file to a dense (k, h, w) array of 0/1 and its threshold.

    Layout: 34-byte little-endian header (magic "SPK1", version, h, w, k,
    threshold x 1000, 16 reserved bytes), then one bit per (t, y, x),
    frame-major, rows padded to whole bytes, LSB-first.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _SPK_HEADER.size:
        raise DataError(f"{path}: too short for a spike file header")
    magic, _version, h, w, k, theta_milli, _reserved = _SPK_HEADER.unpack_from(raw)
    if magic != _SPK_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    row_bytes = (w + 7) // 8
    payload = raw[_SPK_HEADER.size:]
    if len(payload) != k * h * row_bytes:
        raise DataError(f"{path}: payload is {len(payload)} bytes, header claims {k * h * row_bytes}")
    packed = np.frombuffer(payload, dtype=np.uint8).reshape(k, h, row_bytes)
    dense = np.unpackbits(packed, axis=-1, count=w, bitorder="little")
    return dense, theta_milli / 1000.0


def tfi_image(dense: np.ndarray, theta: float = 1.0) -> np.ndarray:
    """Inverse inter-spike interval around the mid frame, clamped to [0, 1].

    The interval brackets frame k // 2; a spike exactly at the mid frame
    counts as the earlier neighbor, and pixels without a bracketing pair
    render as 0.
    """
    k = dense.shape[0]
    mid = k // 2
    back = dense[mid::-1]
    has_prev = back.any(axis=0)
    t_prev = mid - back.argmax(axis=0)
    fwd = dense[mid + 1:]
    if fwd.shape[0]:
        has_next = fwd.any(axis=0)
        t_next = mid + 1 + fwd.argmax(axis=0)
    else:
        has_next = np.zeros_like(has_prev)
        t_next = np.zeros_like(t_prev)
    isi = np.where(has_prev & has_next, (t_next - t_prev).astype(np.float64), np.inf)
    with np.errstate(divide="ignore"):
        values = np.where(np.isfinite(isi), theta / isi, 0.0)
    return np.clip(values, 0.0, 1.0)


def read_voxels(path) -> np.ndarray:
    """Load a .vox tensor via its JSON sidecar; returns float32 (c, h, w)."""
    sidecar = Path(str(path) + ".json")
    try:
        meta = json.loads(sidecar.read_text())
    except OSError as exc:
        raise DataError(f"{path}: missing voxel sidecar: {exc}") from exc
    if meta.get("dtype") != "f32le":
        raise DataError(f"{path}: unsupported voxel dtype {meta.get('dtype')!r}")
    c, h, w = int(meta["c"]), int(meta["h"]), int(meta["w"])
    raw = Path(path).read_bytes()
    if len(raw) != 4 * c * h * w:
        raise DataError(f"{path}: payload is {len(raw)} bytes, sidecar claims {4 * c * h * w}")
    return np.frombuffer(raw, dtype="<f4").reshape(c, h, w).copy()


def load_image(path) -> np.ndarray:
    """Grayscale PNG to float (h, w) in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float32) / 255.0


def save_image(values: np.ndarray, path) -> None:
    data = np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def load_manifest(path) -> list[ClipRecord]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    root = path.parent
    records = []
    for item in data["items"]:
        records.append(ClipRecord(
            clip_id=item["clip_id"],
            class_label=item["class_label"],
            spike_path=root / item["spike_path"],
            voxel_path=root / item["voxel_path"],
            hq_path=root / item["hq_path"] if item.get("hq_path") else None,
            lq_path=root / item["lq_path"] if item.get("lq_path") else None,
            niqe_scores=dict(item.get("niqe_scores", {})),
            chosen_method=item.get("chosen_method", ""),
        ))
    return records


def update_manifest_lq(path, lq_paths: dict[str, str]) -> None:
    """Fill lq_path slots (relative paths keyed by clip_id); atomic rewrite."""
    path = Path(path)
    data = json.loads(path.read_text())
    for item in data["items"]:
        if item["clip_id"] in lq_paths:
            item["lq_path"] = lq_paths[item["clip_id"]]
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def class_names(records: list[ClipRecord]) -> list[str]:
    return sorted({r.class_label for r in records})
