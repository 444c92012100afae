import json
import shutil
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cliptrain import TinyEncoderPair

DATASET_SCRIPT = Path(__file__).resolve().parents[2] / "scripts" / "make_shape_dataset.py"

SPK_HEADER = struct.Struct("<4sHHHII16s")


def build_dataset(out_dir, train, test, hq, size, seed, light_scale=0.2):
    cmd = [sys.executable, str(DATASET_SCRIPT), "--out", str(out_dir),
           "--train", str(train), "--test", str(test), "--hq", str(hq),
           "--size", str(size), "--light-scale", str(light_scale), "--seed", str(seed)]
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    return Path(out_dir)


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory):
    """Small dataset from the reconstruction toolkit's exporter; read-only."""
    out = tmp_path_factory.mktemp("mini") / "ds"
    return build_dataset(out, train=10, test=5, hq=6, size=32, seed=3)


@pytest.fixture()
def mini_copy(mini_dataset, tmp_path):
    """Private mutable copy for tests that write lq images or manifests."""
    dst = tmp_path / "ds"
    shutil.copytree(mini_dataset, dst)
    return dst


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """Acceptance-scale dataset: 200 train / 50 test low-light clips plus a
    normal-light hq split."""
    out = tmp_path_factory.mktemp("toy") / "ds"
    return build_dataset(out, train=200, test=50, hq=100, size=48, seed=7)


@pytest.fixture(scope="session")
def encoders():
    return TinyEncoderPair(seed=0)


def write_spk(path, dense: np.ndarray, theta: float = 1.0) -> None:
    """Minimal spike-file writer for handcrafted test inputs."""
    k, h, w = dense.shape
    header = SPK_HEADER.pack(b"SPK1", 1, h, w, k, int(round(theta * 1000)), b"\x00" * 16)
    payload = np.packbits(dense.astype(np.uint8), axis=-1, bitorder="little").tobytes()
    Path(path).write_bytes(header + payload)


def write_vox(path, values: np.ndarray) -> None:
    c, h, w = values.shape
    Path(path).write_bytes(values.astype("<f4").tobytes())
    Path(str(path) + ".json").write_text(
        json.dumps({"c": c, "h": h, "w": w, "dtype": "f32le"}) + "\n"
    )


def write_manifest(path, items) -> None:
    Path(path).write_text(json.dumps({"items": items}, indent=2) + "\n")


def make_flat_dataset(root: Path, n_clips: int = 4, c: int = 50, side: int = 16,
                      label: str = "circle") -> Path:
    """Dataset of spikeless clips: zero voxels and all-zero reconstruction
    targets, handy for overfit oracles."""
    for sub in ("spikes", "voxels", "hq", "lq"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    items = []
    for i in range(n_clips):
        clip = f"clip_{i:04d}"
        write_spk(root / "spikes" / f"{clip}.spk", np.zeros((c * 4, side, side), dtype=np.uint8))
        write_vox(root / "voxels" / f"{clip}.vox", np.zeros((c, side, side), dtype=np.float32))
        items.append({
            "clip_id": clip, "class_label": label,
            "spike_path": f"spikes/{clip}.spk", "voxel_path": f"voxels/{clip}.vox",
            "hq_path": None, "lq_path": None, "niqe_scores": {}, "chosen_method": "",
        })
    write_manifest(root / "manifest.json", items)
    return root / "manifest.json"
