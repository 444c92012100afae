"""High-quality image selection and dataset assembly.

Runs a registry of reconstructors on each spike clip, scores every candidate
with the blind quality model, keeps the lowest-scoring image, and writes a
manifest describing the exported dataset. Low-quality slots are reserved for
a downstream trainer to fill in.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .errors import ParameterError, PipelineError
from .image import IntensityImage, load_png, save_png
from .niqe import NiqeModel, niqe_score
from .reconstruct import tfi, tfp, voxelize, save_voxels
from .stream import SpikeStream, write_spk

Reconstructor = Callable[[SpikeStream], IntensityImage]


@dataclass(frozen=True)
class ReconRegistry:
    """Ordered, uniquely named reconstructors; order breaks score ties."""

    entries: tuple[tuple[str, Reconstructor], ...]

    def __post_init__(self):
        names = [name for name, _ in self.entries]
        if not names:
            raise ParameterError("registry must contain at least one entry")
        if len(set(names)) != len(names):
            raise ParameterError(f"duplicate registry names in {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)


def default_registry(theta: float = 1.0, window: int | None = None) -> ReconRegistry:
    """The built-in pair: windowed average and inverse-interval estimators.

    ``window`` defaults to the full stream length.
    """
    def run_tfp(stream: SpikeStream) -> IntensityImage:
        return tfp(stream, stream.k if window is None else window, theta)

    def run_tfi(stream: SpikeStream) -> IntensityImage:
        return tfi(stream, theta)

    return ReconRegistry((("tfp", run_tfp), ("tfi", run_tfi)))


def external_image_entry(name: str, path) -> tuple[str, Reconstructor]:
    """Registry entry that ignores the stream and loads a precomputed image.

    This is how reconstructions produced outside this package compete in the
    quality selection.
    """
    def load(_stream: SpikeStream) -> IntensityImage:
        return load_png(path)

    return name, load


def select_hq(stream: SpikeStream, registry: ReconRegistry, model: NiqeModel | None = None,
              scorer: Callable[[IntensityImage], float] | None = None,
              ) -> tuple[IntensityImage, str, dict[str, float]]:
    """Run every reconstructor and keep the image with the lowest score.

    Scores come from the quality model unless ``scorer`` is injected. Ties go
    to the earliest registry entry. Methods that fail are skipped; if all
    fail a PipelineError carries the per-method causes.
    """
    if scorer is None:
        if model is None:
            raise ParameterError("either a quality model or a scorer is required")
        def scorer(image: IntensityImage) -> float:
            return niqe_score(image, model)

    causes: dict[str, Exception] = {}
    best: tuple[IntensityImage, str] | None = None
    best_score = None
    scores: dict[str, float] = {}
    for name, recon in registry.entries:
        try:
            image = recon(stream)
            score = float(scorer(image))
            if not (score == score):  # NaN never wins argmin; treat as failure
                raise PipelineError(f"scorer returned NaN for {name!r}")
        except Exception as exc:  # noqa: BLE001 - per-method causes are the contract
            causes[name] = exc
            continue
        scores[name] = score
        if best_score is None or score < best_score:
            best, best_score = (image, name), score
    if best is None:
        raise PipelineError("every reconstructor failed", causes)
    return best[0], best[1], scores


@dataclass(frozen=True)
class DatasetManifest:
    """Exported dataset description; paths are relative to the manifest file."""

    items: tuple[dict, ...] = field(default_factory=tuple)

    def to_json(self) -> str:
        return json.dumps({"items": list(self.items)}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        data = json.loads(text)
        return cls(tuple(data["items"]))


def load_manifest(path) -> DatasetManifest:
    with open(path) as f:
        return DatasetManifest.from_json(f.read())


def _process_clip(index: int, stream: SpikeStream, label: str, registry: ReconRegistry,
                  model: NiqeModel, out: Path, bins: int, theta: float) -> dict:
    clip = f"clip_{index:04d}"
    spike_rel = f"spikes/{clip}.spk"
    voxel_rel = f"voxels/{clip}.vox"
    hq_rel = f"hq/{clip}.png"
    write_spk(out / spike_rel, stream, theta)
    save_voxels(voxelize(stream, bins), out / voxel_rel)
    hq_image, chosen, scores = select_hq(stream, registry, model)
    save_png(hq_image, out / hq_rel)
    return {
        "clip_id": clip,
        "class_label": label,
        "spike_path": spike_rel,
        "voxel_path": voxel_rel,
        "hq_path": hq_rel,
        "lq_path": None,
        "niqe_scores": {name: round(score, 6) for name, score in scores.items()},
        "chosen_method": chosen,
    }


def build_dataset(clips: Sequence[tuple[SpikeStream, str]], registry: ReconRegistry,
                  model: NiqeModel, out_dir, bins: int = 50, theta: float = 1.0,
                  workers: int = 1) -> DatasetManifest:
    """Export spike files, voxel tensors, and selected HQ images per clip.

    Clips are independent and may be processed by ``workers`` threads; the
    manifest is assembled in clip order and written atomically, so a failed
    run never leaves a partial manifest behind.
    """
    out = Path(out_dir)
    try:
        for sub in ("spikes", "voxels", "hq", "lq"):
            (out / sub).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PipelineError(f"cannot create output directories under {out}: {exc}") from exc

    def work(job: tuple[int, SpikeStream, str]) -> dict:
        index, stream, label = job
        return _process_clip(index, stream, label, registry, model, out, bins, theta)

    jobs = [(i, stream, label) for i, (stream, label) in enumerate(clips)]
    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                items = list(pool.map(work, jobs))
        else:
            items = [work(job) for job in jobs]
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001 - surfaced with the failing clip attached
        raise PipelineError(f"clip processing failed: {exc}", {"cause": exc}) from exc

    manifest = DatasetManifest(tuple(items))
    tmp = out / "manifest.json.tmp"
    with open(tmp, "w") as f:
        f.write(manifest.to_json())
    os.replace(tmp, out / "manifest.json")
    return manifest
