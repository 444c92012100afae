"""Three-stage training: coarse reconstruction, prompt learning, refinement.

Stage 1 fits the reconstruction network to inverse-interval targets and
fills the dataset's low-quality slots with its outputs. Stage 2 learns the
quality prompt pair from the high/low-quality image sets. Stage 3 fine-tunes
the network under class supervision plus prompt alignment. Only the stage's
own parameters ever receive gradients; the encoders stay frozen throughout.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import (
    load_image,
    load_manifest,
    read_spike_file,
    read_voxels,
    save_image,
    tfi_image,
    update_manifest_lq,
)
from .encoders import unit
from .errors import DataError
from .losses import class_loss, prompt_init_loss, prompt_loss
from .lrn import ReconNet
from .prompts import ClassPromptBank, PromptPair

TOTAL_EPOCHS = 25


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the full 25-epoch schedule.

    The stage split is (coarse, prompt, fine) and must sum to 25; stage
    functions accept an explicit epoch override for smoke runs. The prompt
    stage optimizes a different parameter group and gets its own learning
    rate.
    """

    lr: float = 4e-5
    prompt_lr: float = 3e-3
    epochs: tuple[int, int, int] = (5, 1, 19)
    prompt_weight: float = 100.0
    tau: float = 0.07
    batch: int = 16
    seed: int = 0
    n_ctx: int = 16
    log_prompt_loss: bool = False
    grad_clip: float = 1.0

    def __post_init__(self):
        if sum(self.epochs) != TOTAL_EPOCHS or any(e < 1 for e in self.epochs):
            raise ValueError(f"stage epochs {self.epochs} must be positive and sum to {TOTAL_EPOCHS}")
        if self.lr <= 0 or self.prompt_lr <= 0 or self.tau <= 0 or self.batch < 1:
            raise ValueError("lr, prompt_lr, tau must be positive and batch >= 1")
        if self.grad_clip < 0:
            raise ValueError("grad_clip must be >= 0 (0 disables clipping)")


def seed_everything(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


def state_checksum(module: nn.Module) -> str:
    """Digest of every parameter and buffer; detects any state change."""
    digest = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


class TrainSession:
    """Output directory with a JSON-lines metrics log and checkpoints."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.metrics_path = self.out_dir / "metrics.jsonl"

    def log(self, **fields) -> None:
        fields.setdefault("time", round(time.time(), 3))
        with open(self.metrics_path, "a") as f:
            f.write(json.dumps(fields, sort_keys=True) + "\n")

    def checkpoint(self, name: str, module: nn.Module) -> Path:
        path = self.out_dir / f"{name}.pt"
        torch.save(module.state_dict(), path)
        return path


def _batches(n: int, batch: int, gen: torch.Generator):
    perm = torch.randperm(n, generator=gen)
    for start in range(0, n, batch):
        yield perm[start:start + batch]


def _load_voxel_tensor(records) -> torch.Tensor:
    grids = [read_voxels(r.voxel_path) for r in records]
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise DataError(f"inconsistent voxel shapes in dataset: {sorted(shapes)}")
    return torch.from_numpy(np.stack(grids))


def _encode_reconstructions(images: torch.Tensor, encoders) -> torch.Tensor:
    return unit(encoders.encode_image(encoders.adapt(images)))


def coarse_train(manifest_path, cfg: TrainConfig, *, session: TrainSession | None = None,
                 epochs: int | None = None) -> ReconNet:
    """Stage 1: map voxels to the inverse-interval reconstruction.

    Trains with mean absolute error, then writes the network's outputs into
    the dataset's lq slots (files under lq/, manifest updated in place).
    """
    records = load_manifest(manifest_path)
    if not records:
        raise DataError("empty training manifest")
    voxels = _load_voxel_tensor(records)
    targets = []
    for r in records:
        dense, theta = read_spike_file(r.spike_path)
        targets.append(tfi_image(dense, theta))
    targets_t = torch.from_numpy(np.stack(targets).astype(np.float32)).unsqueeze(1)
    if targets_t.shape[-2:] != voxels.shape[-2:]:
        raise DataError(
            f"target size {tuple(targets_t.shape[-2:])} does not match voxel size "
            f"{tuple(voxels.shape[-2:])}"
        )

    seed_everything(cfg.seed)
    lrn = ReconNet()
    if voxels.shape[1] != lrn.in_channels:
        raise DataError(f"voxel tensors have {voxels.shape[1]} channels, the network expects "
                        f"{lrn.in_channels}")
    optimizer = torch.optim.Adam(lrn.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed)
    n_epochs = cfg.epochs[0] if epochs is None else epochs

    for epoch in range(n_epochs):
        losses = []
        for idx in _batches(len(records), cfg.batch, gen):
            optimizer.zero_grad()
            out = lrn(voxels[idx])
            loss = torch.mean(torch.abs(out - targets_t[idx]))
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        if session:
            session.log(stage="coarse", epoch=epoch, loss=float(np.mean(losses)))

    _write_lq_images(lrn, records, voxels, manifest_path)
    if session:
        session.checkpoint("lrn_coarse", lrn)
    return lrn


def _write_lq_images(lrn: ReconNet, records, voxels: torch.Tensor, manifest_path) -> None:
    lq_dir = Path(manifest_path).parent / "lq"
    lq_dir.mkdir(exist_ok=True)
    updates = {}
    with torch.no_grad():
        for start in range(0, len(records), 32):
            out = lrn(voxels[start:start + 32]).squeeze(1).numpy()
            for offset, image in enumerate(out):
                record = records[start + offset]
                rel = f"lq/{record.clip_id}.png"
                save_image(image, Path(manifest_path).parent / rel)
                updates[record.clip_id] = rel
    update_manifest_lq(manifest_path, updates)


def _image_stack(images) -> torch.Tensor:
    arrays = [np.asarray(img, dtype=np.float32) for img in images]
    return torch.from_numpy(np.stack(arrays)).unsqueeze(1)


def optimize_prompts(hq_images, lq_images, cfg: TrainConfig, encoders, *,
                     session: TrainSession | None = None,
                     epochs: int | None = None) -> PromptPair:
    """Stage 2: learn the quality prompt pair; encoders stay frozen.

    Image features are precomputed once since nothing upstream of the
    prompts changes. One epoch of Adam on the prompt embeddings alone.
    """
    hq_images, lq_images = list(hq_images), list(lq_images)
    if not hq_images or not lq_images:
        raise DataError("both the hq and lq image sets must be non-empty")
    with torch.no_grad():
        hq_feats = _encode_reconstructions(_image_stack(hq_images), encoders)
        lq_feats = _encode_reconstructions(_image_stack(lq_images), encoders)
    feats = torch.cat([hq_feats, lq_feats])
    labels = torch.cat([torch.ones(len(hq_images), dtype=torch.long),
                        torch.zeros(len(lq_images), dtype=torch.long)])

    seed_everything(cfg.seed + 1)
    pair = PromptPair(encoders.token_dim, cfg.n_ctx, seed=cfg.seed)
    optimizer = torch.optim.Adam(pair.parameters(), lr=cfg.prompt_lr)
    gen = torch.Generator().manual_seed(cfg.seed + 1)
    n_epochs = cfg.epochs[1] if epochs is None else epochs

    def dataset_loss() -> float:
        with torch.no_grad():
            hq_feat, lq_feat = pair.encode(encoders)
            return float(prompt_init_loss(feats, hq_feat, lq_feat, labels,
                                          scale=getattr(encoders, "logit_scale", 1.0)))

    scale = getattr(encoders, "logit_scale", 1.0)
    initial = dataset_loss()
    for epoch in range(n_epochs):
        losses = []
        for idx in _batches(len(feats), cfg.batch, gen):
            optimizer.zero_grad()
            hq_feat, lq_feat = pair.encode(encoders)
            loss = prompt_init_loss(feats[idx], hq_feat, lq_feat, labels[idx], scale=scale)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        if session:
            session.log(stage="prompt", epoch=epoch, loss=float(np.mean(losses)))
    final = dataset_loss()
    if session:
        session.log(stage="prompt", initial_loss=initial, final_loss=final)
        session.checkpoint("prompts", pair)
    return pair


def prompt_separation_loss(pair: PromptPair, images, labels, encoders) -> float:
    """Dataset-mean binary prompt loss; used to verify stage-2 descent."""
    with torch.no_grad():
        feats = _encode_reconstructions(_image_stack(images), encoders)
        hq_feat, lq_feat = pair.encode(encoders)
        label_t = torch.as_tensor(list(labels), dtype=torch.long)
        return float(prompt_init_loss(feats, hq_feat, lq_feat, label_t,
                                      scale=getattr(encoders, "logit_scale", 1.0)))


def fine_train(manifest_path, lrn: ReconNet, prompts: PromptPair | None,
               bank: ClassPromptBank, cfg: TrainConfig, encoders, *,
               session: TrainSession | None = None,
               epochs: int | None = None) -> ReconNet:
    """Stage 3: refine the network under class plus prompt supervision.

    Total loss is the class term plus ``cfg.prompt_weight`` times the prompt
    alignment term, both summed over the batch. Prompts and the class bank
    are frozen here; only the network trains. Pass ``prompts=None`` with
    ``prompt_weight=0`` for the class-only ablation.
    """
    if cfg.prompt_weight > 0 and prompts is None:
        raise DataError("prompt_weight > 0 requires a trained prompt pair")
    records = load_manifest(manifest_path)
    if not records:
        raise DataError("empty training manifest")
    voxels = _load_voxel_tensor(records)
    labels = [r.class_label for r in records]

    seed_everything(cfg.seed + 2)
    optimizer = torch.optim.Adam(lrn.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed + 2)
    n_epochs = cfg.epochs[2] if epochs is None else epochs

    if prompts is not None:
        with torch.no_grad():
            hq_feat, lq_feat = prompts.encode(encoders)
        hq_feat, lq_feat = hq_feat.detach(), lq_feat.detach()

    for epoch in range(n_epochs):
        with torch.no_grad():
            bank_feats = {c: f.detach() for c, f in bank.encode(encoders).items()}
        class_sum = prompt_sum = 0.0
        for idx in _batches(len(records), cfg.batch, gen):
            optimizer.zero_grad()
            images = lrn(voxels[idx])
            feats = _encode_reconstructions(images, encoders)
            batch_labels = [labels[i] for i in idx.tolist()]
            loss_class = class_loss(feats, batch_labels, bank_feats, cfg.tau)
            loss = loss_class
            if cfg.prompt_weight > 0:
                loss_prompt = prompt_loss(feats, hq_feat, lq_feat,
                                          log_form=cfg.log_prompt_loss, reduction="sum",
                                          scale=getattr(encoders, "logit_scale", 1.0))
                loss = loss + cfg.prompt_weight * loss_prompt
                prompt_sum += float(loss_prompt.detach())
            loss.backward()
            # the weighted alignment term kicks hard while samples cross the
            # quality boundary; clipping keeps those kicks from erasing the
            # class structure
            if cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(lrn.parameters(), cfg.grad_clip)
            optimizer.step()
            class_sum += float(loss_class.detach())
        if session:
            session.log(stage="fine", epoch=epoch,
                        class_loss=class_sum / len(records),
                        prompt_loss=prompt_sum / len(records))
    if session:
        session.checkpoint("lrn_fine", lrn)
    return lrn


def classify_eval(lrn: ReconNet, manifest_path, bank: ClassPromptBank, encoders) -> float:
    """Zero-shot style accuracy: argmax image-text similarity over the bank.

    Returns percent correct on the manifest's clips.
    """
    records = load_manifest(manifest_path)
    if not records:
        raise DataError("empty evaluation manifest")
    voxels = _load_voxel_tensor(records)
    labels = [r.class_label for r in records]
    with torch.no_grad():
        bank_feats = bank.encode(encoders)
        text = torch.stack([bank_feats[c] for c in bank.classes])
        correct = 0
        for start in range(0, len(records), 32):
            feats = _encode_reconstructions(lrn(voxels[start:start + 32]), encoders)
            pred = (feats @ text.T).argmax(dim=1)
            for offset, p in enumerate(pred.tolist()):
                correct += bank.classes[p] == labels[start + offset]
    return 100.0 * correct / len(records)


def export_reconstructions(lrn: ReconNet, manifest_path, out_dir) -> list[Path]:
    """Write the network's reconstruction of every clip as PNG."""
    records = load_manifest(manifest_path)
    voxels = _load_voxel_tensor(records)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    with torch.no_grad():
        for start in range(0, len(records), 32):
            images = lrn(voxels[start:start + 32]).squeeze(1).numpy()
            for offset, image in enumerate(images):
                path = out / f"{records[start + offset].clip_id}.png"
                save_image(image, path)
                paths.append(path)
    return paths


def manifest_images(manifest_path, kind: str) -> list[np.ndarray]:
    """Load a manifest's hq or lq image set.

    The hq set typically comes from a separate normal-light dataset; the lq
    set is the coarse stage's outputs. Missing slots are skipped.
    """
    attr = {"hq": "hq_path", "lq": "lq_path"}[kind]
    records = load_manifest(manifest_path)
    paths = [getattr(r, attr) for r in records]
    return [load_image(p) for p in paths if p and p.exists()]
