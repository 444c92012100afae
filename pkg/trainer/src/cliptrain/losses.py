"""Alignment losses on encoded features.

All three losses operate on already-encoded feature vectors, so they are
pure differentiable math: a binary cross-entropy that teaches quality
prompts to separate good from bad reconstructions, the alignment term that
pulls reconstructions toward the good prompt, and the batch-contrastive
class term. Callers normalize features before passing them in.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import torch

from .errors import DataError, NumericError


def _require_nonzero(*features: torch.Tensor) -> None:
    for feat in features:
        norms = feat.norm(dim=-1)
        if not bool(torch.all(norms > 0)):
            raise NumericError("zero-norm feature vector")


def _similarities(image_feat, hq_feat, lq_feat, scale):
    _require_nonzero(image_feat, hq_feat, lq_feat)
    s_hq = scale * (image_feat * hq_feat).sum(dim=-1)
    s_lq = scale * (image_feat * lq_feat).sum(dim=-1)
    return s_hq, s_lq


def _reduce(values: torch.Tensor, reduction: str) -> torch.Tensor:
    if reduction == "mean":
        return values.mean()
    if reduction == "sum":
        return values.sum()
    if reduction == "none":
        return values
    raise ValueError(f"unknown reduction {reduction!r}")


def prompt_init_loss(image_feat: torch.Tensor, hq_feat: torch.Tensor,
                     lq_feat: torch.Tensor, label, reduction: str = "mean",
                     scale: float = 1.0) -> torch.Tensor:
    """Binary cross-entropy over the two prompt similarities.

    The predicted probability of "high quality" is the softmax of the
    image-prompt similarities with the HQ term in the numerator; ``label``
    is 1 for HQ samples and 0 for LQ ones. ``scale`` is the encoder stack's
    logit scale: the contrastive pretraining convention multiplies cosine
    similarities by it before any softmax.
    """
    s_hq, s_lq = _similarities(image_feat, hq_feat, lq_feat, scale)
    logits = torch.stack([s_lq, s_hq], dim=-1)
    logp = torch.log_softmax(logits, dim=-1)
    label_t = torch.as_tensor(label, device=logp.device)
    picked = torch.where(label_t.bool(), logp[..., 1], logp[..., 0])
    return _reduce(-picked, reduction)


def prompt_loss(image_feat: torch.Tensor, hq_feat: torch.Tensor, lq_feat: torch.Tensor,
                log_form: bool = False, reduction: str = "mean",
                scale: float = 1.0) -> torch.Tensor:
    """Alignment with the high-quality prompt.

    The literal form is the negative softmax probability of the HQ prompt
    (no logarithm), so values lie in (-1, 0) and decrease as the HQ
    similarity grows; with a saturated probability the term goes quiet at
    both ends, acting as a margin push. ``log_form`` switches to the
    conventional -log(probability) variant; ``scale`` is the encoder
    stack's logit scale as in :func:`prompt_init_loss`.
    """
    s_hq, s_lq = _similarities(image_feat, hq_feat, lq_feat, scale)
    log_p_hq = torch.nn.functional.logsigmoid(s_hq - s_lq)
    values = -log_p_hq if log_form else -torch.exp(log_p_hq)
    return _reduce(values, reduction)


def class_loss(image_feats: torch.Tensor, labels: Sequence[str],
               bank_feats: Mapping[str, torch.Tensor], tau: float) -> torch.Tensor:
    """Batch-contrastive class supervision.

    Each image is matched against the class texts of the whole batch: the
    positive is its own label's text, the denominator runs over every batch
    member's label (duplicates included). Temperature ``tau`` sharpens the
    contrast. Summed over the batch; always >= 0.
    """
    if image_feats.dim() != 2 or image_feats.shape[0] != len(labels):
        raise DataError(
            f"expected ({len(labels)}, D) image features, got {tuple(image_feats.shape)}"
        )
    try:
        text_feats = torch.stack([bank_feats[label] for label in labels])
    except KeyError as exc:
        raise DataError(f"label {exc.args[0]!r} missing from the class prompt bank") from exc
    _require_nonzero(image_feats, text_feats)
    sims = image_feats @ text_feats.T / tau
    logp = torch.log_softmax(sims, dim=1)
    return -logp.diagonal().sum()
