"""Learnable quality prompts and the per-class prompt bank."""

from __future__ import annotations

import torch
from torch import nn

from .encoders import unit

N_CTX = 16


class PromptPair(nn.Module):
    """Two learnable context-token sequences, one per quality pole.

    Both live in the text encoder's embedding space and have the same
    length; they are the only parameters updated during prompt learning.
    """

    # word-embedding-scale init; near-zero prompts render to blank patterns
    # whose normalized features carry no gradient signal
    INIT_SCALE = 0.5

    def __init__(self, token_dim: int, n_ctx: int = N_CTX, seed: int = 0,
                 init_scale: float = INIT_SCALE):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.t_hq = nn.Parameter(torch.randn(n_ctx, token_dim, generator=gen) * init_scale)
        self.t_lq = nn.Parameter(torch.randn(n_ctx, token_dim, generator=gen) * init_scale)

    @property
    def n_ctx(self) -> int:
        return self.t_hq.shape[0]

    def encode(self, encoders) -> tuple[torch.Tensor, torch.Tensor]:
        """Unit-normalized (hq, lq) features from the frozen text encoder."""
        feats = encoders.encode_text(torch.stack([self.t_hq, self.t_lq]))
        feats = unit(feats)
        return feats[0], feats[1]


class ClassPromptBank(nn.Module):
    """Frozen context tokens followed by each class word's embedding.

    One entry per dataset class. The context block is shared across classes
    and initialized independently of the quality prompts; encodings are
    unit-normalized and can be recomputed cheaply each epoch.
    """

    def __init__(self, classes, encoders, n_ctx: int = N_CTX, seed: int = 1):
        super().__init__()
        self.classes = tuple(classes)
        if not self.classes:
            raise ValueError("need at least one class")
        gen = torch.Generator().manual_seed(seed)
        context = torch.randn(n_ctx, encoders.token_dim, generator=gen) * 0.02
        self.register_buffer("context", context)
        words = torch.stack([encoders.embed_word(c) for c in self.classes])
        self.register_buffer("word_embeddings", words)

    def encode(self, encoders) -> dict[str, torch.Tensor]:
        """Unit-normalized feature per class, keyed by class name."""
        n = len(self.classes)
        ctx = self.context.unsqueeze(0).expand(n, -1, -1)
        seqs = torch.cat([ctx, self.word_embeddings.unsqueeze(1)], dim=1)
        feats = unit(encoders.encode_text(seqs))
        return {label: feats[i] for i, label in enumerate(self.classes)}
