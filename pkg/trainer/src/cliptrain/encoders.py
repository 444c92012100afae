"""Frozen image/text encoder pairs.

Training needs a pretrained vision-language encoder pair; the checkpoint is
an external dependency. ``TinyEncoderPair`` is a deterministic frozen
stand-in with the same interface for tests and toy experiments. It carries
no pretrained semantics, but it does reproduce the structural property the
training relies on: text features live in the image feature space, because
the text tower renders its pooled embedding to a small pattern image and
encodes that with the image tower. Class words therefore anchor reachable
feature directions, and a reconstruction network can learn to align with
them.
"""

from __future__ import annotations

import hashlib

import torch
import torch.nn.functional as F
from torch import nn


def unit(features: torch.Tensor) -> torch.Tensor:
    """L2-normalize along the last dimension."""
    return F.normalize(features, dim=-1)


def adapt_images(images: torch.Tensor, size: int, mean, std) -> torch.Tensor:
    """Resize single-channel reconstructions to the encoder's native input:
    bilinear to ``size``, channel triplication, then per-channel whitening.
    Differentiable, so gradients reach the reconstruction network."""
    if images.dim() != 4 or images.shape[1] != 1:
        raise ValueError(f"expected (B, 1, H, W) images, got {tuple(images.shape)}")
    x = F.interpolate(images, size=(size, size), mode="bilinear", align_corners=False)
    x = x.repeat(1, 3, 1, 1)
    mean_t = torch.tensor(mean, dtype=x.dtype).view(1, 3, 1, 1)
    std_t = torch.tensor(std, dtype=x.dtype).view(1, 3, 1, 1)
    return (x - mean_t) / std_t


def _seeded(shape, gen) -> torch.Tensor:
    t = torch.randn(*shape, generator=gen)
    fan_in = shape[-1] if len(shape) == 2 else shape[1] * shape[2] * shape[3]
    return t * (2.0 / fan_in) ** 0.5


_PATTERN_SIDE = 16


class TinyEncoderPair(nn.Module):
    """Deterministic frozen stand-in encoder pair.

    Images: one wide stride-4 convolution, layer normalization, GELU, a 4x4
    spatial average grid (keeps layout information), and a linear head. A
    shallow trunk keeps the input-to-feature map well conditioned, so a
    network upstream can steer its features.

    Text: embedding sequences are mean-pooled, rendered to a 16x16 pattern
    by a fixed linear map, upsampled, and passed through the image tower.
    ``word_scale`` sets how strongly a class word shifts the pooled prompt
    relative to the shared context tokens.
    """

    image_mean = (0.5, 0.5, 0.5)
    image_std = (0.5, 0.5, 0.5)

    # similarity logit scale of the contrastive pretraining convention
    logit_scale = 100.0

    # weight of the global luminance/contrast statistics relative to the
    # layer-normalized shape features; image quality differences live there
    stats_scale = 2.0

    def __init__(self, feature_dim: int = 64, token_dim: int = 64,
                 image_size: int = 64, seed: int = 0, word_scale: float = 0.2):
        super().__init__()
        self.feature_dim = feature_dim
        self.token_dim = token_dim
        self.image_size = image_size
        self.word_scale = word_scale
        gen = torch.Generator().manual_seed(seed)

        self.conv = nn.Conv2d(3, 32, 5, stride=4, padding=2)
        self.head = nn.Linear(32 * 16 + 6, feature_dim)
        self.render = nn.Linear(token_dim, _PATTERN_SIDE * _PATTERN_SIDE)
        with torch.no_grad():
            for module in (self.conv, self.head, self.render):
                module.weight.copy_(_seeded(module.weight.shape, gen))
                module.bias.zero_()
            self.render.weight.mul_(_PATTERN_SIDE)  # keep pattern amplitude O(1)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def encode_image(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, S, S) adapted images to (B, feature_dim); not normalized.

        The shape path is layer-normalized (brightness-invariant, well
        conditioned); per-channel mean and deviation are appended so global
        luminance and contrast stay visible to the feature.
        """
        x = self.conv(images)
        x = F.gelu(F.layer_norm(x, x.shape[1:]))
        x = F.adaptive_avg_pool2d(x, 4).flatten(1)
        x = F.layer_norm(x, x.shape[1:])
        stats = torch.cat([images.mean(dim=(2, 3)), images.std(dim=(2, 3))], dim=1)
        return self.head(torch.cat([x, self.stats_scale * stats], dim=1))

    def encode_text(self, embeddings: torch.Tensor) -> torch.Tensor:
        """(B, L, token_dim) embedding sequences to (B, feature_dim).

        The pooled embedding is rendered to a pattern image and encoded with
        the image tower, which places text features on the image manifold.
        """
        if embeddings.dim() == 2:
            embeddings = embeddings.unsqueeze(0)
        pooled = embeddings.mean(dim=1)
        pattern = self.render(pooled).reshape(-1, 1, _PATTERN_SIDE, _PATTERN_SIDE)
        pattern = F.interpolate(pattern, size=(self.image_size, self.image_size),
                                mode="bilinear", align_corners=False)
        return self.encode_image(pattern.repeat(1, 3, 1, 1))

    def embed_word(self, word: str) -> torch.Tensor:
        """Stable per-word embedding derived from a hash of the word."""
        digest = hashlib.sha256(word.encode("utf-8")).digest()
        gen = torch.Generator().manual_seed(int.from_bytes(digest[:8], "little"))
        return torch.randn(self.token_dim, generator=gen) * self.word_scale

    def adapt(self, images: torch.Tensor) -> torch.Tensor:
        return adapt_images(images, self.image_size, self.image_mean, self.image_std)
