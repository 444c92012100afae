"""The lightweight reconstruction network.

Maps a voxelized spike tensor to a single grayscale image in [0, 1] with a
plain convolutional stack. Weak supervision does not reward capacity, so the
trainable parameter count is capped at construction.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import DataError

PARAM_BUDGET = 250_000
CHANNEL_PLAN = (64, 64, 64, 64, 32)


def param_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


class ReconNet(nn.Module):
    """3x3 convolution stack, 50 -> 64 -> 64 -> 64 -> 64 -> 32 -> 1.

    Hidden layers are rectified; the output passes through a sigmoid so the
    image lands in [0, 1] at the input's spatial size.
    """

    def __init__(self, in_channels: int = 50):
        super().__init__()
        self.in_channels = in_channels
        layers = []
        prev = in_channels
        for ch in CHANNEL_PLAN:
            layers.append(nn.Conv2d(prev, ch, 3, padding=1))
            prev = ch
        self.hidden = nn.ModuleList(layers)
        self.out = nn.Conv2d(prev, 1, 3, padding=1)
        # low-light targets are dark; starting the sigmoid near 0.12 keeps
        # aggressive early steps out of the all-black saturation basin
        with torch.no_grad():
            self.out.bias.fill_(-2.0)
        total = param_count(self)
        if total > PARAM_BUDGET:
            raise DataError(f"{total} trainable parameters exceed the {PARAM_BUDGET} budget")

    def forward(self, voxels: torch.Tensor) -> torch.Tensor:
        if voxels.dim() != 4 or voxels.shape[1] != self.in_channels:
            raise DataError(
                f"expected (B, {self.in_channels}, H, W) voxels, got {tuple(voxels.shape)}"
            )
        x = voxels
        for conv in self.hidden:
            x = F.relu(conv(x))
        return torch.sigmoid(self.out(x))
