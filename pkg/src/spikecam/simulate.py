"""Integrate-and-fire spike camera simulator.

Each pixel accumulates light over frames and emits a spike whenever the
accumulator crosses the firing threshold, which is then subtracted rather
than reset so no charge is lost. Low light is modeled by scaling the input,
dark current by random full-threshold jolts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .image import IntensityImage
from .stream import SpikeStream

# Relative slack on the threshold comparison. Repeated float additions of
# decimal intensities (e.g. ten times 0.1) land a few ulp short of the exact
# crossing; the slack keeps the spike schedule on the ideal integer grid.
_THRESHOLD_SLACK = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """Simulator knobs.

    theta: firing threshold in normalized intensity-frames.
    light_scale: multiplier on the input intensity; < 1 models low light.
    dark_rate: per-frame, per-pixel probability of a spurious full-threshold
        accumulation jolt (a noise spike).
    seed: RNG seed; only consumed when dark_rate > 0.
    """

    theta: float = 1.0
    light_scale: float = 1.0
    dark_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.theta > 0:
            raise ShapeError(f"theta must be > 0, got {self.theta}")
        if not self.light_scale > 0:
            raise ShapeError(f"light_scale must be > 0, got {self.light_scale}")
        if not 0.0 <= self.dark_rate <= 1.0:
            raise ShapeError(f"dark_rate must be in [0, 1], got {self.dark_rate}")


def simulate(frames: Sequence[IntensityImage], cfg: SimConfig = SimConfig()) -> SpikeStream:
    """Run the accumulator over a latent frame sequence (one time unit per frame).

    Per pixel and frame: add light_scale * intensity, maybe add a dark jolt,
    then fire at most one spike and subtract theta if the accumulator reached
    it. Output has one frame per input frame.
    """
    if len(frames) < 1:
        raise ShapeError("need at least one frame")
    h, w = frames[0].h, frames[0].w
    for f in frames:
        if (f.h, f.w) != (h, w):
            raise ShapeError(f"frame shape ({f.h}, {f.w}) does not match ({h}, {w})")

    rng = np.random.default_rng(cfg.seed) if cfg.dark_rate > 0.0 else None
    acc = np.zeros((h, w), dtype=np.float64)
    out = np.empty((len(frames), h, w), dtype=np.uint8)
    fire_level = cfg.theta * (1.0 - _THRESHOLD_SLACK)
    for t, frame in enumerate(frames):
        acc += cfg.light_scale * frame.values
        if rng is not None:
            acc += cfg.theta * (rng.random((h, w)) < cfg.dark_rate)
        fired = acc >= fire_level
        out[t] = fired
        acc[fired] -= cfg.theta
    return SpikeStream.from_dense(out)


def simulate_constant(intensity: IntensityImage, k: int, cfg: SimConfig = SimConfig()) -> SpikeStream:
    """Simulate k frames of a static scene."""
    if k < 1:
        raise ShapeError(f"k must be >= 1, got {k}")
    return simulate([intensity] * k, cfg)
