"""Synthetic grayscale scenes.

Stand-ins for real captures: textured multi-shape scenes for pristine
corpora and single-shape class scenes for labeled clip datasets.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ParameterError
from .image import IntensityImage

SHAPE_CLASSES = ("circle", "square", "triangle", "cross", "ring")


def _smooth_background(h: int, w: int, rng: np.random.Generator,
                       lo: float = 0.3, hi: float = 0.7) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    yy /= h
    xx /= w
    field = np.zeros((h, w))
    for _ in range(3):
        fy, fx = rng.uniform(0.5, 2.5, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        field += rng.uniform(0.4, 1.0) * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase)
    field -= field.min()
    if field.max() > 0:
        field /= field.max()
    return lo + (hi - lo) * field


def _shape_mask(kind: str, h: int, w: int, cy: float, cx: float, r: float,
                angle: float = 0.0) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    if angle:
        c, s = np.cos(angle), np.sin(angle)
        dy, dx = c * dy - s * dx, s * dy + c * dx
    if kind == "circle":
        return dy * dy + dx * dx <= r * r
    if kind == "square":
        return np.maximum(np.abs(dy), np.abs(dx)) <= r
    if kind == "ring":
        d2 = dy * dy + dx * dx
        return (d2 <= r * r) & (d2 >= (0.55 * r) ** 2)
    if kind == "cross":
        arm = 0.35 * r
        return ((np.abs(dy) <= arm) & (np.abs(dx) <= r)) | ((np.abs(dx) <= arm) & (np.abs(dy) <= r))
    if kind == "triangle":
        # apex up: intersection of three half planes
        s3 = np.sqrt(3.0)
        return (dy >= -r) & (dy <= -s3 * dx + r) & (dy <= s3 * dx + r)
    raise ParameterError(f"unknown shape kind {kind!r}")


def synthetic_scene(h: int = 384, w: int = 384, seed: int = 0, n_shapes: int = 6,
                    texture: float = 0.015) -> IntensityImage:
    """A textured scene of random shapes over a smooth gradient.

    Same-seeded calls reproduce the same scene; suitable both as a pristine
    corpus member and as a latent frame for simulation.
    """
    rng = np.random.default_rng(seed)
    scene = _smooth_background(h, w, rng)
    kinds = list(SHAPE_CLASSES)
    for _ in range(n_shapes):
        kind = kinds[rng.integers(len(kinds))]
        r = rng.uniform(0.06, 0.16) * min(h, w)
        cy = rng.uniform(0.15 * h, 0.85 * h)
        cx = rng.uniform(0.15 * w, 0.85 * w)
        mask = _shape_mask(kind, h, w, cy, cx, r, angle=rng.uniform(0, np.pi))
        delta = rng.uniform(0.18, 0.35) * rng.choice((-1.0, 1.0))
        scene = np.where(mask, scene + delta, scene)
    scene = gaussian_filter(scene, 1.0)
    scene += rng.normal(0.0, texture, size=scene.shape)
    return IntensityImage.from_array(scene)


def shape_scene(label: str, h: int = 48, w: int = 48, seed: int = 0) -> IntensityImage:
    """One labeled shape with randomized pose over a dim smooth background."""
    if label not in SHAPE_CLASSES:
        raise ParameterError(f"unknown class {label!r}, expected one of {SHAPE_CLASSES}")
    rng = np.random.default_rng(seed)
    scene = _smooth_background(h, w, rng, lo=0.08, hi=0.3)
    r = rng.uniform(0.26, 0.38) * min(h, w)
    cy = h / 2 + rng.uniform(-0.08, 0.08) * h
    cx = w / 2 + rng.uniform(-0.08, 0.08) * w
    mask = _shape_mask(label, h, w, cy, cx, r, angle=rng.uniform(-0.3, 0.3))
    bright = rng.uniform(0.75, 0.95)
    scene = np.where(mask, bright, scene)
    scene = gaussian_filter(scene, 0.8)
    scene += rng.normal(0.0, 0.01, size=scene.shape)
    return IntensityImage.from_array(scene)
