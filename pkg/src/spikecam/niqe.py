"""Blind image quality scoring against a pristine-statistics model.

The score is the Mahalanobis-style distance between the feature statistics
of a test image and those of a corpus of clean images. Features are fitted
asymmetric generalized Gaussian parameters of locally normalized (MSCN)
coefficients and their four neighbor products, extracted per patch at two
scales. Lower is better; identical statistics score zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d
from scipy.special import gamma as gamma_fn

from .errors import FitError, FormatError, NumericError, ParameterError, ShapeError, TruncatedError
from .image import IntensityImage

MSCN_C = 1.0 / 255.0
FEATURES_PER_SCALE = 18
N_SCALES = 2
COV_EPSILON = 1e-6
SHARPNESS_FRACTION = 0.75

_ALPHA_GRID = np.arange(0.2, 10.0 + 1e-9, 0.001)
_RHO_TABLE = gamma_fn(2.0 / _ALPHA_GRID) ** 2 / (
    gamma_fn(1.0 / _ALPHA_GRID) * gamma_fn(3.0 / _ALPHA_GRID)
)


def _gauss_window(radius: int = 3, sigma: float = 7.0 / 6.0) -> np.ndarray:
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    win = np.exp(-0.5 * (t / sigma) ** 2)
    return win / win.sum()


_WINDOW = _gauss_window()


@dataclass(frozen=True)
class AggdParams:
    """Fitted asymmetric generalized Gaussian: shape, left/right scale, and
    the mean offset derived from the scale asymmetry."""

    alpha: float
    sigma_l: float
    sigma_r: float
    eta: float

    def __post_init__(self):
        vals = (self.alpha, self.sigma_l, self.sigma_r, self.eta)
        if not all(np.isfinite(v) for v in vals):
            raise FitError(f"non-finite fit parameters {vals}")
        if not _ALPHA_GRID[0] <= self.alpha <= _ALPHA_GRID[-1]:
            raise FitError(f"alpha {self.alpha} outside solver bounds")
        if self.sigma_l < 0 or self.sigma_r < 0:
            raise FitError("scale parameters cannot be negative")


@dataclass(frozen=True, eq=False)
class NiqeModel:
    """Pristine-corpus feature mean and covariance, plus the patch size the
    features were extracted with."""

    mean: np.ndarray
    cov: np.ndarray
    patch_size: int = 96

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise ParameterError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise ParameterError("covariance must be symmetric")
        cov = (cov + cov.T) / 2.0
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def f(self) -> int:
        return self.mean.size


def _as_array(image) -> np.ndarray:
    if isinstance(image, IntensityImage):
        return image.values
    return np.asarray(image, dtype=np.float64)


def _local_stats(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = correlate1d(arr, _WINDOW, axis=0, mode="nearest")
    mu = correlate1d(mu, _WINDOW, axis=1, mode="nearest")
    mu2 = correlate1d(arr * arr, _WINDOW, axis=0, mode="nearest")
    mu2 = correlate1d(mu2, _WINDOW, axis=1, mode="nearest")
    sigma = np.sqrt(np.abs(mu2 - mu * mu))
    return mu, sigma


def mscn(image) -> np.ndarray:
    """Mean-subtracted, contrast-normalized coefficients.

    Local mean and deviation come from a 7x7 Gaussian window; the small
    constant C keeps flat regions stable. Constant images map to all zeros.
    """
    arr = _as_array(image)
    if arr.ndim != 2 or min(arr.shape) < 7:
        raise ShapeError(f"image must be 2-D and at least 7x7, got shape {arr.shape}")
    mu, sigma = _local_stats(arr)
    return (arr - mu) / (sigma + MSCN_C)


def _aggd_fit(vec: np.ndarray) -> AggdParams:
    """Moment-matching fit; assumes the caller screened degenerate input."""
    vec = vec.ravel()
    left = vec[vec < 0]
    right = vec[vec > 0]
    lstd = np.sqrt(np.mean(left * left)) if left.size else 0.0
    rstd = np.sqrt(np.mean(right * right)) if right.size else 0.0

    r_hat = np.mean(np.abs(vec)) ** 2 / np.mean(vec * vec)
    if rstd > 0:
        g = lstd / rstd
        rho = r_hat * ((g**3 + 1.0) * (g + 1.0)) / (g**2 + 1.0) ** 2
    else:
        rho = r_hat  # one-sided limit of the asymmetry correction

    alpha = _ALPHA_GRID[np.argmin((_RHO_TABLE - rho) ** 2)]
    ratio = np.sqrt(gamma_fn(1.0 / alpha) / gamma_fn(3.0 / alpha))
    sigma_l = lstd * ratio
    sigma_r = rstd * ratio
    eta = (sigma_r - sigma_l) * gamma_fn(2.0 / alpha) / gamma_fn(1.0 / alpha)
    return AggdParams(float(alpha), float(sigma_l), float(sigma_r), float(eta))


def fit_aggd(samples) -> AggdParams:
    """Fit an asymmetric generalized Gaussian to a sample vector.

    Needs at least 100 samples that are not all equal; a pure Gaussian
    recovers alpha = 2, a Laplacian alpha = 1.
    """
    vec = np.asarray(samples, dtype=np.float64).ravel()
    if vec.size < 100:
        raise ParameterError(f"need at least 100 samples, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise FitError("samples must be finite")
    if vec.min() == vec.max():
        raise FitError("degenerate sample: all values equal")
    return _aggd_fit(vec)


def _patch_features_18(patch: np.ndarray) -> np.ndarray:
    feats = np.empty(FEATURES_PER_SCALE)
    p = _aggd_fit(patch)
    feats[0] = p.alpha
    feats[1] = (p.sigma_l + p.sigma_r) / 2.0
    for i, (dy, dx) in enumerate(((0, 1), (1, 0), (1, 1), (1, -1))):
        prod = patch * np.roll(np.roll(patch, dy, axis=0), dx, axis=1)
        q = _aggd_fit(prod)
        feats[2 + 4 * i: 6 + 4 * i] = (q.alpha, q.eta, q.sigma_l, q.sigma_r)
    return feats


def _halve(arr: np.ndarray) -> np.ndarray:
    im = Image.fromarray(arr.astype(np.float32), mode="F")
    half = im.resize((arr.shape[1] // 2, arr.shape[0] // 2), Image.BICUBIC)
    return np.asarray(half, dtype=np.float64)


def _blocks(arr: np.ndarray, size: int) -> np.ndarray:
    ny, nx = arr.shape[0] // size, arr.shape[1] // size
    return arr.reshape(ny, size, nx, size).swapaxes(1, 2).reshape(ny * nx, size, size)


def patch_feature_matrix(image, patch_size: int = 96) -> np.ndarray:
    """Per-patch feature rows (n_selected x 36) for one image.

    The image is cropped to whole patches; patch sharpness (mean squared
    local deviation) is measured at full scale and patches below
    SHARPNESS_FRACTION of the sharpest are dropped. The same patch grid is
    reused at half scale with half the patch size.
    """
    arr = _as_array(image)
    if patch_size < 4 or patch_size % 2:
        raise ParameterError(f"patch_size must be even and >= 4, got {patch_size}")
    if arr.ndim != 2 or min(arr.shape) < 2 * patch_size:
        raise ShapeError(
            f"image of shape {arr.shape} is smaller than 2x patch_size ({patch_size})"
        )
    arr = arr[: arr.shape[0] // patch_size * patch_size,
              : arr.shape[1] // patch_size * patch_size]

    mu, sigma = _local_stats(arr)
    coeffs = (arr - mu) / (sigma + MSCN_C)
    sharpness = _blocks(sigma * sigma, patch_size).mean(axis=(1, 2))
    keep = np.flatnonzero(sharpness >= SHARPNESS_FRACTION * sharpness.max())

    half_coeffs = mscn(_halve(arr))
    patches_full = _blocks(coeffs, patch_size)
    patches_half = _blocks(half_coeffs, patch_size // 2)

    rows = np.empty((keep.size, FEATURES_PER_SCALE * N_SCALES))
    for out, idx in enumerate(keep):
        rows[out, :FEATURES_PER_SCALE] = _patch_features_18(patches_full[idx])
        rows[out, FEATURES_PER_SCALE:] = _patch_features_18(patches_half[idx])
    return rows


def niqe_features(image, patch_size: int = 96) -> np.ndarray:
    """Sharpness-selected patch features averaged into one vector."""
    return patch_feature_matrix(image, patch_size).mean(axis=0)


def fit_niqe_model(corpus, patch_size: int = 96) -> NiqeModel:
    """Fit the pristine model from clean images.

    Needs at least 10 images, each at least 2x patch_size on both sides.
    """
    corpus = list(corpus)
    if len(corpus) < 10:
        raise ParameterError(f"need at least 10 corpus images, got {len(corpus)}")
    rows = np.vstack([patch_feature_matrix(img, patch_size) for img in corpus])
    mean = rows.mean(axis=0)
    cov = np.cov(rows, rowvar=False)
    return NiqeModel(mean, (cov + cov.T) / 2.0, patch_size)


def niqe_score(image, model: NiqeModel) -> float:
    """Distance between the image's patch statistics and the pristine model.

    Zero when the statistics coincide; grows with distortion. Deterministic
    for identical inputs.
    """
    rows = patch_feature_matrix(image, model.patch_size)
    nu = rows.mean(axis=0)
    cov = np.cov(rows, rowvar=False) if rows.shape[0] > 1 else np.zeros((model.f, model.f))
    combined = (model.cov + cov) / 2.0 + COV_EPSILON * np.eye(model.f)
    diff = model.mean - nu
    try:
        solved = np.linalg.solve(combined, diff)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"combined covariance is singular: {exc}") from exc
    quad = float(diff @ solved)
    if not np.isfinite(quad):
        raise NumericError("non-finite quality distance")
    return float(np.sqrt(max(quad, 0.0)))


def save_niqe_model(model: NiqeModel, path) -> None:
    """Write mean then row-major covariance as little-endian float64, with a
    JSON sidecar at ``<path>.json`` recording the feature length and patch
    size."""
    with open(path, "wb") as f:
        f.write(model.mean.astype("<f8").tobytes())
        f.write(model.cov.astype("<f8").tobytes())
    sidecar = {"f": model.f, "patch_size": model.patch_size, "dtype": "f64le"}
    with open(str(path) + ".json", "w") as f:
        json.dump(sidecar, f, sort_keys=True)
        f.write("\n")


def load_niqe_model(path) -> NiqeModel:
    """Read a model written by :func:`save_niqe_model`."""
    with open(str(path) + ".json") as f:
        meta = json.load(f)
    if meta.get("dtype") != "f64le":
        raise FormatError(f"unsupported model dtype {meta.get('dtype')!r}")
    f_len, patch_size = int(meta["f"]), int(meta["patch_size"])
    with open(path, "rb") as fh:
        raw = fh.read()
    expect = 8 * (f_len + f_len * f_len)
    if len(raw) != expect:
        raise TruncatedError(f"model payload is {len(raw)} bytes, sidecar claims {expect}")
    mean = np.frombuffer(raw[: 8 * f_len], dtype="<f8")
    cov = np.frombuffer(raw[8 * f_len:], dtype="<f8").reshape(f_len, f_len)
    return NiqeModel(mean, cov, patch_size)
