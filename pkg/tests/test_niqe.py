import numpy as np
import pytest

from spikecam import (
    FitError,
    FormatError,
    IntensityImage,
    NiqeModel,
    ParameterError,
    ShapeError,
    TruncatedError,
    fit_aggd,
    fit_niqe_model,
    load_niqe_model,
    mscn,
    niqe_features,
    niqe_score,
    save_niqe_model,
    synthetic_scene,
)
from spikecam.niqe import patch_feature_matrix

from conftest import nested_saltpepper


def ggd_samples(alpha: float, n: int, rng) -> np.ndarray:
    """Exact generalized Gaussian draws: sign * Gamma(1/alpha)^(1/alpha)."""
    mags = rng.gamma(shape=1.0 / alpha, scale=1.0, size=n) ** (1.0 / alpha)
    signs = rng.choice((-1.0, 1.0), size=n)
    return mags * signs


class TestMscn:
    def test_constant_image_is_zero(self):
        field = mscn(IntensityImage(np.full((64, 64), 0.37)))
        assert np.abs(field).max() <= 1e-12

    def test_too_small_image(self):
        with pytest.raises(ShapeError):
            mscn(IntensityImage(np.full((6, 64), 0.5)))

    def test_contrast_invariance_away_from_stabilizer(self):
        yy, xx = np.mgrid[0:128, 0:128]
        checker = ((yy // 2 + xx // 2) % 2) * 2.0 - 1.0
        mod = 0.04 * np.sin(2 * np.pi * 3 * xx / 128) * np.sin(2 * np.pi * 2 * yy / 128)
        base = 0.5 + 0.2 * checker + mod
        stretched = 0.5 + 2.0 * (base - 0.5)
        diff = np.abs(mscn(IntensityImage(base)) - mscn(IntensityImage(stretched)))
        assert diff[4:-4, 4:-4].max() <= 0.02

    def test_white_noise_variance_near_unit(self):
        rng = np.random.default_rng(42)
        field = mscn(rng.normal(0.0, 1.0, (256, 256)))
        assert 0.5 <= field.var() <= 1.5


class TestAggdFit:
    def test_gaussian_recovers_alpha_two(self):
        rng = np.random.default_rng(0)
        params = fit_aggd(rng.normal(0.0, 1.0, 10**6))
        assert 1.9 <= params.alpha <= 2.1
        assert abs(params.sigma_l - params.sigma_r) <= 0.05

    def test_laplacian_recovers_alpha_one(self):
        rng = np.random.default_rng(1)
        params = fit_aggd(rng.laplace(0.0, 1.0, 10**6))
        assert 0.9 <= params.alpha <= 1.1

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 4.0])
    def test_recovers_shape_parameter(self, alpha):
        rng = np.random.default_rng(int(alpha * 10))
        params = fit_aggd(ggd_samples(alpha, 10**6, rng))
        assert abs(params.alpha - alpha) <= 0.1

    def test_asymmetry_shows_in_eta(self):
        rng = np.random.default_rng(2)
        right_heavy = np.abs(rng.normal(0.0, 1.0, 10**5))
        left_light = -np.abs(rng.normal(0.0, 0.2, 10**5))
        params = fit_aggd(np.concatenate([right_heavy, left_light]))
        assert params.eta > 0
        assert params.sigma_r > params.sigma_l

    def test_all_equal_rejected(self):
        with pytest.raises(FitError):
            fit_aggd(np.full(500, 1.25))

    def test_too_few_samples(self):
        with pytest.raises(ParameterError):
            fit_aggd(np.arange(50, dtype=float))

    def test_non_finite_rejected(self):
        vec = np.ones(200)
        vec[0] = np.nan
        with pytest.raises(FitError):
            fit_aggd(vec)


class TestFeatures:
    def test_feature_vector_length(self, pristine_corpus):
        assert niqe_features(pristine_corpus[0]).shape == (36,)

    def test_patch_rows_have_same_length(self, pristine_corpus):
        rows = patch_feature_matrix(pristine_corpus[0])
        assert rows.ndim == 2 and rows.shape[1] == 36
        assert rows.shape[0] >= 1

    def test_image_smaller_than_two_patches(self):
        with pytest.raises(ShapeError):
            niqe_features(synthetic_scene(128, 128, seed=1))

    def test_odd_patch_size_rejected(self):
        with pytest.raises(ParameterError):
            niqe_features(synthetic_scene(256, 256, seed=1), patch_size=31)


class TestModelFit:
    def test_needs_ten_images(self, pristine_corpus):
        with pytest.raises(ParameterError):
            fit_niqe_model(pristine_corpus[:9])

    def test_model_shapes(self, niqe_model):
        assert niqe_model.mean.shape == (36,)
        assert niqe_model.cov.shape == (36, 36)
        assert niqe_model.patch_size == 96

    def test_asymmetric_cov_rejected(self):
        cov = np.eye(3)
        cov[0, 1] = 0.5
        with pytest.raises(ParameterError):
            NiqeModel(np.zeros(3), cov, 96)


class TestScore:
    def test_non_negative(self, niqe_model, pristine_corpus):
        assert niqe_score(pristine_corpus[0], niqe_model) >= 0.0

    def test_zero_for_model_mean_statistics(self, pristine_corpus):
        img = pristine_corpus[0]
        model = fit_niqe_model([img] * 10)
        assert niqe_score(img, model) <= 1e-6

    def test_deterministic(self, niqe_model):
        img = synthetic_scene(384, 384, seed=321)
        assert niqe_score(img, niqe_model) == niqe_score(img, niqe_model)

    def test_noise_raises_score(self, niqe_model):
        for seed in range(100, 105):
            img = synthetic_scene(384, 384, seed=seed)
            noisy = nested_saltpepper(img, 0.2)
            assert niqe_score(img, niqe_model) < niqe_score(noisy, niqe_model)

    def test_monotone_under_growing_corruption(self, niqe_model):
        levels = (0.01, 0.03, 0.09)
        for seed in range(100, 107):
            img = synthetic_scene(384, 384, seed=seed)
            scores = [niqe_score(img, niqe_model)]
            scores += [niqe_score(nested_saltpepper(img, p), niqe_model) for p in levels]
            assert all(a < b for a, b in zip(scores, scores[1:])), (seed, scores)


class TestModelIO:
    def test_round_trip(self, niqe_model, tmp_path):
        path = tmp_path / "model.niqe"
        save_niqe_model(niqe_model, path)
        loaded = load_niqe_model(path)
        assert np.array_equal(loaded.mean, niqe_model.mean)
        assert np.array_equal(loaded.cov, niqe_model.cov)
        assert loaded.patch_size == niqe_model.patch_size

    def test_truncated(self, niqe_model, tmp_path):
        path = tmp_path / "model.niqe"
        save_niqe_model(niqe_model, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(TruncatedError):
            load_niqe_model(path)

    def test_bad_dtype(self, niqe_model, tmp_path):
        path = tmp_path / "model.niqe"
        save_niqe_model(niqe_model, path)
        (tmp_path / "model.niqe.json").write_text(
            '{"f": 36, "patch_size": 96, "dtype": "f32le"}'
        )
        with pytest.raises(FormatError):
            load_niqe_model(path)
