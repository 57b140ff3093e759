"""Evaluation protocols: strips, FFD curves, heatmaps, latent reproduction."""

import numpy as np
import pytest

from paramnav.directions import DirectionSet, apply_direction
from paramnav.evaluation import (ReproduceConfig, StripSpec, ffd_curve,
                                 fit_effect_direction, latent_from_seed,
                                 latent_translation_direction, pixel_diff_heatmap,
                                 render_strip, reproduce_latent)
from paramnav.generator import GeneratorModel
from paramnav.metrics import (PixelMSEMetric, RandomFeatureMetric,
                              expected_displacement, fit_feature_stats,
                              frechet_distance)
from paramnav.rng import Rng

from .harnesses import ParamImageModel


@pytest.fixture(scope="module")
def model():
    return GeneratorModel.init_random(Rng(42))


@pytest.fixture(scope="module")
def dirs(model):
    basis = Rng(0).normal((4, 72))
    basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    return DirectionSet(layer="L3", parametrization="raw_kernel",
                        basis=basis.astype(np.float32), magnitude_range=1.0)


# -- strips -------------------------------------------------------------------


def test_strip_spec_validation():
    with pytest.raises(ValueError):
        StripSpec(direction=0, t_max=1.0, steps=1)
    with pytest.raises(ValueError, match="include 0"):
        StripSpec(direction=0, t_max=1.0, steps=2)  # grid {-T, T} misses 0
    spec = StripSpec(direction=0, t_max=1.0, steps=5)
    assert np.any(spec.grid() == 0.0)
    assert np.all(np.diff(spec.grid()) > 0)


def test_strip_zero_column_bit_identical(model, dirs):
    spec = StripSpec(direction=1, t_max=0.5, steps=5, seeds=(0, 7))
    grid_img, grid = render_strip(model, dirs, spec)
    col = int(np.flatnonzero(grid == 0.0)[0])
    h = 32
    for row, seed in enumerate(spec.seeds):
        base = model.generate(latent_from_seed(seed))[0, 0]
        cell = grid_img[row * h:(row + 1) * h, col * h:(col + 1) * h]
        assert np.array_equal(cell, base)
    assert grid_img.shape == (2 * h, 5 * h)


# -- FFD curves ---------------------------------------------------------------


def test_ffd_zero_point_equals_baseline_exactly(model, dirs):
    metric = RandomFeatureMetric.create(0)
    ref_imgs = model.generate(Rng(99).normal((128, 8)))
    reference = fit_feature_stats(metric, ref_imgs)
    curve = ffd_curve(model, dirs, 0, [-0.5, 0.0, 0.5], metric, reference,
                      sample_count=128, seed=5)
    assert all(v >= 0.0 for _, v in curve)
    z = Rng(5).split("ffd-z").normal((128, 8))
    baseline = frechet_distance(reference, fit_feature_stats(metric, model.generate(z)))
    t0_val = dict((round(t, 6), v) for t, v in curve)[0.0]
    assert t0_val == baseline


# -- heatmaps -----------------------------------------------------------------


def test_heatmap_zero_grid_is_zero(model, dirs):
    hm = pixel_diff_heatmap(model, dirs, 0, [0.0], z_count=8, seed=0)
    assert np.array_equal(hm, np.zeros((32, 32)))


def test_heatmap_nonnegative_and_grid_checks(model, dirs):
    hm = pixel_diff_heatmap(model, dirs, 0, np.linspace(-0.5, 0.5, 4), z_count=8, seed=0)
    assert np.all(hm >= 0.0)
    with pytest.raises(ValueError, match="symmetric"):
        pixel_diff_heatmap(model, dirs, 0, [0.0, 0.5], z_count=4)
    with pytest.raises(ValueError, match="uniform"):
        pixel_diff_heatmap(model, dirs, 0, [-1.0, -0.9, 0.0, 0.9, 1.0], z_count=4)


def test_heatmap_top_half_support_localizes():
    img = np.full((1, 32, 32), 0.5, dtype=np.float32)
    model = ParamImageModel(img)
    pattern = np.zeros((1, 32, 32))
    pattern[0, :16] = 1.0
    pattern /= np.linalg.norm(pattern)
    dirs = DirectionSet(layer="img", parametrization="raw_kernel",
                        basis=pattern.reshape(1, -1).astype(np.float32))
    hm = pixel_diff_heatmap(model, dirs, 0, np.linspace(-1, 1, 6), z_count=4, seed=1)
    assert hm[:16].sum() >= 0.99 * hm.sum()


def test_heatmap_mass_matches_expected_displacement(model, dirs):
    grid = np.linspace(-0.5, 0.5, 6)
    z_count, seed = 16, 3
    hm = pixel_diff_heatmap(model, dirs, 2, grid, z_count=z_count, seed=seed)
    z = Rng(seed).split("heatmap-z").normal((z_count, model.latent_dim))
    pixel = PixelMSEMetric()
    disps = [expected_displacement(model, "L3", pixel, dirs.raw_delta(2, float(t)), z)
             for t in grid]
    n_pix = 32 * 32
    want = np.mean(disps) * n_pix
    assert abs(hm.sum() - want) <= 1e-6 * max(1.0, want)


# -- latent reproduction -------------------------------------------------------


def test_reproduce_zero_shift_gives_zero_residual(model, dirs):
    rep = reproduce_latent(model, dirs, 0, 0.0, "z",
                           ReproduceConfig(steps=5, eval_every=1))
    assert rep.baseline_residual <= 1e-8
    assert rep.final_residual <= 1e-8


def test_reproduce_never_worse_than_baseline(model, dirs):
    rep = reproduce_latent(model, dirs, 1, 0.4, "z",
                           ReproduceConfig(steps=30, eval_every=5))
    assert rep.final_residual <= rep.baseline_residual
    assert rep.space == "z"
    assert rep.trace[0][2] == rep.baseline_residual


def test_reproduce_activation_space_improves(model, dirs):
    rep = reproduce_latent(model, dirs, 0, 0.4, "activation",
                           ReproduceConfig(steps=60, eval_every=10))
    assert rep.final_residual <= rep.baseline_residual
    assert rep.final_residual < 0.9 * rep.baseline_residual


def test_reproduce_rejects_bad_space(model, dirs):
    with pytest.raises(ValueError):
        reproduce_latent(model, dirs, 0, 0.1, "w-plus")


def test_latent_translation_direction_is_exact(model):
    c = np.array([0.4, -0.2, 0.1, 0, 0, 0, 0, 0])
    tdirs, t_star = latent_translation_direction(model, c)
    z = Rng(1).normal((6, 8))
    shifted = apply_direction(model, tdirs, 0, t_star).generate(z)
    translated = model.generate(z + c)
    assert np.abs(shifted - translated).max() <= 1e-5


def test_fit_effect_direction_learns_brightness():
    # target: everything brighter by 0.1 -- any layer can realize a global
    # brightness push at least partially, so the fit must reduce the error
    model = GeneratorModel.init_random(Rng(3))

    def target_fn(z):
        return np.clip(model.generate(z) + 0.1, 0.0, 1.0)

    dirs, t_star = fit_effect_direction(model, "L3", target_fn, steps=120,
                                        lr=0.02, batch=16, seed=0)
    z = Rng(4).normal((16, 8))
    base_err = ((model.generate(z) - target_fn(z)) ** 2).mean()
    fit_err = ((apply_direction(model, dirs, 0, t_star).generate(z)
                - target_fn(z)) ** 2).mean()
    assert fit_err < 0.5 * base_err
    assert abs(np.linalg.norm(dirs.basis[0].astype(np.float64)) - 1.0) <= 1e-6
