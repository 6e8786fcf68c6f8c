import math

import numpy as np
import pytest

import ffasynth


def test_filters_and_saliency():
    rng = np.random.default_rng(0)
    img = (rng.integers(0, 256, (16, 16)) / 255.0).astype(np.float32)
    med = ffasynth.median_filter(img, 3)
    assert med.shape == (16, 16)
    assert med[5, 5] == np.median(img[4:7, 4:7])
    g = ffasynth.gaussian_filter(np.full((8, 8), 0.25, np.float32), 5, 1.0)
    assert np.allclose(g, 0.25)

    flat = np.full((32, 32), 77 / 255, np.float32)
    assert not ffasynth.compute_saliency(flat, median_kernel=15).any()
    s1 = ffasynth.compute_saliency(img, median_kernel=7)
    s2 = ffasynth.compute_saliency(img, a=2.0, median_kernel=7)
    assert np.array_equal(s2, 2 * s1)


def test_metrics():
    x = np.full((32, 32), 0.4, np.float32)
    y = x + np.float32(10 / 255)
    assert ffasynth.psnr(x, y) == pytest.approx(28.13, abs=0.01)
    assert ffasynth.ssim(x, x) == 1.0
    assert math.isinf(ffasynth.psnr(x, x))
    with pytest.raises(ValueError):
        ffasynth.mse(x, np.zeros((4, 4), np.float32))


def test_schedule_and_architecture():
    assert ffasynth.lr_schedule(1) == 2e-4
    assert ffasynth.lr_schedule(150) == 1e-4
    assert ffasynth.lr_schedule(200) == 0.0
    assert ffasynth.receptive_field() == 70
    assert ffasynth.score_map_size(256, 256) == (30, 30)
    with pytest.raises(ffasynth.ParameterError):
        ffasynth.receptive_field("tiny")


def test_phantoms_and_png(tmp_path):
    pairs = ffasynth.synth_phantoms(2, 64, 3)
    name, structure, angio = pairs[0]
    assert name == "phantom_0"
    assert structure.shape == (64, 64, 3)
    assert angio.shape == (64, 64)
    path = tmp_path / "a.png"
    ffasynth.save_png(angio, path)
    back = ffasynth.load_png(path)
    assert np.abs(back - angio).max() <= 0.5 / 255 + 1e-6
    with pytest.raises(ffasynth.DataError):
        ffasynth.load_png(tmp_path / "missing.png")
    with pytest.raises(OSError):
        ffasynth.translate(tmp_path / "none.ckpt", structure)
