"""Restoration chain for simple-texture patches."""
from __future__ import annotations

import numpy as np
import pytest

from edrestore.errors import ConfigError
from edrestore.evaluate import gradient_field
from edrestore.stp import (
    StpParams,
    StpStep,
    bicubic_upscale,
    restore_stp,
    stp_step,
)


def mean_gradient_magnitude(img: np.ndarray) -> float:
    gx, gy = gradient_field(img)
    return float(np.hypot(gx, gy).mean())


def one_px_line_art(size: int = 50) -> np.ndarray:
    img = np.full((size, size), 255, np.uint8)
    img[size // 2, 4 : size - 4] = 0
    img[4 : size - 4, size // 3] = 0
    for d in range(6, size - 6):
        img[d, d] = 0
    return img


class TestSteps:
    def test_denoise_constant_fixed_point(self):
        patch = np.full((20, 20), 180, np.uint8)
        assert np.array_equal(stp_step(patch, StpStep.DENOISE), patch)

    def test_stretch_full_percentiles(self):
        patch = np.linspace(50, 150, 100, dtype=np.uint8).reshape(10, 10)
        params = StpParams(stretch_lo=0, stretch_hi=100)
        out = stp_step(patch, StpStep.STRETCH, params)
        assert out.min() == 0 and out.max() == 255
        assert out.flat[np.argmin(patch)] == 0
        assert out.flat[np.argmax(patch)] == 255

    def test_stretch_maps_endpoints_linearly(self):
        patch = np.full((4, 4), 100, np.uint8)
        patch[0, 0], patch[-1, -1] = 50, 150
        out = stp_step(patch, StpStep.STRETCH, StpParams(stretch_lo=0, stretch_hi=100))
        assert out[0, 0] == 0 and out[-1, -1] == 255
        assert out[1, 1] == round((100 - 50) * 255 / 100)

    def test_stretch_constant_unchanged(self):
        patch = np.full((8, 8), 42, np.uint8)
        assert np.array_equal(stp_step(patch, StpStep.STRETCH), patch)

    def test_sharpen_constant_fixed_point(self):
        patch = np.full((16, 16), 90, np.uint8)
        assert np.array_equal(stp_step(patch, StpStep.SHARPEN), patch)

    def test_upscale_dimensions(self):
        patch = one_px_line_art(32)
        out = stp_step(patch, StpStep.UPSCALE, StpParams(scale=3))
        assert out.shape == (96, 96)

    def test_upscale_constant_stays_constant(self):
        patch = np.full((10, 10), 77, np.uint8)
        out = stp_step(patch, StpStep.UPSCALE, StpParams(scale=4))
        assert (out == 77).all()

    def test_param_validation(self):
        with pytest.raises(ConfigError):
            stp_step(np.zeros((4, 4), np.uint8), StpStep.DENOISE, StpParams(sigma_spatial=0))
        with pytest.raises(ConfigError):
            StpParams(stretch_lo=60, stretch_hi=40).validate()
        with pytest.raises(ConfigError):
            StpParams(scale=0).validate()


class TestRestoreChain:
    def test_output_scale_contract(self):
        patch = one_px_line_art(50)
        out = restore_stp(patch, StpParams(scale=4))
        assert out.shape == (200, 200)

    @pytest.mark.parametrize("scale", [1, 2, 4])
    @pytest.mark.parametrize("size", [16, 33, 50])
    def test_dimensions_for_all_inputs(self, scale, size):
        rng = np.random.default_rng(size * scale)
        patch = rng.integers(0, 256, (size, size), dtype=np.uint8)
        out = restore_stp(patch, StpParams(scale=scale))
        assert out.shape == (size * scale, size * scale)
        assert out.dtype == np.uint8

    def test_constant_patch_constant_output(self):
        patch = np.full((25, 25), 255, np.uint8)
        out = restore_stp(patch, StpParams(scale=4))
        assert (out == 255).all()
        dark = np.full((25, 25), 0, np.uint8)
        assert len(np.unique(restore_stp(dark, StpParams(scale=4)))) == 1

    def test_line_art_sharper_than_bicubic(self):
        patch = one_px_line_art(50)
        restored = restore_stp(patch, StpParams(scale=4))
        baseline = bicubic_upscale(patch, 4)
        assert mean_gradient_magnitude(restored) >= mean_gradient_magnitude(baseline)

    def test_deterministic(self):
        rng = np.random.default_rng(77)
        patch = rng.integers(0, 256, (40, 40), dtype=np.uint8)
        a = restore_stp(patch)
        b = restore_stp(patch)
        assert np.array_equal(a, b)

    def test_intensities_stay_in_range_every_stage(self):
        rng = np.random.default_rng(5)
        patch = rng.integers(0, 256, (30, 30), dtype=np.uint8)
        params = StpParams(scale=2)
        for step in (StpStep.DENOISE, StpStep.STRETCH, StpStep.SHARPEN, StpStep.UPSCALE):
            patch = stp_step(patch, step, params)
            assert patch.dtype == np.uint8
            assert patch.min() >= 0 and patch.max() <= 255
