"""Synthetic degradation: stages, recipes, determinism, corpus generation."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from edrestore.degrade import (
    DegradationRecipe,
    DegradationStage,
    DegradeConfig,
    StageKind,
    apply_stage,
    area_downsample,
    degrade,
    degrade_to_scale,
    gaussian_kernel,
    generate_pairs,
    regenerate_pairs,
    sample_recipe,
    sinc_kernel,
)
from edrestore.errors import ConfigError, TooSmallError
from edrestore.raster import save_png

from conftest import make_line_art


def blur_stage(size=7, sigma=1.2):
    return DegradationStage(
        StageKind.BLUR, {"size": size, "sigma_x": sigma, "sigma_y": sigma, "theta": 0.0}
    )


def down_stage(ratio):
    return DegradationStage(StageKind.DOWNSAMPLE, {"ratio": ratio})


def area_average_oracle(img: np.ndarray, r: int) -> np.ndarray:
    """Independent block-mean computation with explicit loops."""
    nh, nw = img.shape[0] // r, img.shape[1] // r
    out = np.zeros((nh, nw), np.uint8)
    for i in range(nh):
        for j in range(nw):
            block = img[i * r : (i + 1) * r, j * r : (j + 1) * r].astype(np.float64)
            out[i, j] = math.floor(block.mean() + 0.5)
    return out


class TestStages:
    def test_downsample_dimensions(self):
        img = np.zeros((200, 200), np.uint8)
        assert apply_stage(img, down_stage(4)).shape == (50, 50)

    def test_downsample_matches_area_average_oracle(self, line_art):
        for r in (2, 3, 4):
            assert np.array_equal(area_downsample(line_art, r), area_average_oracle(line_art, r))

    def test_downsample_too_small(self):
        with pytest.raises(TooSmallError):
            area_downsample(np.zeros((20, 20), np.uint8), 3)

    def test_delta_kernel_blur_is_identity(self, line_art):
        stage = DegradationStage(
            StageKind.BLUR, {"size": 7, "sigma_x": 1e-6, "sigma_y": 1e-6, "theta": 0.0}
        )
        # A near-zero sigma concentrates the kernel in its center cell.
        assert np.array_equal(apply_stage(line_art, stage), line_art)

    def test_gaussian_kernel_normalized_and_symmetric(self):
        k = gaussian_kernel(9, 1.5, 1.5, 0.0)
        assert k.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(k, k.T)
        aniso = gaussian_kernel(9, 2.0, 0.5, 0.6)
        assert aniso.sum() == pytest.approx(1.0, abs=1e-12)

    def test_blur_preserves_constant(self):
        img = np.full((32, 32), 131, np.uint8)
        assert np.array_equal(apply_stage(img, blur_stage()), img)

    def test_jpeg_roundtrip_error_small_at_high_quality(self, line_art):
        q95 = apply_stage(line_art, DegradationStage(StageKind.JPEG, {"quality": 95}))
        q10 = apply_stage(line_art, DegradationStage(StageKind.JPEG, {"quality": 10}))
        d95 = np.abs(q95.astype(int) - line_art.astype(int))
        d10 = np.abs(q10.astype(int) - line_art.astype(int))
        assert d95.max() <= 12
        assert d10.mean() > d95.mean()

    def test_noise_needs_rng_and_is_seed_deterministic(self, line_art):
        stage = DegradationStage(StageKind.NOISE, {"noise": "gaussian", "sigma": 5.0})
        with pytest.raises(ConfigError):
            apply_stage(line_art, stage)
        a = apply_stage(line_art, stage, np.random.default_rng(9))
        b = apply_stage(line_art, stage, np.random.default_rng(9))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, line_art)

    def test_poisson_noise_clamped(self, line_art):
        stage = DegradationStage(StageKind.NOISE, {"noise": "poisson", "scale": 60.0})
        out = apply_stage(line_art, stage, np.random.default_rng(3))
        assert out.dtype == np.uint8

    def test_sinc_kernel_normalized(self):
        for cutoff in (math.pi / 3, math.pi / 2, math.pi):
            k = sinc_kernel(cutoff, 13)
            assert k.sum() == pytest.approx(1.0, abs=1e-12)

    def test_sinc_rings_near_edges(self, line_art):
        stage = DegradationStage(StageKind.SINC, {"cutoff": math.pi / 3, "size": 13})
        out = apply_stage(line_art, stage)
        assert not np.array_equal(out, line_art)

    def test_stage_validation(self):
        with pytest.raises(ConfigError):
            DegradationStage(StageKind.BLUR, {"size": 6, "sigma_x": 1, "sigma_y": 1}).validate()
        with pytest.raises(ConfigError):
            DegradationStage(StageKind.DOWNSAMPLE, {"ratio": 1}).validate()
        with pytest.raises(ConfigError):
            DegradationStage(StageKind.JPEG, {"quality": 0}).validate()
        with pytest.raises(ConfigError):
            DegradationStage(StageKind.SINC, {"cutoff": 4.0, "size": 13}).validate()
        with pytest.raises(ConfigError):
            DegradationStage(StageKind.NOISE, {"noise": "salt"}).validate()


class TestSampleRecipe:
    def test_deterministic(self):
        cfg = DegradeConfig()
        a = sample_recipe(1234, cfg)
        b = sample_recipe(1234, cfg)
        assert a.to_dict() == b.to_dict()

    def test_orders_within_config_bounds(self):
        cfg = DegradeConfig(max_orders=5)
        orders = {sample_recipe(seed, cfg).orders for seed in range(200)}
        assert orders <= set(range(1, 6))
        assert min(orders) == 1 and max(orders) == 5

    def test_zero_probabilities_leave_only_mandatory_downsample(self):
        cfg = DegradeConfig(
            blur_prob=0.0, noise_prob=0.0, jpeg_prob=0.0, sinc_prob=0.0,
            min_orders=1, max_orders=1,
        )
        recipe = sample_recipe(7, cfg)
        assert len(recipe.first_round) == 1
        assert recipe.first_round[0].kind is StageKind.DOWNSAMPLE
        assert recipe.extra_rounds == [] and recipe.final_sinc is None

    def test_first_round_order_invariant(self):
        for seed in range(100):
            recipe = sample_recipe(seed, DegradeConfig())
            kinds = [s.kind for s in recipe.first_round]
            expected = [
                k
                for k in (StageKind.BLUR, StageKind.DOWNSAMPLE, StageKind.NOISE, StageKind.JPEG)
                if k in kinds
            ]
            assert kinds == expected
            for rnd in recipe.extra_rounds:
                assert [s.kind for s in rnd] in (
                    [StageKind.BLUR],
                    [StageKind.BLUR, StageKind.DOWNSAMPLE],
                )

    def test_sampled_params_within_ranges(self):
        cfg = DegradeConfig()
        for seed in range(60):
            recipe = sample_recipe(seed, cfg)
            for stage in recipe.all_stages():
                p = stage.params
                if stage.kind is StageKind.BLUR:
                    assert cfg.kernel_sizes[0] <= p["size"] <= cfg.kernel_sizes[1]
                    assert cfg.blur_sigma[0] <= p["sigma_x"] <= cfg.blur_sigma[1]
                elif stage.kind is StageKind.JPEG:
                    assert cfg.jpeg_quality[0] <= p["quality"] <= cfg.jpeg_quality[1]
                elif stage.kind is StageKind.SINC:
                    assert cfg.sinc_cutoff[0] <= p["cutoff"] <= cfg.sinc_cutoff[1]

    def test_json_roundtrip(self):
        recipe = sample_recipe(99, DegradeConfig())
        clone = DegradationRecipe.from_dict(json.loads(json.dumps(recipe.to_dict())))
        assert clone.to_dict() == recipe.to_dict()

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            DegradeConfig(min_orders=3, max_orders=2).validate()
        with pytest.raises(ConfigError):
            DegradeConfig(blur_prob=1.5).validate()
        with pytest.raises(ConfigError):
            DegradeConfig(kernel_sizes=(8, 20)).validate()
        with pytest.raises(ConfigError):
            DegradeConfig(sinc_cutoff=(1.0, 4.0)).validate()


class TestDegrade:
    def test_single_downsample_matches_oracle(self, line_art):
        recipe = DegradationRecipe(seed=0, first_round=[down_stage(4)])
        out = degrade(line_art, recipe)
        assert out.shape == (line_art.shape[0] // 4, line_art.shape[1] // 4)
        assert np.array_equal(out, area_average_oracle(line_art, 4))

    def test_byte_identical_across_runs(self, tmp_path, line_art):
        recipe = sample_recipe(5, DegradeConfig(max_orders=2))
        a_path, b_path = tmp_path / "a.png", tmp_path / "b.png"
        save_png(a_path, degrade(line_art, recipe))
        save_png(b_path, degrade(line_art, recipe))
        assert a_path.read_bytes() == b_path.read_bytes()

    def test_dimension_algebra_composed_floors(self):
        img = make_line_art(341, 257, seed=8)
        recipe = DegradationRecipe(
            seed=1,
            first_round=[blur_stage(), down_stage(3)],
            extra_rounds=[[blur_stage(9, 0.8), down_stage(2)]],
        )
        out = degrade(img, recipe)
        assert out.shape == ((341 // 3) // 2, (257 // 3) // 2)

    def test_recipe_structure_validated(self):
        bad = DegradationRecipe(seed=0, first_round=[down_stage(2), blur_stage()])
        with pytest.raises(ConfigError):
            bad.validate()
        missing = DegradationRecipe(seed=0, first_round=[blur_stage()])
        with pytest.raises(ConfigError):
            missing.validate()
        bad_extra = DegradationRecipe(
            seed=0,
            first_round=[down_stage(2)],
            extra_rounds=[[DegradationStage(StageKind.JPEG, {"quality": 50})]],
        )
        with pytest.raises(ConfigError):
            bad_extra.validate()

    def test_too_small_propagates(self):
        img = np.zeros((28, 28), np.uint8)  # 28 // 4 = 7 < minimum of 8
        recipe = DegradationRecipe(seed=0, first_round=[down_stage(4)])
        with pytest.raises(TooSmallError):
            degrade(img, recipe)

    def test_degrade_to_scale_fixed_output_size(self, line_art):
        for seed in (1, 2, 3):
            recipe = sample_recipe(seed, DegradeConfig(min_orders=1, max_orders=2))
            out = degrade_to_scale(line_art, recipe, 4)
            assert out.shape == (line_art.shape[0] // 4, line_art.shape[1] // 4)


class TestGeneratePairs:
    @pytest.fixture
    def hq_dir(self, tmp_path):
        d = tmp_path / "hq_src"
        d.mkdir()
        for i in range(3):
            save_png(d / f"draw{i}.png", make_line_art(200, 160, seed=i))
        return d

    def test_pair_and_record_counts(self, hq_dir, tmp_path):
        out = tmp_path / "ds"
        manifest = generate_pairs(hq_dir, out, seeds=[0, 1], config=DegradeConfig(max_orders=2))
        assert len(manifest["pairs"]) == 6
        assert len(list((out / "lq").glob("*.png"))) == 6
        assert len(list((out / "hq").glob("*.png"))) == 3
        assert (out / "manifest.json").exists()

    def test_lq_dims_are_composed_floor_divisions(self, hq_dir, tmp_path):
        manifest = generate_pairs(
            hq_dir, tmp_path / "ds", seeds=[3], config=DegradeConfig(max_orders=2)
        )
        for pair in manifest["pairs"]:
            recipe = DegradationRecipe.from_dict(pair["recipe"])
            h, w = pair["hq_size"]
            for stage in recipe.all_stages():
                if stage.kind is StageKind.DOWNSAMPLE:
                    r = int(stage.params["ratio"])
                    h, w = h // r, w // r
            assert pair["lq_size"] == [h, w]

    def test_normalized_mode_shares_magnification(self, hq_dir, tmp_path):
        cfg = DegradeConfig(max_orders=2, normalize_scale=True, final_scale=4)
        manifest = generate_pairs(hq_dir, tmp_path / "ds", seeds=[0, 5], config=cfg)
        for pair in manifest["pairs"]:
            h, w = pair["hq_size"]
            assert pair["lq_size"] == [h // 4, w // 4]
            assert pair["normalized"] is True

    def test_regeneration_byte_identical(self, hq_dir, tmp_path):
        out = tmp_path / "ds"
        generate_pairs(hq_dir, out, seeds=[0, 1], config=DegradeConfig(max_orders=2))
        redo = tmp_path / "redo"
        regenerate_pairs(out / "manifest.json", redo)
        for lq in sorted((out / "lq").glob("*.png")):
            assert (redo / "lq" / lq.name).read_bytes() == lq.read_bytes()

    def test_parallel_generation_matches_serial(self, hq_dir, tmp_path):
        cfg = DegradeConfig(max_orders=2)
        m1 = generate_pairs(hq_dir, tmp_path / "s1", seeds=[0, 1], config=cfg, jobs=1)
        m8 = generate_pairs(hq_dir, tmp_path / "s8", seeds=[0, 1], config=cfg, jobs=8)
        assert m1["pairs"] == [
            {**p, "lq": p["lq"]} for p in m8["pairs"]
        ]
        for lq in sorted((tmp_path / "s1" / "lq").glob("*.png")):
            assert (tmp_path / "s8" / "lq" / lq.name).read_bytes() == lq.read_bytes()

    def test_empty_dir_rejected(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        with pytest.raises(FileNotFoundError):
            generate_pairs(empty, tmp_path / "out", seeds=[0])
