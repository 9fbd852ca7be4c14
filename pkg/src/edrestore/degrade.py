"""Seeded synthetic quality degradation for building paired low/high-quality
training corpora.

A recipe is a fully explicit, JSON-serializable stage list: a first round
of optional blur / downsample / noise / JPEG stages (always in that order,
with the downsample mandatory), extra rounds of blur+downsample, and an
optional final sinc filter that simulates ringing artifacts. Applying the
same recipe to the same image is byte-identical across runs.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import cv2
import numpy as np
from scipy import special

from .errors import ConfigError, TooSmallError
from .raster import GrayImage, ensure_gray, load_gray, save_png

MIN_DIMENSION = 8


class StageKind(str, enum.Enum):
    BLUR = "blur"
    DOWNSAMPLE = "downsample"
    NOISE = "noise"
    JPEG = "jpeg"
    SINC = "sinc"


FIRST_ROUND_ORDER = (StageKind.BLUR, StageKind.DOWNSAMPLE, StageKind.NOISE, StageKind.JPEG)


@dataclass(frozen=True)
class DegradationStage:
    """One degradation operation with its numeric parameters."""

    kind: StageKind
    params: dict

    def validate(self) -> None:
        p = self.params
        if self.kind is StageKind.BLUR:
            size = p.get("size", 0)
            if size < 3 or size % 2 == 0:
                raise ConfigError(f"blur kernel size must be odd and >= 3, got {size}")
            if p.get("sigma_x", 0) <= 0 or p.get("sigma_y", 0) <= 0:
                raise ConfigError("blur sigmas must be positive")
        elif self.kind is StageKind.DOWNSAMPLE:
            if int(p.get("ratio", 0)) <= 1:
                raise ConfigError(f"downsample ratio must be > 1, got {p.get('ratio')}")
        elif self.kind is StageKind.NOISE:
            if p.get("noise") == "gaussian":
                if p.get("sigma", 0) <= 0:
                    raise ConfigError("gaussian noise sigma must be positive")
            elif p.get("noise") == "poisson":
                if p.get("scale", 0) <= 0:
                    raise ConfigError("poisson noise scale must be positive")
            else:
                raise ConfigError(f"unknown noise kind {p.get('noise')!r}")
        elif self.kind is StageKind.JPEG:
            q = p.get("quality", 0)
            if not 1 <= q <= 100:
                raise ConfigError(f"jpeg quality must be in [1, 100], got {q}")
        elif self.kind is StageKind.SINC:
            cutoff = p.get("cutoff", 0.0)
            if not 0 < cutoff <= math.pi:
                raise ConfigError(f"sinc cutoff must be in (0, pi], got {cutoff}")
            size = p.get("size", 0)
            if size < 3 or size % 2 == 0:
                raise ConfigError(f"sinc kernel size must be odd and >= 3, got {size}")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationStage":
        stage = cls(kind=StageKind(d["kind"]), params=dict(d["params"]))
        stage.validate()
        return stage


@dataclass
class DegradationRecipe:
    """Explicit degradation plan: seed, first round, extra rounds, final sinc."""

    seed: int
    first_round: list[DegradationStage] = field(default_factory=list)
    extra_rounds: list[list[DegradationStage]] = field(default_factory=list)
    final_sinc: DegradationStage | None = None

    @property
    def orders(self) -> int:
        return 1 + len(self.extra_rounds)

    @property
    def downsample_product(self) -> int:
        ratios = [
            int(s.params["ratio"])
            for s in self.all_stages()
            if s.kind is StageKind.DOWNSAMPLE
        ]
        return int(np.prod(ratios)) if ratios else 1

    def all_stages(self) -> list[DegradationStage]:
        stages = list(self.first_round)
        for rnd in self.extra_rounds:
            stages.extend(rnd)
        if self.final_sinc is not None:
            stages.append(self.final_sinc)
        return stages

    def validate(self) -> None:
        kinds = [s.kind for s in self.first_round]
        order = [k for k in FIRST_ROUND_ORDER if k in kinds]
        if kinds != order or len(kinds) != len(set(kinds)):
            raise ConfigError(
                "first round must list blur, downsample, noise, jpeg at most once, in order"
            )
        if StageKind.DOWNSAMPLE not in kinds:
            raise ConfigError("first round must contain the mandatory downsample")
        for rnd in self.extra_rounds:
            rkinds = [s.kind for s in rnd]
            if not rnd or any(k not in (StageKind.BLUR, StageKind.DOWNSAMPLE) for k in rkinds):
                raise ConfigError("extra rounds may contain only blur and downsample stages")
            expected = [k for k in (StageKind.BLUR, StageKind.DOWNSAMPLE) if k in rkinds]
            if rkinds != expected:
                raise ConfigError("extra-round stages must be blur before downsample, once each")
        for stage in self.all_stages():
            stage.validate()
        if self.final_sinc is not None and self.final_sinc.kind is not StageKind.SINC:
            raise ConfigError("final stage must be a sinc filter")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "first_round": [s.to_dict() for s in self.first_round],
            "extra_rounds": [[s.to_dict() for s in rnd] for rnd in self.extra_rounds],
            "final_sinc": self.final_sinc.to_dict() if self.final_sinc else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationRecipe":
        recipe = cls(
            seed=int(d["seed"]),
            first_round=[DegradationStage.from_dict(s) for s in d["first_round"]],
            extra_rounds=[
                [DegradationStage.from_dict(s) for s in rnd] for rnd in d["extra_rounds"]
            ],
            final_sinc=(
                DegradationStage.from_dict(d["final_sinc"]) if d.get("final_sinc") else None
            ),
        )
        recipe.validate()
        return recipe


@dataclass(frozen=True)
class DegradeConfig:
    """Sampling ranges and stage probabilities for recipe generation."""

    min_orders: int = 1
    max_orders: int = 5
    blur_prob: float = 0.8
    noise_prob: float = 0.5
    jpeg_prob: float = 0.7
    sinc_prob: float = 0.8
    aniso_prob: float = 0.25
    blur_sigma: tuple[float, float] = (0.4, 2.4)
    kernel_sizes: tuple[int, int] = (7, 21)
    first_ratios: tuple[int, ...] = (2, 3, 4)
    extra_ratios: tuple[int, ...] = (1, 2)
    poisson_prob: float = 0.3
    noise_sigma: tuple[float, float] = (1.0, 10.0)
    poisson_scale: tuple[float, float] = (50.0, 300.0)
    jpeg_quality: tuple[int, int] = (30, 95)
    sinc_cutoff: tuple[float, float] = (math.pi / 3, math.pi)
    final_scale: int = 4
    # When set, generated lq images are resized to hq/final_scale so one
    # dataset shares a single magnification; otherwise they keep the size
    # produced by the recipe's own downsample ratios.
    normalize_scale: bool = False

    def validate(self) -> None:
        if not 1 <= self.min_orders <= self.max_orders:
            raise ConfigError(
                f"need 1 <= min_orders <= max_orders, got ({self.min_orders}, {self.max_orders})"
            )
        for name in ("blur_prob", "noise_prob", "jpeg_prob", "sinc_prob",
                     "aniso_prob", "poisson_prob"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        for name in ("blur_sigma", "noise_sigma", "poisson_scale", "sinc_cutoff"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi < lo:
                raise ConfigError(f"{name} range invalid: ({lo}, {hi})")
        klo, khi = self.kernel_sizes
        if klo < 3 or khi < klo or klo % 2 == 0 or khi % 2 == 0:
            raise ConfigError(f"kernel_sizes must be odd and increasing, got ({klo}, {khi})")
        if any(r < 2 for r in self.first_ratios) or not self.first_ratios:
            raise ConfigError("first_ratios must be integers >= 2")
        if any(r < 1 for r in self.extra_ratios) or not self.extra_ratios:
            raise ConfigError("extra_ratios must be integers >= 1")
        qlo, qhi = self.jpeg_quality
        if not 1 <= qlo <= qhi <= 100:
            raise ConfigError(f"jpeg_quality range invalid: ({qlo}, {qhi})")
        if self.sinc_cutoff[1] > math.pi:
            raise ConfigError("sinc cutoff cannot exceed pi")
        if self.final_scale < 1:
            raise ConfigError("final_scale must be >= 1")


def _sample_odd(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.choice(np.arange(lo, hi + 1, 2)))


def _sample_blur(rng: np.random.Generator, config: DegradeConfig) -> DegradationStage:
    size = _sample_odd(rng, *config.kernel_sizes)
    sigma_x = float(rng.uniform(*config.blur_sigma))
    if rng.random() < config.aniso_prob:
        sigma_y = float(rng.uniform(*config.blur_sigma))
        theta = float(rng.uniform(0.0, math.pi))
    else:
        sigma_y, theta = sigma_x, 0.0
    return DegradationStage(
        StageKind.BLUR,
        {"size": size, "sigma_x": sigma_x, "sigma_y": sigma_y, "theta": theta},
    )


def _sample_noise(rng: np.random.Generator, config: DegradeConfig) -> DegradationStage:
    if rng.random() < config.poisson_prob:
        return DegradationStage(
            StageKind.NOISE,
            {"noise": "poisson", "scale": float(rng.uniform(*config.poisson_scale))},
        )
    return DegradationStage(
        StageKind.NOISE,
        {"noise": "gaussian", "sigma": float(rng.uniform(*config.noise_sigma))},
    )


def sample_recipe(seed: int, config: DegradeConfig | None = None) -> DegradationRecipe:
    """Draw a recipe deterministically from (seed, config)."""
    config = config or DegradeConfig()
    config.validate()
    rng = np.random.default_rng(seed)
    orders = int(rng.integers(config.min_orders, config.max_orders + 1))

    first: list[DegradationStage] = []
    if rng.random() < config.blur_prob:
        first.append(_sample_blur(rng, config))
    first.append(
        DegradationStage(StageKind.DOWNSAMPLE, {"ratio": int(rng.choice(config.first_ratios))})
    )
    if rng.random() < config.noise_prob:
        first.append(_sample_noise(rng, config))
    if rng.random() < config.jpeg_prob:
        qlo, qhi = config.jpeg_quality
        first.append(
            DegradationStage(StageKind.JPEG, {"quality": int(rng.integers(qlo, qhi + 1))})
        )

    extra: list[list[DegradationStage]] = []
    for _ in range(orders - 1):
        rnd = [_sample_blur(rng, config)]
        ratio = int(rng.choice(config.extra_ratios))
        if ratio > 1:
            rnd.append(DegradationStage(StageKind.DOWNSAMPLE, {"ratio": ratio}))
        extra.append(rnd)

    final_sinc = None
    if rng.random() < config.sinc_prob:
        final_sinc = DegradationStage(
            StageKind.SINC,
            {
                "cutoff": float(rng.uniform(*config.sinc_cutoff)),
                "size": _sample_odd(rng, *config.kernel_sizes),
            },
        )

    recipe = DegradationRecipe(
        seed=seed, first_round=first, extra_rounds=extra, final_sinc=final_sinc
    )
    recipe.validate()
    return recipe


def gaussian_kernel(size: int, sigma_x: float, sigma_y: float, theta: float) -> np.ndarray:
    """Rotated anisotropic Gaussian kernel, normalized to sum 1."""
    r = size // 2
    y, x = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    ct, st = math.cos(theta), math.sin(theta)
    u = ct * x + st * y
    v = -st * x + ct * y
    k = np.exp(-0.5 * ((u / sigma_x) ** 2 + (v / sigma_y) ** 2))
    return k / k.sum()


def sinc_kernel(cutoff: float, size: int) -> np.ndarray:
    """Circular-symmetric low-pass (windowed-sinc) kernel, normalized."""
    r = size // 2
    y, x = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    rad = np.hypot(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = cutoff * special.j1(cutoff * rad) / (2.0 * math.pi * rad)
    k[r, r] = cutoff * cutoff / (4.0 * math.pi)
    return k / k.sum()


def area_downsample(img: GrayImage, ratio: int) -> GrayImage:
    """Block-average downsample by an integer ratio; output dims floor(d/r)."""
    img = ensure_gray(img)
    h, w = img.shape
    nh, nw = h // ratio, w // ratio
    if nh < MIN_DIMENSION or nw < MIN_DIMENSION:
        raise TooSmallError(
            f"downsampling {w}x{h} by {ratio} would go below {MIN_DIMENSION} px"
        )
    v = img[: nh * ratio, : nw * ratio].astype(np.float64)
    v = v.reshape(nh, ratio, nw, ratio).mean(axis=(1, 3))
    return np.floor(v + 0.5).astype(np.uint8)


def _convolve(img: GrayImage, kernel: np.ndarray) -> GrayImage:
    out = cv2.filter2D(
        img.astype(np.float64), -1, kernel, borderType=cv2.BORDER_REFLECT
    )
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def apply_stage(
    img: GrayImage, stage: DegradationStage, rng: np.random.Generator | None = None
) -> GrayImage:
    """Apply one degradation stage. Noise stages draw from ``rng``."""
    stage.validate()
    img = ensure_gray(img)
    p = stage.params
    if stage.kind is StageKind.BLUR:
        return _convolve(
            img, gaussian_kernel(int(p["size"]), p["sigma_x"], p["sigma_y"], p.get("theta", 0.0))
        )
    if stage.kind is StageKind.DOWNSAMPLE:
        return area_downsample(img, int(p["ratio"]))
    if stage.kind is StageKind.NOISE:
        if rng is None:
            raise ConfigError("noise stage needs an rng state")
        f = img.astype(np.float64)
        if p["noise"] == "gaussian":
            f = f + rng.normal(0.0, p["sigma"], size=f.shape)
        else:
            scale = p["scale"]
            f = rng.poisson(f / 255.0 * scale).astype(np.float64) / scale * 255.0
        return np.clip(np.floor(f + 0.5), 0, 255).astype(np.uint8)
    if stage.kind is StageKind.JPEG:
        ok, enc = cv2.imencode(".jpg", img, [cv2.IMWRITE_JPEG_QUALITY, int(p["quality"])])
        if not ok:
            raise ConfigError("jpeg encoding failed")
        return cv2.imdecode(enc, cv2.IMREAD_GRAYSCALE)
    if stage.kind is StageKind.SINC:
        return _convolve(img, sinc_kernel(p["cutoff"], int(p["size"])))
    raise ConfigError(f"unknown stage kind {stage.kind}")


def degrade(img: GrayImage, recipe: DegradationRecipe) -> GrayImage:
    """Run the full recipe; deterministic given (image, recipe)."""
    recipe.validate()
    rng = np.random.default_rng(recipe.seed)
    out = ensure_gray(img)
    for stage in recipe.first_round:
        out = apply_stage(out, stage, rng)
    for rnd in recipe.extra_rounds:
        for stage in rnd:
            out = apply_stage(out, stage, rng)
    if recipe.final_sinc is not None:
        out = apply_stage(out, recipe.final_sinc, rng)
    return out


def rescale_to(img: GrayImage, size: tuple[int, int]) -> GrayImage:
    """Resize to (height, width): area averaging down, bicubic up."""
    img = ensure_gray(img)
    h, w = img.shape
    th, tw = size
    if (th, tw) == (h, w):
        return img.copy()
    interp = cv2.INTER_AREA if th * tw < h * w else cv2.INTER_CUBIC
    return cv2.resize(img, (tw, th), interpolation=interp)


def degrade_to_scale(
    img: GrayImage, recipe: DegradationRecipe, final_scale: int
) -> GrayImage:
    """Degrade, then normalize the output to 1/final_scale of the input size
    so every low-quality image in a dataset shares the same magnification."""
    img = ensure_gray(img)
    lq = degrade(img, recipe)
    h, w = img.shape
    if h // final_scale < MIN_DIMENSION or w // final_scale < MIN_DIMENSION:
        raise TooSmallError(f"final scale {final_scale} shrinks {w}x{h} below minimum")
    return rescale_to(lq, (h // final_scale, w // final_scale))


def _pair_seed(seed: int, image_index: int) -> int:
    return int(np.random.SeedSequence([seed, image_index]).generate_state(1)[0])


def generate_pairs(
    hq_dir: str | Path,
    out_dir: str | Path,
    seeds: list[int],
    config: DegradeConfig | None = None,
    jobs: int = 1,
) -> dict:
    """Build a paired (lq, hq) corpus plus a manifest that can regenerate it.

    Every HQ image is cropped to a multiple of ``final_scale``, written to
    ``out_dir/hq``, and degraded once per seed into ``out_dir/lq``. The
    manifest records each pair's source, seed, full recipe and dimensions.
    """
    config = config or DegradeConfig()
    config.validate()
    hq_dir = Path(hq_dir)
    out_dir = Path(out_dir)
    paths = sorted(
        p for p in hq_dir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not paths:
        raise FileNotFoundError(f"no readable images in {hq_dir}")

    tasks = []
    s = config.final_scale
    for idx, path in enumerate(paths):
        try:
            hq = load_gray(path)
        except Exception as exc:
            raise IOError(f"failed to read HQ image {path}: {exc}") from exc
        h, w = hq.shape
        hq = hq[: (h // s) * s, : (w // s) * s]
        if hq.shape[0] // s < MIN_DIMENSION or hq.shape[1] // s < MIN_DIMENSION:
            raise TooSmallError(f"{path} is too small for final scale {s}")
        save_png(out_dir / "hq" / f"{path.stem}.png", hq)
        for seed in seeds:
            tasks.append((idx, path, hq, seed))

    def run_task(task):
        idx, path, hq, seed = task
        recipe = sample_recipe(_pair_seed(seed, idx), config)
        if config.normalize_scale:
            lq = degrade_to_scale(hq, recipe, s)
        else:
            lq = degrade(hq, recipe)
        lq_name = f"{path.stem}_s{seed}.png"
        save_png(out_dir / "lq" / lq_name, lq)
        return {
            "source": str(path),
            "hq": f"hq/{path.stem}.png",
            "lq": f"lq/{lq_name}",
            "seed": seed,
            "recipe": recipe.to_dict(),
            "hq_size": [int(hq.shape[0]), int(hq.shape[1])],
            "lq_size": [int(lq.shape[0]), int(lq.shape[1])],
            "final_scale": s,
            "normalized": config.normalize_scale,
        }

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(run_task, tasks))
    else:
        pairs = [run_task(t) for t in tasks]

    manifest = {"config": asdict(config), "pairs": pairs}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    return manifest


def regenerate_pairs(manifest_path: str | Path, out_dir: str | Path, jobs: int = 1) -> None:
    """Rebuild every lq image of a manifest byte-identically from its recipe."""
    manifest_path = Path(manifest_path)
    out_dir = Path(out_dir)
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)

    def run_pair(pair):
        hq = load_gray(pair["source"])
        s = int(pair["final_scale"])
        hq = hq[: (hq.shape[0] // s) * s, : (hq.shape[1] // s) * s]
        recipe = DegradationRecipe.from_dict(pair["recipe"])
        if pair.get("normalized"):
            lq = degrade_to_scale(hq, recipe, s)
        else:
            lq = degrade(hq, recipe)
        save_png(out_dir / pair["lq"], lq)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(run_pair, manifest["pairs"]))
    else:
        for pair in manifest["pairs"]:
            run_pair(pair)
