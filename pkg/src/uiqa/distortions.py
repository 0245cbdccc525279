"""Synthetic underwater distortions and distorted-dataset generation.

Six distortion kinds are provided, each with a table of severity levels:

1. channel      per-channel attenuation, red attenuated most
2. contrast     linear scaling toward the per-channel mean
3. illumination global brightness gain, dark and bright levels interleaved
4. motion_blur  line kernel at a seeded angle
5. fg_bg        blur + contrast loss restricted to foreground or background
6. ocean_snow   seeded bright particles

Every stochastic choice is drawn from the seed carried by the spec, so a
(image, spec) pair always produces the same bytes.
"""

from __future__ import annotations

import copy
import hashlib
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage

from .image import ImageBuffer, load_image, quantize, save_image
from .manifest import DatasetManifest, ManifestEntry

log = logging.getLogger(__name__)

Box = tuple[int, int, int, int]  # x, y, width, height


class DistortionKind(IntEnum):
    CHANNEL = 1
    CONTRAST = 2
    ILLUMINATION = 3
    MOTION_BLUR = 4
    FG_BG = 5
    OCEAN_SNOW = 6

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: Any) -> DistortionKind:
        if isinstance(value, DistortionKind):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip().lower()
        if text.startswith("type") and text[4:].isdigit():
            return cls(int(text[4:]))
        for kind in cls:
            if kind.label == text:
                return kind
        raise ValueError(f"unknown distortion kind {value!r}")


FG_BG_BASE_BLUR = 9
FG_BG_BASE_CONTRAST = 0.5
SNOW_RADIUS_RANGE = (1.0, 3.0)
SNOW_LIFT = 0.4

# Per-level parameter tables. Illumination levels alternate dark/bright with
# growing deviation so that level order is severity order.
DEFAULT_LEVELS: dict[DistortionKind, list[dict[str, Any]]] = {
    DistortionKind.CHANNEL: [
        {"gains": [0.85, 0.95, 1.0]},
        {"gains": [0.65, 0.90, 1.0]},
        {"gains": [0.45, 0.85, 1.0]},
        {"gains": [0.25, 0.80, 1.0]},
    ],
    DistortionKind.CONTRAST: [{"factor": c} for c in (0.8, 0.6, 0.4, 0.2)],
    DistortionKind.ILLUMINATION: [{"gain": g} for g in (0.75, 1.35, 0.5, 1.7)],
    DistortionKind.MOTION_BLUR: [{"length": n} for n in (5, 9, 13, 17)],
    DistortionKind.FG_BG: [
        {"target": "foreground", "strength": 1.0},
        {"target": "foreground", "strength": 1.6},
        {"target": "background", "strength": 1.0},
        {"target": "background", "strength": 1.6},
    ],
    DistortionKind.OCEAN_SNOW: [{"density": d} for d in (150, 400)],
}


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Per-pixel foreground weights in [0, 1], shape (height, width)."""

    weights: np.ndarray
    boxes: tuple[Box, ...] = ()
    feather: float = 0.0

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 2:
            raise ValueError("region weights must be a 2-D array")
        if not np.all((w >= 0.0) & (w <= 1.0)):
            raise ValueError("region weights must lie in [0, 1]")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def height(self) -> int:
        return self.weights.shape[0]

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    def to_json(self) -> dict[str, Any]:
        return {"boxes": [list(b) for b in self.boxes], "feather": self.feather}


def region_mask_from_boxes(
    boxes: Sequence[Sequence[int]], dims: tuple[int, int], feather: float = 0.0
) -> RegionMask:
    """Rasterize (x, y, w, h) boxes into a mask with a linear feather band.

    ``dims`` is (width, height). Pixels inside any box get weight 1; pixels
    at Euclidean distance d from the box union get ``max(0, 1 - d / feather)``.
    """
    width, height = dims
    if feather < 0:
        raise ValueError(f"feather must be >= 0, got {feather}")
    inside = np.zeros((height, width), dtype=bool)
    norm: list[Box] = []
    for box in boxes:
        x, y, w, h = (int(v) for v in box)
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > width or y + h > height:
            raise ValueError(f"box {tuple(box)} lies outside the {width}x{height} image")
        inside[y : y + h, x : x + w] = True
        norm.append((x, y, w, h))
    weights = inside.astype(np.float64)
    if feather > 0 and inside.any() and not inside.all():
        dist = ndimage.distance_transform_edt(~inside)
        weights = np.clip(1.0 - dist / feather, 0.0, 1.0)
        weights[inside] = 1.0
    return RegionMask(weights, tuple(norm), float(feather))


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    kind: DistortionKind
    level: int
    params: dict[str, Any] = field(default_factory=dict)
    region: Optional[RegionMask] = None
    seed: int = 0

    def __post_init__(self) -> None:
        kind = DistortionKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.level) < 1:
            raise ValueError(f"level must be >= 1, got {self.level}")
        if not self.params and self.level > len(DEFAULT_LEVELS[kind]):
            raise ValueError(
                f"level {self.level} out of range for {kind.label} "
                f"({len(DEFAULT_LEVELS[kind])} levels configured)"
            )
        if (kind is DistortionKind.FG_BG) != (self.region is not None):
            raise ValueError("a region mask is required for fg_bg and only for fg_bg")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def resolved_params(self) -> dict[str, Any]:
        if self.params:
            return dict(self.params)
        return copy.deepcopy(DEFAULT_LEVELS[self.kind][self.level - 1])

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.label,
            "level": self.level,
            "params": self.resolved_params(),
            "seed": int(self.seed),
            "region": self.region.to_json() if self.region is not None else None,
        }


def derive_seed(master_seed: int, image_id: str, kind: DistortionKind, level: int) -> int:
    """Order-independent per-entry seed: first 8 bytes of BLAKE2b over the key."""
    key = f"{int(master_seed)}|{image_id}|{int(kind)}|{int(level)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


def motion_blur_kernel(length: float, angle: float) -> np.ndarray:
    """Normalized line kernel, sample points splatted bilinearly onto the grid."""
    if length < 1:
        raise ValueError(f"blur length must be >= 1, got {length}")
    n = int(round(length))
    half = int(math.ceil((n - 1) / 2)) + 1
    size = 2 * half + 1
    kernel = np.zeros((size, size))
    t = np.arange(n) - (n - 1) / 2.0
    xs = half + t * math.cos(angle)
    ys = half - t * math.sin(angle)
    for x, y in zip(xs, ys):
        x0, y0 = math.floor(x), math.floor(y)
        fx, fy = x - x0, y - y0
        kernel[y0, x0] += (1 - fx) * (1 - fy)
        if fx > 0:
            kernel[y0, x0 + 1] += fx * (1 - fy)
        if fy > 0:
            kernel[y0 + 1, x0] += (1 - fx) * fy
        if fx > 0 and fy > 0:
            kernel[y0 + 1, x0 + 1] += fx * fy
    return kernel / kernel.sum()


def _blur(rgb: np.ndarray, length: float, angle: float) -> np.ndarray:
    kernel = motion_blur_kernel(length, angle)
    if kernel.shape == (1, 1) or np.count_nonzero(kernel) == 1:
        return rgb.copy()
    return np.stack(
        [ndimage.correlate(rgb[..., c], kernel, mode="nearest") for c in range(rgb.shape[2])],
        axis=2,
    )


def _contrast(rgb: np.ndarray, factor: float) -> np.ndarray:
    mean = rgb.mean(axis=(0, 1), keepdims=True)
    return mean + factor * (rgb - mean)


def _seeded_angle(seed: int) -> float:
    return float(np.random.default_rng(seed).uniform(0.0, math.pi))


def _ocean_snow(rgb: np.ndarray, density: float, seed: int, lift: float,
                radius_range: tuple[float, float]) -> np.ndarray:
    h, w = rgb.shape[:2]
    rng = np.random.default_rng(seed)
    count = max(1, int(round(density * h * w / 1e6)))
    xs = rng.uniform(0, w, count)
    ys = rng.uniform(0, h, count)
    radii = rng.uniform(radius_range[0], radius_range[1], count)
    covered = np.zeros((h, w), dtype=bool)
    for cx, cy, r in zip(xs, ys, radii):
        x0, x1 = max(0, int(cx - r)), min(w, int(cx + r) + 2)
        y0, y1 = max(0, int(cy - r)), min(h, int(cy + r) + 2)
        yy, xx = np.mgrid[y0:y1, x0:x1]
        covered[y0:y1, x0:x1] |= (xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2 <= r * r
    out = rgb.copy()
    out[covered] = np.minimum(1.0, out[covered] + lift)
    return out


def apply_distortion(img: ImageBuffer, spec: DistortionSpec) -> ImageBuffer:
    if img.channels != 3:
        raise ValueError("distortions require a 3-channel image")
    p = spec.resolved_params()
    rgb = img.as_float()
    kind = spec.kind

    if kind is DistortionKind.CHANNEL:
        out = rgb * np.asarray(p["gains"], dtype=np.float64).reshape(1, 1, 3)
    elif kind is DistortionKind.CONTRAST:
        out = _contrast(rgb, float(p["factor"]))
    elif kind is DistortionKind.ILLUMINATION:
        out = rgb * float(p["gain"])
    elif kind is DistortionKind.MOTION_BLUR:
        angle = float(p["angle"]) if "angle" in p else _seeded_angle(spec.seed)
        out = _blur(rgb, float(p["length"]), angle)
    elif kind is DistortionKind.FG_BG:
        return _apply_fg_bg(img, rgb, spec, p)
    elif kind is DistortionKind.OCEAN_SNOW:
        out = _ocean_snow(
            rgb,
            float(p["density"]),
            spec.seed,
            float(p.get("lift", SNOW_LIFT)),
            tuple(p.get("radius", SNOW_RADIUS_RANGE)),  # type: ignore[arg-type]
        )
    else:  # pragma: no cover
        raise ValueError(f"unhandled distortion kind {kind}")
    return ImageBuffer.from_float(out)


def _apply_fg_bg(img: ImageBuffer, rgb: np.ndarray, spec: DistortionSpec,
                 p: Mapping[str, Any]) -> ImageBuffer:
    region = spec.region
    assert region is not None
    if (region.height, region.width) != (img.height, img.width):
        raise ValueError(
            f"region is {region.width}x{region.height}, image is {img.width}x{img.height}"
        )
    target = p.get("target", "foreground")
    if target not in ("foreground", "background"):
        raise ValueError(f"fg_bg target must be foreground or background, got {target!r}")
    strength = float(p.get("strength", 1.0))
    length = max(1, int(round(float(p.get("blur", FG_BG_BASE_BLUR)) * strength)))
    factor = float(p.get("contrast", FG_BG_BASE_CONTRAST)) ** strength

    weight = region.weights if target == "foreground" else 1.0 - region.weights
    degraded = _contrast(_blur(rgb, length, _seeded_angle(spec.seed)), factor)
    blended = weight[..., None] * degraded + (1.0 - weight[..., None]) * rgb
    out = quantize(blended)
    untouched = weight == 0.0
    out[untouched] = img.data[untouched]
    return ImageBuffer(out)


@dataclass
class DistortionConfig:
    """Level tables per kind plus the feather used for fg_bg masks."""

    levels: dict[DistortionKind, list[dict[str, Any]]] = field(
        default_factory=lambda: copy.deepcopy(DEFAULT_LEVELS)
    )
    feather: float = 2.0

    @classmethod
    def only(cls, *kinds: DistortionKind, **kw: Any) -> DistortionConfig:
        return cls({k: copy.deepcopy(DEFAULT_LEVELS[k]) for k in kinds}, **kw)

    @classmethod
    def from_mapping(cls, obj: Mapping[str, Any]) -> DistortionConfig:
        """Parse ``{"feather": 2, "levels": {"contrast": [{...}, ...]}}``.

        A kind mapped to an integer n takes the first n default levels.
        """
        levels: dict[DistortionKind, list[dict[str, Any]]] = {}
        raw_levels = obj.get("levels")
        if raw_levels is None:
            levels = copy.deepcopy(DEFAULT_LEVELS)
        else:
            for name, table in raw_levels.items():
                kind = DistortionKind.parse(name)
                if isinstance(table, int):
                    if not 0 <= table <= len(DEFAULT_LEVELS[kind]):
                        raise ValueError(f"{kind.label}: {table} levels requested, "
                                         f"{len(DEFAULT_LEVELS[kind])} available")
                    table = DEFAULT_LEVELS[kind][:table]
                if table:
                    levels[kind] = [dict(t) for t in table]
        return cls(levels, float(obj.get("feather", 2.0)))

    def to_json(self) -> dict[str, Any]:
        return {
            "feather": self.feather,
            "levels": {k.label: v for k, v in sorted(self.levels.items())},
        }


def plan_distorted_set(
    refs: DatasetManifest,
    config: DistortionConfig,
    master_seed: int,
    boxes: Optional[Mapping[str, Sequence[Sequence[int]]]] = None,
) -> list[tuple[ManifestEntry, ManifestEntry, DistortionKind, int, dict[str, Any], int]]:
    """Enumerate (reference, new entry, kind, level, params, seed) without any I/O.

    Non-target references are carried through undistorted.
    """
    for e in refs:
        if not e.is_reference:
            raise ValueError(f"{e.image_id!r} is not a reference entry")
    boxes = boxes or {}
    plan = []
    for ref in refs:
        if not ref.is_target:
            continue
        for kind in sorted(config.levels):
            if kind is DistortionKind.FG_BG and ref.image_id not in boxes:
                raise ValueError(f"fg_bg requested but no boxes given for {ref.image_id!r}")
            for level, params in enumerate(config.levels[kind], start=1):
                seed = derive_seed(master_seed, ref.image_id, kind, level)
                image_id = f"{ref.image_id}__{kind.label}_l{level}"
                region = None
                if kind is DistortionKind.FG_BG:
                    region = {"boxes": [list(b) for b in boxes[ref.image_id]],
                              "feather": config.feather}
                entry = ManifestEntry(
                    image_id=image_id,
                    path=f"images/{image_id}.png",
                    content_group_id=ref.content_group_id,
                    is_reference=False,
                    is_target=True,
                    distortion={"kind": kind.label, "level": level, "params": dict(params),
                                "seed": seed, "region": region},
                    reference_id=ref.image_id,
                )
                plan.append((ref, entry, kind, level, dict(params), seed))
    return plan


def spec_from_entry(entry: ManifestEntry, img: ImageBuffer) -> DistortionSpec:
    d = entry.distortion
    if d is None:
        raise ValueError(f"{entry.image_id!r} has no distortion")
    region = None
    if d.get("region") is not None:
        r = d["region"]
        region = region_mask_from_boxes(r["boxes"], (img.width, img.height), r.get("feather", 0))
    return DistortionSpec(DistortionKind.parse(d["kind"]), int(d["level"]), dict(d["params"]),
                          region, int(d["seed"]))


def default_threads() -> int:
    env = os.environ.get("UIQA_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def generate_distorted_set(
    refs: DatasetManifest,
    out_dir: str | Path,
    config: Optional[DistortionConfig] = None,
    master_seed: int = 0,
    boxes: Optional[Mapping[str, Sequence[Sequence[int]]]] = None,
    threads: Optional[int] = None,
) -> DatasetManifest:
    """Write references and all their distorted versions under ``out_dir/images``.

    Returns the enlarged manifest rooted at ``out_dir``.
    """
    config = config or DistortionConfig()
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    plan = plan_distorted_set(refs, config, master_seed, boxes)

    ref_images: dict[str, ImageBuffer] = {}
    copied: list[ManifestEntry] = []
    for ref in refs:
        img = load_image(refs.resolve(ref))
        ref_images[ref.image_id] = img
        rel = f"images/{ref.image_id}.png"
        save_image(img, out_dir / rel)
        copied.append(ManifestEntry(ref.image_id, rel, ref.content_group_id, True,
                                    ref.is_target, None, None))

    def work(item: tuple) -> None:
        ref, entry, *_ = item
        img = ref_images[ref.image_id]
        save_image(apply_distortion(img, spec_from_entry(entry, img)), out_dir / entry.path)

    n = threads or default_threads()
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            list(pool.map(work, plan))
    else:
        for item in plan:
            work(item)
    log.info("wrote %d references and %d distorted images to %s", len(copied), len(plan), out_dir)
    return DatasetManifest(copied + [p[1] for p in plan], out_dir)
