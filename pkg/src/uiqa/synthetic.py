"""Procedural underwater scenes and simulated raters.

These stand in for unreleased footage and subjective data so the whole
pipeline can be exercised end to end.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .distortions import DistortionKind
from .image import ImageBuffer, load_image, save_image
from .manifest import DatasetManifest, ManifestEntry, write_manifest
from .subjective import Rating, RatingTable

FIXTURE_NAME = "fixture.png"


def load_fixture() -> ImageBuffer:
    """The bundled 128x128 scene used by regression tests."""
    with resources.as_file(resources.files("uiqa") / "data" / FIXTURE_NAME) as p:
        return load_image(p)


def _smooth_noise(rng: np.random.Generator, h: int, w: int, sigma: float) -> np.ndarray:
    n = ndimage.gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
    return n / (np.abs(n).max() + 1e-12)


def make_scene(
    seed: int, width: int = 128, height: int = 128, n_targets: Optional[int] = None
) -> tuple[ImageBuffer, list[list[int]]]:
    """Blue-green water column with textured seabed and striped fish.

    Returns the image and the fish bounding boxes as [x, y, w, h]. Pass
    ``n_targets=0`` for a target-free scene.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    depth = yy / max(1, height - 1)
    water = np.stack([0.05 + 0.10 * (1 - depth), 0.35 + 0.25 * (1 - depth),
                      0.45 + 0.30 * (1 - depth)], axis=2)
    water += 0.06 * _smooth_noise(rng, height, width, 6.0)[..., None]

    floor_line = height * (0.72 + 0.08 * _smooth_noise(rng, 1, width, 8.0)[0])
    seabed = yy > floor_line[None, :]
    texture = 0.5 + 0.5 * _smooth_noise(rng, height, width, 1.2)
    bed = np.stack([0.45 * texture + 0.15, 0.40 * texture + 0.12, 0.25 * texture + 0.10], axis=2)
    img = np.where(seabed[..., None], bed, water)

    boxes: list[list[int]] = []
    count = int(rng.integers(1, 4)) if n_targets is None else n_targets
    for _ in range(count):
        a = rng.uniform(0.10, 0.18) * width
        b = a * rng.uniform(0.35, 0.55)
        cx = rng.uniform(a + 2, width - a - 2)
        cy = rng.uniform(b + 2, 0.7 * height - b)
        body = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0
        tail = (np.abs(yy - cy) <= (xx - (cx + a)) * 0.9) & (xx >= cx + a - 1) & (xx <= cx + 1.4 * a)
        fish = body | tail
        stripes = 0.5 + 0.5 * np.sign(np.sin((xx - cx) / a * 9.0))
        hue = rng.uniform(0, 1)
        base = np.array([0.95, 0.55 + 0.3 * hue, 0.10 + 0.2 * hue])
        colour = base[None, None, :] * (0.55 + 0.45 * stripes[..., None])
        img = np.where(fish[..., None], colour, img)
        ys, xs = np.nonzero(fish)
        x0, y0 = int(xs.min()), int(ys.min())
        boxes.append([x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1])

    img += 0.015 * rng.standard_normal(img.shape)
    return ImageBuffer.from_float(img), boxes


def write_reference_set(
    out_dir: str | Path, n_refs: int, seed: int = 0, size: int = 64, n_nontarget: int = 0
) -> tuple[DatasetManifest, dict[str, list[list[int]]]]:
    """Write ``refs.json``, ``boxes.json`` and reference PNGs under ``out_dir``."""
    out_dir = Path(out_dir)
    (out_dir / "refs").mkdir(parents=True, exist_ok=True)
    entries: list[ManifestEntry] = []
    boxes: dict[str, list[list[int]]] = {}
    for k in range(n_refs + n_nontarget):
        target = k < n_refs
        image_id = f"ref{k:04d}" if target else f"nt{k - n_refs:04d}"
        img, b = make_scene(seed * 100003 + k, size, size, None if target else 0)
        save_image(img, out_dir / "refs" / f"{image_id}.png")
        entries.append(ManifestEntry(image_id, f"refs/{image_id}.png", f"g{k:04d}", True, target))
        if target:
            boxes[image_id] = b
    manifest = DatasetManifest(entries, out_dir)
    write_manifest(manifest, out_dir / "refs.json")
    (out_dir / "boxes.json").write_text(json.dumps(boxes, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    return manifest, boxes


# Utility loss (0-100 points) per distortion level; fg_bg foreground levels
# hide the fish and cost far more than background levels.
UTILITY_LOSS: dict[DistortionKind, list[float]] = {
    DistortionKind.CHANNEL: [4, 10, 18, 28],
    DistortionKind.CONTRAST: [5, 12, 22, 35],
    DistortionKind.ILLUMINATION: [5, 9, 20, 32],
    DistortionKind.MOTION_BLUR: [8, 18, 30, 45],
    DistortionKind.FG_BG: [18, 34, 3, 6],
    DistortionKind.OCEAN_SNOW: [10, 25],
}
REFERENCE_UTILITY = 88.0


def latent_utility(entry: ManifestEntry, jitter: float = 0.0) -> float:
    """Ground-truth utility of a manifest entry on the 0-100 scale."""
    if not entry.is_target:
        return 5.0
    if entry.distortion is None:
        return REFERENCE_UTILITY + jitter
    kind = DistortionKind.parse(entry.distortion["kind"])
    level = int(entry.distortion["level"])
    table = UTILITY_LOSS[kind]
    loss = table[min(level, len(table)) - 1]
    return float(np.clip(REFERENCE_UTILITY - loss + jitter, 0.0, 100.0))


def simulate_ratings(
    manifest: DatasetManifest,
    n_subjects: int = 21,
    seed: int = 0,
    noise: float = 0.45,
    bias: float = 0.15,
    n_verification: int = 5,
) -> RatingTable:
    """High-agreement raters scoring every target image on the 1..5 scale.

    ``n_verification`` randomly chosen images are presented twice.
    """
    rng = np.random.default_rng(seed)
    targets = [e for e in manifest if e.is_target]
    groups = sorted({e.content_group_id for e in targets})
    group_jitter = dict(zip(groups, rng.normal(0.0, 4.0, len(groups))))
    utility = np.array([latent_utility(e, group_jitter[e.content_group_id]) for e in targets])
    verify = sorted(rng.choice(len(targets), min(n_verification, len(targets)), replace=False))
    subject_bias = rng.normal(0.0, bias, n_subjects)

    def score(s: int, u: float) -> int:
        v = 1.0 + 4.0 * u / 100.0 + subject_bias[s] + rng.normal(0.0, noise)
        return int(np.clip(np.floor(v + 0.5), 1, 5))

    records = []
    for s in range(n_subjects):
        sid = f"s{s:02d}"
        for e, u in zip(targets, utility):
            records.append(Rating(sid, e.image_id, e.image_id, score(s, u)))
        for k in verify:
            e = targets[k]
            records.append(Rating(sid, e.image_id, f"{e.image_id}#rep", score(s, utility[k])))
    return RatingTable(records)
