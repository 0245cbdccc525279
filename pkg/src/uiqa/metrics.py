"""Classical comparison metrics (PSNR, SSIM, UCIQE, UIQM) and batch scoring."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import ndimage

from . import constants as K
from .distortions import default_threads
from .errors import DataError
from .image import ImageBuffer, hsv_saturation, load_image, luminance, rgb_to_cielab, to_grayscale
from .manifest import DatasetManifest, ManifestEntry

SCORES_HEADER = ["model", "image_id", "score"]
TIMING_HEADER = ["model", "mean_ms_per_image"]


def _check_pair(ref: ImageBuffer, test: ImageBuffer) -> None:
    if ref.shape != test.shape:
        raise ValueError(f"dimension mismatch: {ref.shape} vs {test.shape}")


def psnr(ref: ImageBuffer, test: ImageBuffer) -> float:
    """PSNR in dB over all channels; ``inf`` for identical images."""
    _check_pair(ref, test)
    diff = ref.data.astype(np.float64) - test.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(K.DYNAMIC_RANGE**2 / mse)


def gaussian_window(size: int = K.SSIM_WINDOW, sigma: float = K.SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def ssim_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Local SSIM over the valid region (window fully inside the image)."""
    g = gaussian_window()
    pad = (len(g) - 1) // 2

    def blur(a: np.ndarray) -> np.ndarray:
        a = ndimage.correlate1d(a, g, axis=0, mode="reflect")
        a = ndimage.correlate1d(a, g, axis=1, mode="reflect")
        return a[pad:-pad, pad:-pad]

    c1 = (K.SSIM_K1 * K.DYNAMIC_RANGE) ** 2
    c2 = (K.SSIM_K2 * K.DYNAMIC_RANGE) ** 2
    mu_x, mu_y = blur(x), blur(y)
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov = blur(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def ssim(ref: ImageBuffer, test: ImageBuffer) -> float:
    _check_pair(ref, test)
    if min(ref.height, ref.width) < K.SSIM_WINDOW:
        raise ValueError(f"image smaller than the {K.SSIM_WINDOW}x{K.SSIM_WINDOW} SSIM window")
    x = to_grayscale(ref).data[:, :, 0].astype(np.float64)
    y = to_grayscale(test).data[:, :, 0].astype(np.float64)
    return float(np.mean(ssim_map(x, y)))


def uciqe_components(img: ImageBuffer) -> tuple[float, float, float]:
    """(chroma std, luminance contrast, mean saturation); L and chroma scaled by 1/100."""
    if img.channels != 3:
        raise ValueError("UCIQE requires a 3-channel image")
    lab = rgb_to_cielab(img)
    sigma_c = float(np.std(lab.chroma / 100.0))
    lo, hi = np.quantile(lab.L / 100.0, [K.UCIQE_TAIL, 1.0 - K.UCIQE_TAIL])
    mu_s = float(np.mean(hsv_saturation(img)))
    return sigma_c, float(hi - lo), mu_s


def uciqe(img: ImageBuffer) -> float:
    terms = uciqe_components(img)
    return float(sum(c * t for c, t in zip(K.UCIQE_WEIGHTS, terms)))


def _trimmed_stats(values: np.ndarray, alpha: tuple[float, float]) -> tuple[float, float]:
    v = np.sort(values, axis=None)
    n = v.size
    lo, hi = int(alpha[0] * n), int(alpha[1] * n)
    kept = v[lo : n - hi]
    mu = float(kept.mean())
    return mu, float(np.mean((kept - mu) ** 2))


def uicm(img: ImageBuffer) -> float:
    rgb = img.data.astype(np.float64)
    rg = rgb[..., 0] - rgb[..., 1]
    yb = (rgb[..., 0] + rgb[..., 1]) / 2.0 - rgb[..., 2]
    mu_rg, var_rg = _trimmed_stats(rg, K.UICM_ALPHA)
    mu_yb, var_yb = _trimmed_stats(yb, K.UICM_ALPHA)
    return (K.UICM_MEAN_WEIGHT * math.hypot(mu_rg, mu_yb)
            + K.UICM_SPREAD_WEIGHT * math.sqrt(var_rg + var_yb))


def _blocks(a: np.ndarray, size: int) -> Iterable[np.ndarray]:
    h, w = a.shape
    for y in range(0, h, size):
        for x in range(0, w, size):
            yield a[y : y + size, x : x + size]


def _n_blocks(a: np.ndarray, size: int) -> int:
    return math.ceil(a.shape[0] / size) * math.ceil(a.shape[1] / size)


def eme(a: np.ndarray, size: int = K.UIQM_BLOCK) -> float:
    """Block enhancement measure; block extremes are clamped to >= 1."""
    total = 0.0
    for blk in _blocks(a, size):
        total += math.log(max(float(blk.max()), 1.0) / max(float(blk.min()), 1.0))
    return 2.0 * total / _n_blocks(a, size)


def _plip_add(a: float, b: float, gamma: float = K.PLIP_GAMMA) -> float:
    return a + b - a * b / gamma


def _plip_sub(a: float, b: float, gamma: float = K.PLIP_GAMMA) -> float:
    return gamma * (a - b) / (gamma - b)


def _plip_scale(c: float, a: float, gamma: float = K.PLIP_GAMMA) -> float:
    return gamma - gamma * (1.0 - a / gamma) ** c


def logamee(a: np.ndarray, size: int = K.UIQM_BLOCK) -> float:
    """Logarithmic AME under PLIP arithmetic."""
    total = 0.0
    for blk in _blocks(a, size):
        hi, lo = float(blk.max()), float(blk.min())
        den = _plip_add(hi, lo)
        m = _plip_sub(hi, lo) / den if den != 0.0 else 0.0
        if m > 0.0:
            total += m * math.log(m)
    return _plip_scale(1.0 / _n_blocks(a, size), total)


def sobel_magnitude(a: np.ndarray) -> np.ndarray:
    gx = ndimage.sobel(a, axis=1, mode="reflect")
    gy = ndimage.sobel(a, axis=0, mode="reflect")
    return np.hypot(gx, gy) / (4.0 * math.sqrt(2.0))


def uism(img: ImageBuffer) -> float:
    rgb = img.data.astype(np.float64)
    total = 0.0
    for c, weight in enumerate(K.LUMA_CHANNEL_WEIGHTS):
        ch = rgb[..., c]
        total += weight * eme(ch / 255.0 * sobel_magnitude(ch))
    return total


def uiconm(img: ImageBuffer) -> float:
    return logamee(luminance(img))


def uiqm_components(img: ImageBuffer) -> tuple[float, float, float]:
    if img.channels != 3:
        raise ValueError("UIQM requires a 3-channel image")
    if min(img.height, img.width) < K.UIQM_MIN_SIZE:
        raise ValueError(f"UIQM needs images of at least {K.UIQM_MIN_SIZE}px per side")
    return uicm(img), uism(img), uiconm(img)


def uiqm(img: ImageBuffer) -> float:
    return float(sum(c * t for c, t in zip(K.UIQM_WEIGHTS, uiqm_components(img))))


@dataclass(frozen=True)
class Metric:
    name: str
    fn: Callable[..., float]
    full_reference: bool
    self_score: float = math.nan


METRICS: dict[str, Metric] = {
    "psnr": Metric("psnr", psnr, True, math.inf),
    "ssim": Metric("ssim", ssim, True, 1.0),
    "uciqe": Metric("uciqe", uciqe, False),
    "uiqm": Metric("uiqm", uiqm, False),
}


@dataclass
class ScoreTable:
    model_name: str
    scores: dict[str, float] = field(default_factory=dict)
    higher_is_better: bool = True
    mean_ms_per_image: Optional[float] = None

    def __len__(self) -> int:
        return len(self.scores)

    def vector(self, ids: Iterable[str]) -> np.ndarray:
        return np.array([self.scores[i] for i in ids], dtype=np.float64)


def get_metric(name: str) -> Metric:
    try:
        return METRICS[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; choose from {', '.join(METRICS)}") from None


def score_batch(
    manifest: DatasetManifest,
    metrics: Iterable[str],
    include_references: bool = False,
    threads: Optional[int] = None,
) -> list[ScoreTable]:
    """Score every non-reference entry with each metric.

    No-reference metrics also score reference entries. Full-reference
    metrics score references against themselves only when
    ``include_references`` is set.
    """
    chosen = [get_metric(m) for m in metrics]
    ids = manifest.by_id()
    cache: dict[str, ImageBuffer] = {}

    def image(entry: ManifestEntry) -> ImageBuffer:
        if entry.image_id not in cache:
            path = manifest.resolve(entry)
            try:
                cache[entry.image_id] = load_image(path)
            except (OSError, ValueError) as exc:
                raise DataError(f"cannot read {entry.image_id!r} ({path}): {exc}") from exc
        return cache[entry.image_id]

    for entry in manifest:  # decode serially so the cache is never written concurrently
        image(entry)

    tables = []
    n = threads or default_threads()
    for metric in chosen:
        todo: list[ManifestEntry] = []
        for e in manifest:
            if e.is_reference and metric.full_reference and not include_references:
                continue
            if metric.full_reference and not e.is_reference:
                if e.reference_id not in ids:
                    raise DataError(f"{metric.name}: {e.image_id!r} has no reference")
            todo.append(e)

        def run(e: ManifestEntry, metric: Metric = metric) -> tuple[str, float, float]:
            t0 = time.perf_counter()
            if metric.full_reference:
                if e.is_reference:
                    value = metric.self_score
                else:
                    value = metric.fn(image(ids[e.reference_id]), image(e))  # type: ignore[index]
            else:
                value = metric.fn(image(e))
            return e.image_id, float(value), time.perf_counter() - t0

        if n > 1:
            with ThreadPoolExecutor(max_workers=n) as pool:
                results = list(pool.map(run, todo))
        else:
            results = [run(e) for e in todo]
        scores = {i: v for i, v, _ in results}
        ms = 1000.0 * sum(t for *_, t in results) / max(1, len(results))
        tables.append(ScoreTable(metric.name, scores, True, ms))
    return tables


def write_scores(tables: Iterable[ScoreTable], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORES_HEADER)
        for t in tables:
            for image_id, s in t.scores.items():
                w.writerow([t.model_name, image_id, repr(float(s))])


def read_scores(path: str | Path) -> list[ScoreTable]:
    """Read one or more models from a ``model,image_id,score`` CSV."""
    path = Path(path)
    tables: dict[str, ScoreTable] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != SCORES_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(SCORES_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                value = float(row[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: score {row[2]!r} is not a number") from None
            if math.isnan(value):
                raise DataError(f"{path}:{lineno}: NaN score")
            table = tables.setdefault(row[0], ScoreTable(row[0]))
            if row[1] in table.scores:
                raise DataError(f"{path}:{lineno}: duplicate score for {row[0]}/{row[1]}")
            table.scores[row[1]] = value
    return list(tables.values())


def write_timing(tables: Iterable[ScoreTable], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        for t in tables:
            w.writerow([t.model_name, f"{t.mean_ms_per_image:.3f}"])
