from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uiqa.evaluation.significance import SignificantPairSet, significant_pairs  # noqa: E402
from uiqa.image import ImageBuffer  # noqa: E402
from uiqa.subjective import MosRecord, MosTable  # noqa: E402
from uiqa.synthetic import load_fixture  # noqa: E402


@pytest.fixture(scope="session")
def fixture_img() -> ImageBuffer:
    return load_fixture()


# Target boxes of the bundled fixture, as [x, y, w, h].
FIXTURE_BOXES = [[79, 4, 49, 18], [12, 36, 34, 13]]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def constant_image(value, h: int = 64, w: int = 64, c: int = 3) -> ImageBuffer:
    return ImageBuffer(np.full((h, w, c), value, dtype=np.uint8))


def random_image(rng: np.random.Generator, h: int = 48, w: int = 48) -> ImageBuffer:
    return ImageBuffer(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def mos_record(image_id: str, raw_mean: float, variance: float, n: int) -> MosRecord:
    return MosRecord(image_id, (raw_mean - 1.0) / 4.0 * 100.0, raw_mean, variance, n, 0.0)


def random_mos_table(rng: np.random.Generator, n_images: int, n_raters: int = 21) -> MosTable:
    table = MosTable()
    for k in range(n_images):
        scores = rng.integers(1, 6, n_raters)
        table[f"i{k}"] = mos_record(f"i{k}", float(scores.mean()), float(scores.var(ddof=1)),
                                    n_raters)
    return table


def disjoint_pairs(rng: np.random.Generator,
                   n_pairs: int) -> tuple[MosTable, SignificantPairSet]:
    """MOS table of 2 * n_pairs images forming n_pairs independent significant pairs.

    Pairs are found by ``significant_pairs`` on each two-image sub-table, so
    no image appears in more than one pair.
    """
    table = MosTable()
    better, worse, p = [], [], []
    for k in range(n_pairs):
        hi, lo = rng.uniform(3.5, 5.0), rng.uniform(1.0, 2.5)
        a, b = f"p{k}a", f"p{k}b"
        if rng.random() < 0.5:
            hi, lo = lo, hi
        table[a] = mos_record(a, hi, 0.5, 21)
        table[b] = mos_record(b, lo, 0.5, 21)
        ps = significant_pairs(table, [a, b])
        assert len(ps) == 1
        better.append(2 * k + int(ps.better[0]))
        worse.append(2 * k + int(ps.worse[0]))
        p.append(float(ps.p[0]))
    pairs = SignificantPairSet(list(table), np.array(better), np.array(worse), np.array(p))
    return table, pairs
