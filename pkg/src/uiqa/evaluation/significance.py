"""Significant-pair construction, C0 and the pairwise model significance matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import erfc, erfcinv

from ..errors import DataError
from ..metrics import ScoreTable
from ..subjective import MosTable

SIGNIFICANCE_LEVEL = 0.95


def normal_cdf(z):
    """Standard normal cdf via the complementary error function.

    Accepts scalars or arrays; ``inf`` maps to 1 and ``-inf`` to 0.
    """
    if np.ndim(z) == 0:
        return 0.5 * math.erfc(-float(z) / math.sqrt(2.0))
    return 0.5 * erfc(-np.asarray(z, dtype=np.float64) / math.sqrt(2.0))


def z_score(mos_i: float, mos_j: float, var_i: float, n_i: int, var_j: float, n_j: int) -> float:
    """|MOS difference| over the pooled standard error of the two means."""
    diff = abs(mos_i - mos_j)
    se = math.sqrt(var_i / n_i + var_j / n_j)
    if se == 0.0:
        return math.inf if diff > 0 else 0.0
    return diff / se


@dataclass
class SignificantPairSet:
    """Image pairs whose subjective difference is significant.

    ``better[k]`` and ``worse[k]`` index into ``ids``; ``p[k]`` is the
    normal-cdf value of the pair's z-score.
    """

    ids: list[str]
    better: np.ndarray
    worse: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return int(self.better.size)

    @property
    def pairs(self) -> list[tuple[str, str, str, float]]:
        """(image_i, image_j, subjectively better, p) with i listed first in ``ids`` order."""
        out = []
        for b, w, p in zip(self.better.tolist(), self.worse.tolist(), self.p.tolist()):
            i, j = (b, w) if b < w else (w, b)
            out.append((self.ids[i], self.ids[j], self.ids[b], p))
        return out


def significant_pairs(
    mos: MosTable, images: Iterable[str] | None = None, level: float = SIGNIFICANCE_LEVEL
) -> SignificantPairSet:
    """All unordered pairs with cdf(z) > ``level``.

    The statistic uses the raw rating means and their sample variances, so
    MOS scale and variance scale always agree.
    """
    ids = list(dict.fromkeys(images if images is not None else mos.keys()))
    try:
        recs = [mos[i] for i in ids]
    except KeyError as exc:
        raise DataError(f"no MOS record for image {exc.args[0]!r}") from None
    mean = np.array([r.raw_mean for r in recs], dtype=np.float64)
    se2 = np.array([r.variance / r.n_raters for r in recs], dtype=np.float64)
    if np.isnan(se2).any():
        raise DataError("MOS table has missing variance or rater counts")
    better, worse, probs = [], [], []
    for i in range(len(ids) - 1):
        j = np.arange(i + 1, len(ids))
        diff = np.abs(mean[i] - mean[j])
        se = np.sqrt(se2[i] + se2[j])
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > 0, np.inf, 0.0))
        p = normal_cdf(z)
        keep = p > level
        jj = j[keep]
        hi = mean[i] > mean[jj]
        better.append(np.where(hi, i, jj))
        worse.append(np.where(hi, jj, i))
        probs.append(p[keep])
    return SignificantPairSet(ids, _concat(better, np.int64), _concat(worse, np.int64),
                              _concat(probs, np.float64))


def _concat(parts: list[np.ndarray], dtype) -> np.ndarray:
    return np.concatenate(parts).astype(dtype) if parts else np.empty(0, dtype)


C0_MODES = ("sign", "threshold")


def _normalized(values: np.ndarray) -> np.ndarray:
    finite = values[np.isfinite(values)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 0.0)
    span = hi - lo
    out = np.zeros_like(values)
    if span > 0:
        out = (values - lo) / span
    out[values == np.inf] = 1.0
    out[values == -np.inf] = 0.0
    return np.clip(out, 0.0, 1.0)


def c0_outcomes(
    scores: ScoreTable, pairs: SignificantPairSet, mode: str = "sign", theta: float = 0.95
) -> np.ndarray:
    """Per-pair correctness of the model's better/worse call.

    ``sign``: correct when the model orders the pair like the subjects do
    (a zero difference counts as wrong). ``threshold``: correct when the
    oriented difference of min-max normalized scores exceeds ``theta``.
    """
    if mode not in C0_MODES:
        raise ValueError(f"unknown C0 mode {mode!r}; choose from {C0_MODES}")
    missing = [i for i in pairs.ids if i not in scores.scores]
    if missing:
        raise DataError(f"{scores.model_name}: no score for {len(missing)} images, "
                        f"e.g. {missing[0]!r}")
    q = scores.vector(pairs.ids)
    if mode == "threshold":
        q = _normalized(q)
    if not scores.higher_is_better:
        q = 1.0 - q if mode == "threshold" else -q
    qb, qw = q[pairs.better], q[pairs.worse]
    if mode == "sign":
        return qb > qw
    with np.errstate(invalid="ignore"):
        return (qb - qw) > theta


def c0(scores: ScoreTable, pairs: SignificantPairSet, mode: str = "sign",
       theta: float = 0.95) -> float:
    if len(pairs) == 0:
        raise DataError("C0 of an empty pair set")
    return float(np.mean(c0_outcomes(scores, pairs, mode, theta)))


def paired_z(a: np.ndarray, b: np.ndarray) -> float:
    """McNemar-style z for paired Bernoulli outcomes, positive when ``a`` wins more."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    only_a = int(np.sum(a & ~b))
    only_b = int(np.sum(~a & b))
    if only_a + only_b == 0:
        return 0.0
    return (only_a - only_b) / math.sqrt(only_a + only_b)


def significance_matrix(
    outcomes: Mapping[str, Sequence[bool]], alpha: float = 0.05
) -> tuple[list[str], np.ndarray]:
    """Row-vs-column verdicts: -1 significantly lower, 0 similar, 1 higher."""
    names = list(outcomes)
    vecs = [np.asarray(outcomes[n], dtype=bool) for n in names]
    sizes = {v.size for v in vecs}
    if len(sizes) > 1:
        raise DataError("models were evaluated on different pair sets")
    crit = math.sqrt(2.0) * float(erfcinv(alpha))  # two-sided normal quantile
    m = np.zeros((len(names), len(names)), dtype=np.int64)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            z = paired_z(vecs[i], vecs[j])
            v = 1 if z > crit else (-1 if z < -crit else 0)
            m[i, j], m[j, i] = v, -v
    return names, m

