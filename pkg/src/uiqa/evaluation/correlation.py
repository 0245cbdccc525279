"""PLCC, SRCC, KRCC and the four-parameter logistic mapping."""

from __future__ import annotations

import decimal
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.special import expit

log = logging.getLogger(__name__)


def _as_pair(pred, mos, min_len: int = 3) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(pred, dtype=np.float64).ravel()
    y = np.asarray(mos, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < min_len:
        raise ValueError(f"need at least {min_len} samples, got {x.size}")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ValueError("NaN in correlation input")
    return x, y


def finite_surrogate(x: np.ndarray) -> np.ndarray:
    """Replace +/-inf sentinels by one unit beyond the finite extremes.

    Ordering is preserved; only linear statistics need this.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.all(np.isfinite(x)):
        return x
    finite = x[np.isfinite(x)]
    hi = finite.max() if finite.size else 0.0
    lo = finite.min() if finite.size else 0.0
    out = x.copy()
    out[x == np.inf] = hi + 1.0
    out[x == -np.inf] = lo - 1.0
    return out


def pearson(pred, mos) -> float:
    x, y = _as_pair(pred, mos)
    x, y = finite_surrogate(x), finite_surrogate(y)
    dx = x - math.fsum(x) / x.size
    dy = y - math.fsum(y) / y.size
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation of a constant vector is undefined")
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def midranks(x) -> np.ndarray:
    """1-based ranks with ties given the average of the ranks they span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    start = 0
    n = x.size
    while start < n:
        stop = start + 1
        while stop < n and sx[stop] == sx[start]:
            stop += 1
        ranks[order[start:stop]] = (start + 1 + stop) / 2.0
        start = stop
    return ranks


def _ratio_of_root(num: int, den_sq: int) -> float:
    """num / sqrt(den_sq) for integers, correctly rounded to a double.

    Working at 60 significant digits keeps rank statistics independent of
    floating-point evaluation order.
    """
    ctx = decimal.Context(prec=60)
    return float(ctx.divide(decimal.Decimal(num), ctx.sqrt(decimal.Decimal(den_sq))))


def _integer_pearson(a: list[int], b: list[int]) -> float:
    n = len(a)
    sa, sb = sum(a), sum(b)
    sab = n * sum(p * q for p, q in zip(a, b)) - sa * sb
    saa = n * sum(p * p for p in a) - sa * sa
    sbb = n * sum(q * q for q in b) - sb * sb
    if saa == 0 or sbb == 0:
        raise ValueError("correlation of a constant vector is undefined")
    return _ratio_of_root(sab, saa * sbb)


def spearman(pred, mos) -> float:
    """Pearson correlation of mid-ranks, evaluated in exact integer arithmetic."""
    x, y = _as_pair(pred, mos)
    a = [int(v) for v in (2 * midranks(x))]
    b = [int(v) for v in (2 * midranks(y))]
    return max(-1.0, min(1.0, _integer_pearson(a, b)))


def _tie_pairs(sorted_values: np.ndarray) -> int:
    _, counts = np.unique(sorted_values, return_counts=True)
    return int(sum(c * (c - 1) // 2 for c in counts.tolist()))


def _count_inversions(a: list[float]) -> int:
    """Bottom-up merge sort; returns number of strictly inverted pairs."""
    n = len(a)
    src = list(a)
    dst = [0.0] * n
    swaps = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            dst[k:hi] = src[i:mid] + src[j:hi]
        src, dst = dst, src
        width *= 2
    return swaps


def kendall(pred, mos) -> float:
    """Tau-b via Knight's O(n log n) algorithm."""
    x, y = _as_pair(pred, mos)
    n = x.size
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(ys)
    # pairs tied in both coordinates
    joint = 0
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and xs[stop] == xs[start] and ys[stop] == ys[start]:
            stop += 1
        joint += (stop - start) * (stop - start - 1) // 2
        start = stop
    if n0 == n1 or n0 == n2:
        raise ValueError("correlation of a constant vector is undefined")
    discordant = _count_inversions(ys.tolist())
    concordant = n0 - n1 - n2 + joint - discordant
    tau = _ratio_of_root(concordant - discordant, (n0 - n1) * (n0 - n2))
    return max(-1.0, min(1.0, tau))


def logistic4(q, b1: float, b2: float, b3: float, b4: float) -> np.ndarray:
    """b1 * (0.5 - 1 / (1 + exp(b2 * (q - b3)))) + b4."""
    return b1 * (expit(b2 * (np.asarray(q, dtype=np.float64) - b3)) - 0.5) + b4


@dataclass
class LogisticFit:
    params: tuple[float, float, float, float]
    mapped: np.ndarray
    sse: float
    converged: bool
    linear_limit: bool
    iterations: int
    # (slope, intercept) of the straight line used when it beat the logistic
    affine: Optional[tuple[float, float]] = None

    def to_json(self) -> dict:
        return {
            "params": list(self.params),
            "affine": list(self.affine) if self.affine else None,
            "sse": self.sse,
            "converged": self.converged,
            "linear_limit": self.linear_limit,
            "iterations": self.iterations,
        }


def _project(shape: np.ndarray, y: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Least-squares scale/offset of ``shape`` onto ``y``."""
    s0 = shape - shape.mean()
    ss = float(np.dot(s0, s0))
    if ss <= 1e-300:
        return 0.0, float(y.mean()), np.full_like(y, y.mean())
    scale = float(np.dot(s0, y - y.mean())) / ss
    offset = float(y.mean() - scale * shape.mean())
    return scale, offset, scale * shape + offset


def _residual(theta: np.ndarray, qn: np.ndarray, y: np.ndarray) -> np.ndarray:
    shape = expit(theta[0] * (qn - theta[1])) - 0.5
    return y - _project(shape, y)[2]


def _levenberg_marquardt(theta: np.ndarray, qn: np.ndarray, y: np.ndarray,
                         max_iter: int) -> tuple[np.ndarray, float, bool, int]:
    lam = 1e-3
    r = _residual(theta, qn, y)
    sse = float(r @ r)
    for it in range(1, max_iter + 1):
        jac = np.empty((y.size, 2))
        for k in range(2):
            h = 1e-6 * max(1.0, abs(theta[k]))
            e = np.zeros(2)
            e[k] = h
            jac[:, k] = (_residual(theta + e, qn, y) - _residual(theta - e, qn, y)) / (2 * h)
        jtj = jac.T @ jac
        grad = jac.T @ r
        improved = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-12), -grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            cand = theta + step
            rc = _residual(cand, qn, y)
            sc = float(rc @ rc)
            if np.isfinite(sc) and sc < sse:
                rel = (sse - sc) / max(sse, 1e-300)
                theta, r, sse = cand, rc, sc
                lam = max(lam / 10, 1e-12)
                improved = True
                if rel < 1e-12 or np.linalg.norm(step) < 1e-12:
                    return theta, sse, True, it
                break
            lam *= 10
        if not improved:
            return theta, sse, True, it
    return theta, sse, False, max_iter


def fit_logistic(pred, mos, max_iter: int = 200) -> LogisticFit:
    """Least-squares logistic fit, damped Gauss-Newton then Nelder-Mead polish.

    The scale and offset parameters are solved in closed form for every
    trial slope/midpoint. The affine map (the small-slope limit of the
    family) is kept as a candidate, so the mapping never fits worse than a
    straight line.
    """
    q, y = _as_pair(pred, mos, min_len=5)
    q = finite_surrogate(q)
    if np.ptp(q) == 0 or np.ptp(y) == 0:
        raise ValueError("logistic fit needs non-constant inputs")
    mu, sd = float(q.mean()), float(q.std())
    qn = (q - mu) / sd
    sign = 1.0 if np.corrcoef(qn, y)[0, 1] >= 0 else -1.0

    best: Optional[tuple[np.ndarray, float]] = None
    converged = False
    iterations = 0
    for slope in (1.0, 3.0, 0.3):
        theta, sse, ok, its = _levenberg_marquardt(np.array([sign * slope, 0.0]), qn, y, max_iter)
        iterations += its
        if np.isfinite(sse) and (best is None or sse < best[1]):
            best, converged = (theta, sse), ok
    if best is None:
        best = (np.array([sign, 0.0]), math.inf)
    nm = optimize.minimize(lambda t: float(np.sum(_residual(t, qn, y) ** 2)), best[0],
                           method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
    if np.isfinite(nm.fun) and nm.fun < best[1]:
        best = (np.asarray(nm.x), float(nm.fun))
        converged = converged or bool(nm.success)
    if not converged:
        log.warning("logistic fit did not converge after %d iterations", iterations)

    theta, sse = best
    shape = expit(theta[0] * (qn - theta[1])) - 0.5
    b1, b4, mapped = _project(shape, y)
    params = (b1, float(theta[0] / sd), float(mu + theta[1] * sd), b4)

    slope, icpt = np.polyfit(q, y, 1)
    linear = slope * q + icpt
    linear_sse = float(np.sum((y - linear) ** 2))
    if linear_sse < sse:
        return LogisticFit(params, linear, linear_sse, converged, True, iterations,
                           (float(slope), float(icpt)))
    return LogisticFit(params, mapped, sse, converged, False, iterations)
