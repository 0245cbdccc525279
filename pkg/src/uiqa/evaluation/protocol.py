"""Fold-wise evaluation of score tables against MOS, plus the non-target report."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from ..errors import DataError
from ..manifest import DatasetManifest
from ..metrics import ScoreTable
from ..subjective import MosTable
from .correlation import fit_logistic, kendall, pearson, spearman
from .significance import c0_outcomes, significance_matrix, significant_pairs
from .splits import SplitPlan

REPORT_CSV_HEADER = ["model", "fold", "plcc_raw", "plcc_mapped", "srcc", "krcc", "c0"]
CRITERIA = ("plcc_raw", "plcc_mapped", "srcc", "krcc", "c0")


@dataclass
class ModelResult:
    folds: list[dict[str, Any]] = field(default_factory=list)

    @property
    def mean(self) -> dict[str, Optional[float]]:
        out: dict[str, Optional[float]] = {}
        for key in CRITERIA:
            vals = [f[key] for f in self.folds if f[key] is not None]
            out[key] = math.fsum(vals) / len(vals) if vals else None
        return out


@dataclass
class EvalReport:
    models: dict[str, ModelResult]
    matrix_models: list[str]
    significance: np.ndarray
    c0_mode: str = "sign"

    def to_json(self) -> dict[str, Any]:
        return {
            "c0_mode": self.c0_mode,
            "models": {
                name: {"folds": res.folds, "mean": res.mean} for name, res in self.models.items()
            },
            "significance": {
                "models": self.matrix_models,
                "matrix": self.significance.tolist(),
            },
        }

    def csv_rows(self) -> list[list[Any]]:
        rows = []
        for name, res in self.models.items():
            for f in res.folds:
                rows.append([name, f["fold"]] + [f[k] for k in CRITERIA])
            mean = res.mean
            rows.append([name, "mean"] + [mean[k] for k in CRITERIA])
        return rows


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(report: EvalReport, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with (out_dir / "report.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_CSV_HEADER)
        for row in report.csv_rows():
            w.writerow([_fmt(v) for v in row])
    with (out_dir / "significance_matrix.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model"] + report.matrix_models)
        for name, row in zip(report.matrix_models, report.significance.tolist()):
            w.writerow([name] + row)


def _c0_subset(ids: list[str], manifest: DatasetManifest, per_type: int,
               rng: np.random.Generator) -> list[str]:
    entries = manifest.by_id()
    buckets: dict[str, list[str]] = {}
    for i in ids:
        d = entries[i].distortion if i in entries else None
        buckets.setdefault(d["kind"] if d else "reference", []).append(i)
    chosen: set[str] = set()
    for kind in sorted(buckets):
        members = buckets[kind]
        if len(members) <= per_type:
            chosen.update(members)
        else:
            chosen.update(members[k] for k in rng.choice(len(members), per_type, replace=False))
    return [i for i in ids if i in chosen]


def evaluate(
    scores: Sequence[ScoreTable],
    mos: MosTable,
    plan: SplitPlan,
    c0_mode: str = "sign",
    theta: float = 0.95,
    c0_per_type: Optional[int] = None,
    manifest: Optional[DatasetManifest] = None,
    seed: int = 0,
) -> EvalReport:
    """Correlations and C0 on every test fold; significant pairs are built within each fold.

    Only test images that carry a MOS label are evaluated (non-target images
    are unrated). The significance matrix pools C0 outcomes over all folds.
    """
    if not scores:
        raise DataError("no score tables to evaluate")
    if c0_per_type is not None and manifest is None:
        raise ValueError("c0_per_type needs a manifest to know distortion types")
    names = [t.model_name for t in scores]
    if len(set(names)) != len(names):
        raise DataError("duplicate model names among score tables")
    results = {t.model_name: ModelResult() for t in scores}
    pooled: dict[str, list[np.ndarray]] = {t.model_name: [] for t in scores}
    rng = np.random.default_rng(seed)

    for k, fold in enumerate(plan.folds):
        ids = [i for i in fold.test if i in mos]
        if len(ids) < 5:
            raise DataError(f"fold {k}: only {len(ids)} labelled test images")
        for t in scores:
            missing = [i for i in ids if i not in t.scores]
            if missing:
                raise DataError(f"{t.model_name}: fold {k} lacks scores for {len(missing)} "
                                f"test images, e.g. {missing[0]!r}")
        y = mos.mos_vector(ids)
        c0_ids = ids if c0_per_type is None else _c0_subset(ids, manifest, c0_per_type, rng)  # type: ignore[arg-type]
        pairs = significant_pairs(mos, c0_ids)
        for t in scores:
            q = t.vector(ids)
            signed = q if t.higher_is_better else -q
            fit = fit_logistic(signed, y)
            plcc_raw = pearson(signed, y)
            plcc_mapped = pearson(fit.mapped, y) if fit.converged else plcc_raw
            row: dict[str, Any] = {
                "fold": k,
                "n_images": len(ids),
                "n_pairs": len(pairs),
                "plcc_raw": plcc_raw,
                "plcc_mapped": plcc_mapped,
                "srcc": spearman(signed, y),
                "krcc": kendall(signed, y),
                "c0": None,
                "logistic": fit.to_json(),
            }
            if len(pairs):
                outcome = c0_outcomes(t, pairs, c0_mode, theta)
                row["c0"] = float(np.mean(outcome))
                pooled[t.model_name].append(outcome)
            results[t.model_name].folds.append(row)

    outcomes = {n: (np.concatenate(v) if v else np.empty(0, bool)) for n, v in pooled.items()}
    matrix_models, matrix = significance_matrix(outcomes)
    return EvalReport(results, matrix_models, matrix, c0_mode)


@dataclass
class NonTargetReport:
    fraction_below: float
    threshold: float
    n_images: int
    violators: list[tuple[str, float]]

    def to_json(self) -> dict[str, Any]:
        return {
            "fraction_below": self.fraction_below,
            "threshold": self.threshold,
            "n_images": self.n_images,
            "violators": [{"image_id": i, "score": s} for i, s in self.violators],
        }


def nontarget_report(scores: ScoreTable, manifest: DatasetManifest,
                     threshold: float = 40.0) -> NonTargetReport:
    """Share of non-target images scored below ``threshold`` on the 0-100 scale."""
    ids = [e.image_id for e in manifest if not e.is_target]
    if not ids:
        raise DataError("manifest has no non-target entries")
    missing = [i for i in ids if i not in scores.scores]
    if missing:
        raise DataError(f"{scores.model_name}: no score for non-target image {missing[0]!r}")
    below = [i for i in ids if scores.scores[i] < threshold]
    violators = [(i, scores.scores[i]) for i in ids if scores.scores[i] >= threshold]
    return NonTargetReport(len(below) / len(ids), threshold, len(ids), violators)
