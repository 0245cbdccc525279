"""Subjective rating analysis: MOS labels, outlier coefficient, rater agreement
and verification-set screening.

Ratings use the five-point utility scale (5 = target complete and obvious,
1 = target lost or undistinguishable).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError

RATING_SCALE = (1, 2, 3, 4, 5)
RATINGS_HEADER = ["subject_id", "image_id", "presentation_id", "score"]
MOS_HEADER = ["image_id", "mos", "raw_mean", "variance", "n_raters", "iqr"]


@dataclass(frozen=True)
class Rating:
    subject_id: str
    image_id: str
    presentation_id: str
    score: int


@dataclass
class RatingTable:
    """Per-subject ratings, one record per (subject, presentation).

    The first presentation of an image (in record order) is its primary
    presentation; ``verification_pairs`` lists the later duplicates as
    ``(image_id, duplicate_presentation_id)``.
    """

    records: list[Rating]
    verification_pairs: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[tuple[str, str]] = set()
        owner: dict[str, str] = {}
        for r in self.records:
            if r.score not in RATING_SCALE:
                raise DataError(f"score {r.score!r} from {r.subject_id} on {r.image_id} "
                                "is not on the 1..5 scale")
            key = (r.subject_id, r.presentation_id)
            if key in seen:
                raise DataError(f"subject {r.subject_id} rated presentation "
                                f"{r.presentation_id} more than once")
            seen.add(key)
            prev = owner.setdefault(r.presentation_id, r.image_id)
            if prev != r.image_id:
                raise DataError(f"presentation {r.presentation_id} maps to both "
                                f"{prev} and {r.image_id}")
        if not self.verification_pairs:
            self.verification_pairs = self._infer_pairs()

    def _infer_pairs(self) -> list[tuple[str, str]]:
        first: dict[str, str] = {}
        pairs: list[tuple[str, str]] = []
        for r in self.records:
            p0 = first.setdefault(r.image_id, r.presentation_id)
            if r.presentation_id != p0 and (r.image_id, r.presentation_id) not in pairs:
                pairs.append((r.image_id, r.presentation_id))
        return pairs

    @property
    def subjects(self) -> list[str]:
        return list(dict.fromkeys(r.subject_id for r in self.records))

    @property
    def duplicate_presentations(self) -> set[str]:
        return {p for _, p in self.verification_pairs}

    def primary_scores(self) -> dict[str, dict[str, int]]:
        """image_id -> subject_id -> score, duplicates excluded."""
        dup = self.duplicate_presentations
        out: dict[str, dict[str, int]] = {}
        for r in self.records:
            if r.presentation_id in dup:
                continue
            out.setdefault(r.image_id, {})[r.subject_id] = r.score
        return out

    def by_subject(self) -> dict[str, dict[str, int]]:
        """subject_id -> image_id -> primary score."""
        out: dict[str, dict[str, int]] = {}
        for image_id, scores in self.primary_scores().items():
            for subject, s in scores.items():
                out.setdefault(subject, {})[image_id] = s
        return out

    def presentation_scores(self) -> dict[tuple[str, str], int]:
        return {(r.subject_id, r.presentation_id): r.score for r in self.records}


@dataclass(frozen=True)
class MosRecord:
    image_id: str
    mos: float
    raw_mean: float
    variance: float
    n_raters: int
    iqr: float


class MosTable(dict):
    """Mapping image_id -> :class:`MosRecord`."""

    def image_ids(self) -> list[str]:
        return list(self.keys())

    def mos_vector(self, ids: Sequence[str]) -> np.ndarray:
        return np.array([self[i].mos for i in ids], dtype=np.float64)


@dataclass
class AgreementReport:
    oc: float
    mean_ncc: float
    mean_eud: float
    pairs: list[dict] = field(default_factory=list)
    fluctuations: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "oc": self.oc,
            "mean_ncc": self.mean_ncc,
            "mean_eud": self.mean_eud,
            "pairs": self.pairs,
            "fluctuations": self.fluctuations,
        }


def raw_to_mos(raw_mean: float) -> float:
    """Affine map of the 1..5 rating mean onto 0..100."""
    return (raw_mean - 1.0) / 4.0 * 100.0


def iqr(scores: Sequence[float]) -> float:
    """75th minus 25th percentile, linear interpolation between order statistics."""
    q25, q75 = np.percentile(np.asarray(scores, dtype=np.float64), [25, 75], method="linear")
    return float(q75 - q25)


def compute_mos(ratings: RatingTable, images: Optional[Iterable[str]] = None) -> MosTable:
    per_image = ratings.primary_scores()
    wanted = list(images) if images is not None else list(per_image)
    table = MosTable()
    for image_id in wanted:
        scores = list(per_image.get(image_id, {}).values())
        if not scores:
            raise DataError(f"image {image_id!r} has no ratings")
        arr = np.asarray(scores, dtype=np.float64)
        mean = float(arr.mean())
        var = float(arr.var(ddof=1)) if arr.size > 1 else 0.0
        table[image_id] = MosRecord(image_id, raw_to_mos(mean), mean, var, int(arr.size),
                                    iqr(arr))
    return table


def outlier_coefficient(mos_table: MosTable, threshold: float = 1.0) -> float:
    """Fraction of images whose rating IQR is strictly larger than ``threshold``."""
    if not mos_table:
        raise DataError("outlier coefficient of an empty table")
    n_out = sum(1 for rec in mos_table.values() if rec.iqr > threshold)
    return n_out / len(mos_table)


def ncc(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


def eud(u: np.ndarray, v: np.ndarray, score_range: float = 4.0) -> float:
    """Euclidean distance normalized by rating range and sqrt(length)."""
    return float(np.linalg.norm(u - v) / (score_range * math.sqrt(len(u))))


def rater_agreement(ratings: RatingTable) -> AgreementReport:
    by_subject = ratings.by_subject()
    subjects = sorted(by_subject)
    if len(subjects) < 2:
        raise DataError("rater agreement needs at least two subjects")
    pairs = []
    for a, b in itertools.combinations(subjects, 2):
        common = sorted(set(by_subject[a]) & set(by_subject[b]))
        if len(common) < 2:
            raise DataError(f"subjects {a} and {b} share fewer than two rated images")
        u = np.array([by_subject[a][i] for i in common], dtype=np.float64)
        v = np.array([by_subject[b][i] for i in common], dtype=np.float64)
        pairs.append({"a": a, "b": b, "n": len(common), "ncc": ncc(u, v), "eud": eud(u, v)})
    fluct: dict[str, int] = {}
    if ratings.verification_pairs:
        fluct = {s: d.fluctuations for s, d in screen_subjects(ratings).items()}
    return AgreementReport(
        oc=outlier_coefficient(compute_mos(ratings)),
        mean_ncc=float(np.mean([p["ncc"] for p in pairs])),
        mean_eud=float(np.mean([p["eud"] for p in pairs])),
        pairs=pairs,
        fluctuations=fluct,
    )


@dataclass(frozen=True)
class ScreeningDecision:
    subject_id: str
    fluctuations: int
    n_verification: int
    keep: bool


def screen_subjects(
    ratings: RatingTable,
    max_diff: int = 2,
    max_fluctuations: Optional[float] = None,
) -> dict[str, ScreeningDecision]:
    """Flag subjects whose repeated verification ratings drift.

    A verification image is a fluctuation image when the primary and repeat
    scores differ by more than ``max_diff``. A subject is discarded when the
    fluctuation count exceeds ``max_fluctuations`` (default: half the
    verification-set size).
    """
    pairs = ratings.verification_pairs
    if not pairs:
        raise DataError("no verification pairs in rating table")
    limit = len(pairs) / 2.0 if max_fluctuations is None else max_fluctuations
    primary: dict[str, str] = {}
    dup = ratings.duplicate_presentations
    for r in ratings.records:
        if r.presentation_id not in dup:
            primary.setdefault(r.image_id, r.presentation_id)
    scores = ratings.presentation_scores()
    out: dict[str, ScreeningDecision] = {}
    for subject in ratings.subjects:
        count = 0
        for image_id, rep in pairs:
            first = scores.get((subject, primary.get(image_id, "")))
            second = scores.get((subject, rep))
            if first is None or second is None:
                raise DataError(f"subject {subject} is missing verification ratings for "
                                f"{image_id!r}")
            if abs(first - second) > max_diff:
                count += 1
        out[subject] = ScreeningDecision(subject, count, len(pairs), count <= limit)
    return out


def read_ratings(path: str | Path) -> RatingTable:
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RATINGS_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(RATINGS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                score = int(row[3])
            except ValueError:
                raise DataError(f"{path}:{lineno}: score {row[3]!r} is not an integer") from None
            records.append(Rating(row[0], row[1], row[2], score))
    try:
        return RatingTable(records)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_ratings(table: RatingTable, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATINGS_HEADER)
        for r in table.records:
            w.writerow([r.subject_id, r.image_id, r.presentation_id, r.score])


def write_mos(table: MosTable, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MOS_HEADER)
        for rec in table.values():
            w.writerow([rec.image_id, repr(rec.mos), repr(rec.raw_mean), repr(rec.variance),
                        rec.n_raters, repr(rec.iqr)])


def read_mos(path: str | Path) -> MosTable:
    path = Path(path)
    table = MosTable()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != MOS_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(MOS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rec = MosRecord(row[0], float(row[1]), float(row[2]), float(row[3]),
                                int(row[4]), float(row[5]))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if rec.n_raters < 1 or rec.variance < 0:
                raise DataError(f"{path}:{lineno}: n_raters must be >= 1 and variance >= 0")
            if not 0.0 <= rec.mos <= 100.0:
                raise DataError(f"{path}:{lineno}: mos {rec.mos} outside [0, 100]")
            if rec.image_id in table:
                raise DataError(f"{path}:{lineno}: duplicate image_id {rec.image_id!r}")
            table[rec.image_id] = rec
    return table
