"""Content-disjoint train/test splits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import DataError
from ..manifest import DatasetManifest

SPLIT_VERSION = 1


@dataclass
class Fold:
    train: list[str]
    test: list[str]


@dataclass
class SplitPlan:
    folds: list[Fold]
    content_groups: dict[str, str] = field(default_factory=dict)
    scheme: str = "kfold"
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for k, fold in enumerate(self.folds):
            train_groups = {self.content_groups.get(i, i) for i in fold.train}
            test_groups = {self.content_groups.get(i, i) for i in fold.test}
            shared = train_groups & test_groups
            if shared:
                raise DataError(f"fold {k}: content groups on both sides: {sorted(shared)[:3]}")

    def test_groups(self, k: int) -> set[str]:
        return {self.content_groups.get(i, i) for i in self.folds[k].test}

    def to_json(self) -> dict[str, Any]:
        return {
            "version": SPLIT_VERSION,
            "scheme": self.scheme,
            "seed": self.seed,
            "folds": [{"train": f.train, "test": f.test} for f in self.folds],
            "content_groups": self.content_groups,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SplitPlan:
        if obj.get("version") != SPLIT_VERSION:
            raise DataError(f"unsupported split plan version {obj.get('version')!r}")
        folds = [Fold(list(f["train"]), list(f["test"])) for f in obj["folds"]]
        return cls(folds, dict(obj.get("content_groups", {})), obj.get("scheme", "kfold"),
                   int(obj.get("seed", 0)))


def make_splits(
    manifest: DatasetManifest,
    scheme: str = "kfold",
    k: int = 10,
    ratio: float = 0.8,
    seed: int = 0,
) -> SplitPlan:
    """Partition content groups (never single images) into folds.

    ``holdout`` puts floor(ratio * G) groups in training and the rest in
    test; ``kfold`` deals the shuffled groups into ``k`` near-equal folds
    and tests each fold once.
    """
    groups_of = manifest.content_groups()
    groups = sorted(set(groups_of.values()))
    order = [groups[i] for i in np.random.default_rng(seed).permutation(len(groups))]

    if scheme == "holdout":
        if not 0 < ratio < 1:
            raise ValueError(f"holdout ratio must be in (0, 1), got {ratio}")
        n_train = math.floor(ratio * len(groups))
        if n_train < 1 or n_train >= len(groups):
            raise DataError(f"{len(groups)} groups cannot be split {ratio:.2f}/{1 - ratio:.2f}")
        test_sets = [set(order[n_train:])]
    elif scheme == "kfold":
        if k < 2:
            raise ValueError(f"k must be >= 2, got {k}")
        if len(groups) < k:
            raise DataError(f"{len(groups)} content groups are fewer than {k} folds")
        test_sets = [set(chunk.tolist()) for chunk in np.array_split(np.array(order), k)]
    else:
        raise ValueError(f"unknown split scheme {scheme!r}")

    folds = []
    for test_groups in test_sets:
        test = [e.image_id for e in manifest if e.content_group_id in test_groups]
        train = [e.image_id for e in manifest if e.content_group_id not in test_groups]
        folds.append(Fold(train, test))
    return SplitPlan(folds, groups_of, scheme, seed)


def write_splits(plan: SplitPlan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan.to_json(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_splits(path: str | Path) -> SplitPlan:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    return SplitPlan.from_json(obj)
