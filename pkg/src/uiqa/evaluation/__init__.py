from .correlation import LogisticFit, fit_logistic, kendall, midranks, pearson, spearman
from .protocol import EvalReport, NonTargetReport, evaluate, nontarget_report, write_report
from .significance import (
    SignificantPairSet,
    c0,
    c0_outcomes,
    normal_cdf,
    significance_matrix,
    significant_pairs,
    z_score,
)
from .splits import Fold, SplitPlan, make_splits, read_splits, write_splits

__all__ = [
    "EvalReport",
    "Fold",
    "LogisticFit",
    "NonTargetReport",
    "SignificantPairSet",
    "SplitPlan",
    "c0",
    "c0_outcomes",
    "evaluate",
    "fit_logistic",
    "kendall",
    "make_splits",
    "midranks",
    "nontarget_report",
    "normal_cdf",
    "pearson",
    "read_splits",
    "significance_matrix",
    "significant_pairs",
    "spearman",
    "write_report",
    "write_splits",
    "z_score",
]
