"""Metrics, agreement, toxicity-API baselines and comparison tables."""

from hatefl.evaluation.agreement import AgreementReport, agreement_reports, cohens_kappa, krippendorff_alpha
from hatefl.evaluation.metrics import EvalResult, aggregate_seeds, macro_f1
from hatefl.evaluation.thresholds import ThresholdTable, classify_toxicity, threshold_table
from hatefl.evaluation.toxicity import ToxicityClient, ToxicityConfig, score_toxicity

__all__ = [
    "AgreementReport",
    "EvalResult",
    "ThresholdTable",
    "ToxicityClient",
    "ToxicityConfig",
    "agreement_reports",
    "aggregate_seeds",
    "classify_toxicity",
    "cohens_kappa",
    "krippendorff_alpha",
    "macro_f1",
    "score_toxicity",
    "threshold_table",
]
