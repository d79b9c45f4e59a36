"""Venn-Abers calibration and self-calibrating conformal prediction."""

from .baselines import MondrianCpModel, SplitCpModel, fit_mondrian, fit_split_cp, interval_at
from .conformal import (
    EmptyIntervalWarning,
    PredictionBand,
    SccpConfig,
    SccpOutput,
    band,
    level_set_quantile,
    predict,
)
from .isotonic import IsotonicFit, WeightedSample, evaluate_step, fit_isotonic
from .metrics import MetricsReport, bin_by_quintile, conditional_coverage_by_prediction, score
from .venn_abers import CalibrationData, MultiPrediction, OutcomeGrid, derived_point, multipredict

__all__ = [
    "CalibrationData", "EmptyIntervalWarning", "IsotonicFit", "MetricsReport",
    "MondrianCpModel", "MultiPrediction", "OutcomeGrid", "PredictionBand",
    "SccpConfig", "SccpOutput", "SplitCpModel", "WeightedSample", "band",
    "bin_by_quintile", "conditional_coverage_by_prediction", "derived_point",
    "evaluate_step", "fit_isotonic", "fit_mondrian", "fit_split_cp",
    "interval_at", "level_set_quantile", "multipredict", "predict", "score",
]
