"""Conformal testing of randomness: p-values, test martingales, change detection."""

from .batch import BatchTestResult, bartels_rvn, counterexample_demo
from .betting import (
    HistogramBetting,
    PowerBetting,
    SimpleMixture,
    Trajectory,
    parse_strategy,
    power_betting_function,
    product_martingale,
    simple_mixture,
)
from .changedetect import DetectorState, run_detector
from .core import (
    DataError,
    DomainError,
    EvidenceCategory,
    Observation,
    SeededRandomness,
    calibrate,
    jeffreys_category,
    vovk_sellke_bound,
)
from .datasets import Stream, StreamSpec, load_absenteeism, load_usps, permute, synth_stream
from .estimators import (
    BartelsRandomnessTest,
    ConformalChangeDetector,
    ConformalPValues,
    ConformalTestMartingale,
)
from .nonconformity import get_scorer, knn_diff_score, knn_ratio_score, median_ncm
from .pvalues import ConformalTransducer, conformal_pvalue, conformal_pvalues
from .upperprob import EventSet, uep_prob, uiid_prob

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
