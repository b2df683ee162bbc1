"""Fuzzy inductive reasoning with Sugeno rule extraction and a mixed pattern/fuzzy predictor."""

from .dataset import Dataset, TimeSeries, denormalize, load_csv, normalize, split
from .fuzzifier import Partition, QualitativeValue, Side, defuzzify, efp_landmarks, fuzzify, fuzzify_series
from .identification import Mask, PatternRule, PatternRuleBase, apply_mask, best_mask, enumerate_masks, mask_quality
from .forecast import fir_forecast, fir_predict_one, nearest_rules
from .sugeno import SugenoRuleBase, cost, fire_strengths, init_rule_grid, sugeno_infer, tune_weights
from .mixed import (
    ErrorModel,
    MixedModel,
    build_error_model,
    build_mixed_model,
    f_mix,
    mixed_forecast,
    mixed_infer,
    normalized_distance,
    region_of,
    select_retained_rules,
)
from .evaluation import SweepResult, SynthSpec, emit_report, mse_percent, run_sweep, synth_generate

__version__ = "0.1.0"
