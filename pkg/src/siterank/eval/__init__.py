"""Ranking evaluation: NDPM, synthetic benchmark data and parameter sweeps."""

from siterank.eval.ndpm import (NdpmResult, NdpmUndefinedError, PreferenceJudgment, load_judgments,
                                ndpm, save_judgments)
from siterank.eval.synth import SyntheticSpec, default_spec, generate_synthetic

__all__ = ["NdpmResult", "NdpmUndefinedError", "PreferenceJudgment", "SyntheticSpec",
           "default_spec", "generate_synthetic", "load_judgments", "ndpm", "save_judgments"]
