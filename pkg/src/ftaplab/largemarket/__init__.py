"""Sequences of finite markets: contiguity, asymptotic arbitrage, free lunches, bicontiguous measures."""

from .families import MarketFamily, MeasureSeq, binomial_market, constant_market, klein_market
from .contiguity import (ContiguityProfile, YoungWitness, contiguity_profile, exact_worst_set,
                         fractional_worst, threshold_worst_set, young_domination)
from .detectors import (ABSENT, FOUND, NOT_FOUND, Schedule, Verdict, detect_aa1, detect_aa2,
                        detect_aflbr, detect_all, detect_saa, gain_profile, lift_to_C)
from .namfl import NaflResult, NamflResult, nafl_check, namfl_worstcase
from .selection import HSResult, HypothesisViolated, MixReport, hs_select, mix_sequences
from .pipeline import BuildError, BuildResult, build_bicontiguous, minimal_heavy_sets

__all__ = [
    "MarketFamily",
    "MeasureSeq",
    "binomial_market",
    "constant_market",
    "klein_market",
    "ContiguityProfile",
    "YoungWitness",
    "contiguity_profile",
    "exact_worst_set",
    "fractional_worst",
    "threshold_worst_set",
    "young_domination",
    "ABSENT",
    "FOUND",
    "NOT_FOUND",
    "Schedule",
    "Verdict",
    "detect_aa1",
    "detect_aa2",
    "detect_aflbr",
    "detect_all",
    "detect_saa",
    "gain_profile",
    "lift_to_C",
    "NaflResult",
    "NamflResult",
    "nafl_check",
    "namfl_worstcase",
    "HSResult",
    "HypothesisViolated",
    "MixReport",
    "hs_select",
    "mix_sequences",
    "BuildError",
    "BuildResult",
    "build_bicontiguous",
    "minimal_heavy_sets",
]
