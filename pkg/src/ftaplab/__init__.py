"""Asymptotic arbitrage and market free lunches on sequences of finite-state markets."""

from .orlicz import (Entropy, ExpMinusLinear, Power, Scaled, Tabulated, YoungFunction, YoungUtility,
                     PiecewiseConcaveUtility, complementary, luxemburg_norm, parse_young, polar_gauge)
from .spaces import DensityVector, FiniteProbSpace
from .convexsolve import ConstrainedClaimSet, LinearProgram, knap_min, lp_solve, min_over_cone
from .market import (FiniteMarket, MarketValidationError, SeparatingSet, check_na, find_emm, in_C,
                     load_market, one_period)
from .duality import (UtilityProblem, lambda_bracket, separating_from_set, sup_utility_dual,
                      sup_utility_primal)
from .report import AnalysisReport

__all__ = [
    "Entropy",
    "ExpMinusLinear",
    "Power",
    "Scaled",
    "Tabulated",
    "YoungFunction",
    "YoungUtility",
    "PiecewiseConcaveUtility",
    "complementary",
    "luxemburg_norm",
    "parse_young",
    "polar_gauge",
    "DensityVector",
    "FiniteProbSpace",
    "ConstrainedClaimSet",
    "LinearProgram",
    "knap_min",
    "lp_solve",
    "min_over_cone",
    "FiniteMarket",
    "MarketValidationError",
    "SeparatingSet",
    "check_na",
    "find_emm",
    "in_C",
    "load_market",
    "one_period",
    "UtilityProblem",
    "lambda_bracket",
    "separating_from_set",
    "sup_utility_dual",
    "sup_utility_primal",
    "AnalysisReport",
]

__version__ = "0.1.0"
