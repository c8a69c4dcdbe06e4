"""Dual phi-divergence estimation with influence-function robustness tools."""

from .criterion import DualCriterion, dual_payoff, dual_payoff_dtheta, empirical_criterion, population_divergence
from .divergence import PowerDivergence, phi, phi_deriv
from .estimators import (EstimateResult, SearchBox, divergence_estimate, dphi_estimate, mdpde, mdphi_estimate,
                         mle, pilot_estimate)
from .exceptions import DegenerateEscortError, DomainError, DualDivError, EstimationError, QuadratureError
from .models import (CauchyLocation, LogisticLocation, NormalLocation, NormalScale, ParametricModel,
                     QuadratureSettings, get_model, integrate)
from .robustness import (Boundedness, InfluenceProfile, Target, asymptotic_variance_and_are, gross_error_sensitivity,
                         if_divergence, if_estimator, if_minimizer, influence_profile)
from .testing import TestConfig, TestOutcome, asymptotic_level, asymptotic_power, test_statistic

__all__ = [
    "DualCriterion", "dual_payoff", "dual_payoff_dtheta", "empirical_criterion", "population_divergence",
    "PowerDivergence", "phi", "phi_deriv", "EstimateResult", "SearchBox", "divergence_estimate",
    "dphi_estimate", "mdpde", "mdphi_estimate", "mle", "pilot_estimate", "DegenerateEscortError",
    "DomainError", "DualDivError", "EstimationError", "QuadratureError", "CauchyLocation", "LogisticLocation",
    "NormalLocation", "NormalScale", "ParametricModel", "QuadratureSettings", "get_model", "integrate",
    "Boundedness", "InfluenceProfile", "Target", "asymptotic_variance_and_are", "gross_error_sensitivity",
    "if_divergence", "if_estimator", "if_minimizer", "influence_profile", "TestConfig", "TestOutcome",
    "asymptotic_level", "asymptotic_power", "test_statistic",
]

__version__ = "0.1.0"
