"""Truncated inverse sampling: plan design, exact estimator laws, confidence
intervals and Monte Carlo checks."""

from tis.design import (
    CandidateGrouping,
    PlanCertificate,
    check_plan_binomial,
    check_plan_finite,
    explicit_plan_binomial,
    explicit_plan_bounded,
    explicit_plan_finite,
    refined_plan,
    worst_case_scan,
)
from tis.dist import Bernoulli, Bounded, FinitePopulation, Poisson, exact_coverage, exact_pmf, expected_n
from tis.intervals import ConfidenceInterval, ci_binomial, ci_bounded, ci_finite, ci_poisson
from tis.model import Outcome, PrecisionSpec, SamplingPlan, run_stop_rule
from tis.sim import SimConfig, SimReport, run_trials

__all__ = [
    "Bernoulli",
    "Bounded",
    "CandidateGrouping",
    "ConfidenceInterval",
    "FinitePopulation",
    "Outcome",
    "PlanCertificate",
    "Poisson",
    "PrecisionSpec",
    "SamplingPlan",
    "SimConfig",
    "SimReport",
    "check_plan_binomial",
    "check_plan_finite",
    "ci_binomial",
    "ci_bounded",
    "ci_finite",
    "ci_poisson",
    "exact_coverage",
    "exact_pmf",
    "expected_n",
    "explicit_plan_binomial",
    "explicit_plan_bounded",
    "explicit_plan_finite",
    "refined_plan",
    "run_stop_rule",
    "run_trials",
    "worst_case_scan",
]
