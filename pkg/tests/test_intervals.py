import functools
import math

import numpy as np
import pytest

from tis import special
from tis.bounds import mb
from tis.dist import Bernoulli, FinitePopulation, Poisson, _pmf_arrays
from tis.errors import DomainError
from tis.intervals import ConfidenceInterval, ci_binomial, ci_bounded, ci_finite, ci_poisson
from tis.model import Outcome, SamplingPlan


def _outcome(n_stop, k_sum):
    return Outcome(n_stop=n_stop, k_sum=k_sum)


def test_binomial_corners():
    none = ci_binomial(_outcome(10, 0), 0.05)
    assert none.lower == 0.0
    assert none.upper == pytest.approx(1 - 0.025**0.1, abs=1e-9)
    assert none.upper == pytest.approx(0.308502, abs=1e-6)
    every = ci_binomial(_outcome(10, 10), 0.05)
    assert every.upper == 1.0
    assert every.lower == pytest.approx(0.025**0.1, abs=1e-9)


def test_binomial_limits_solve_their_equations():
    ci = ci_binomial(_outcome(40, 13), 0.1)
    assert special.binom_tail_ge(40, ci.lower, 13) == pytest.approx(0.05, abs=1e-9)
    assert special.binom_tail_le(40, ci.upper, 13) == pytest.approx(0.05, abs=1e-9)
    assert ci.lower < ci.estimate < ci.upper
    assert ci.level == pytest.approx(0.9)


def test_binomial_limits_rise_with_k():
    limits = [ci_binomial(_outcome(25, k), 0.05) for k in range(26)]
    assert all(a.lower <= b.lower and a.upper <= b.upper for a, b in zip(limits, limits[1:]))


def test_binomial_domain():
    with pytest.raises(DomainError):
        ci_binomial(_outcome(5, 6), 0.05)
    with pytest.raises(DomainError):
        ci_binomial(_outcome(5, 2), 1.5)
    with pytest.raises(DomainError):
        ci_binomial(_outcome(5, 2.5), 0.05)


def _exact_coverage(plan, model, truth, interval):
    _, n_stop, k_sum, probs = _pmf_arrays(plan, model)
    return math.fsum(pr for m, k, pr in zip(n_stop, k_sum, probs) if interval(int(m), int(k)).contains(truth))


DELTAS = [0.05, 0.1]


@pytest.mark.parametrize("delta", DELTAS)
@pytest.mark.parametrize("gamma,n", [(1, 20), (5, 30), (7, 12), (10, 100)])
def test_binomial_interval_coverage(gamma, n, delta):
    plan = SamplingPlan(gamma=gamma, n_max=n)
    interval = functools.cache(lambda m, k: ci_binomial(_outcome(m, k), delta))
    for p in np.linspace(0.005, 0.995, 199):
        coverage = _exact_coverage(plan, Bernoulli(p=float(p)), float(p), interval)
        assert coverage >= 1 - delta - 1e-12


@pytest.mark.parametrize("delta", DELTAS)
@pytest.mark.parametrize("N,gamma,n", [(30, 3, 10), (60, 4, 20), (60, 2, 60), (12, 5, 9)])
def test_finite_interval_coverage(N, gamma, n, delta):
    plan = SamplingPlan(gamma=gamma, n_max=n)
    interval = functools.cache(lambda m, k: ci_finite(_outcome(m, k), N, delta))
    for M in range(N + 1):
        coverage = _exact_coverage(plan, FinitePopulation(N=N, M=M), M, interval)
        assert coverage >= 1 - delta - 1e-12


@pytest.mark.parametrize("delta", DELTAS)
@pytest.mark.parametrize("gamma,n", [(1, 10), (3, 5), (5, 20), (8, 30)])
def test_poisson_interval_coverage(gamma, n, delta):
    plan = SamplingPlan(gamma=gamma, n_max=n)
    interval = functools.cache(lambda m, k: ci_poisson(Outcome.observe(plan, m, k), plan, delta))
    for lam in (0.1, 0.5, 1.0, 2.0, 5.0):
        coverage = _exact_coverage(plan, Poisson(lam=lam), lam, interval)
        assert coverage >= 1 - delta - 1e-12


@pytest.mark.parametrize("m", range(3, 11))
def test_poisson_upper_limit_is_continuous_across_stopping(m):
    # stopping at draw m leaves the first m - 1 draws below gamma, as a truncated run of m - 1 draws would
    plan = SamplingPlan(gamma=4, n_max=10)
    stopped = ci_poisson(Outcome.observe(plan, m, 4), plan, 0.05)
    short = SamplingPlan(gamma=4, n_max=m - 1)
    truncated = ci_poisson(Outcome.observe(short, m - 1, 3), short, 0.05)
    assert stopped.case.endswith("upper:stopped")
    assert truncated.case.endswith("upper:truncated")
    assert stopped.upper == pytest.approx(truncated.upper, rel=1e-8)


@pytest.mark.parametrize("m", range(1, 11))
def test_poisson_lower_limit_is_continuous_across_stopping(m):
    plan = SamplingPlan(gamma=4, n_max=10)
    stopped = ci_poisson(Outcome.observe(plan, m, 4), plan, 0.05)
    wider = SamplingPlan(gamma=5, n_max=m)
    truncated = ci_poisson(Outcome.observe(wider, m, 4), wider, 0.05)
    assert stopped.case.startswith("lower:stopped")
    assert truncated.case.startswith("lower:truncated")
    assert stopped.lower == pytest.approx(truncated.lower, rel=1e-8)


def test_finite_census_is_exact():
    ci = ci_finite(_outcome(10, 4), 10, 0.05)
    assert (ci.lower, ci.upper) == (4, 4)
    assert ci.closed and ci.kind == "integer"
    assert ci.contains(4)
    assert ci.proportion == (0.4, 0.4)


def test_finite_limits_match_a_full_scan():
    N, n, k, half = 50, 10, 3, 0.025
    ci = ci_finite(_outcome(n, k), N, 0.05)
    assert ci.lower == min(M for M in range(N + 1) if special.hyper_tail_ge(N, M, n, k) > half)
    assert ci.upper == max(M for M in range(N + 1) if special.hyper_tail_le(N, M, n, k) > half)


def test_finite_domain():
    with pytest.raises(DomainError):
        ci_finite(_outcome(12, 3), 10, 0.05)


def test_poisson_zero_count():
    plan = SamplingPlan(gamma=3, n_max=2)
    ci = ci_poisson(Outcome.observe(plan, 2, 0), plan, 0.05)
    assert ci.lower == 0.0
    assert ci.upper == pytest.approx(-math.log(0.025) / 2, abs=1e-9)
    assert ci.case == "lower:zero,upper:truncated"


def test_poisson_single_draw_has_no_upper_limit():
    plan = SamplingPlan(gamma=3, n_max=10)
    ci = ci_poisson(Outcome.observe(plan, 1, 3), plan, 0.05)
    assert ci.upper == math.inf
    assert special.pois_tail_ge(ci.lower, 3) == pytest.approx(0.025, abs=1e-9)
    assert ci.case == "lower:stopped,upper:single"


def test_poisson_early_stop_uses_the_stopping_time():
    plan = SamplingPlan(gamma=4, n_max=10)
    ci = ci_poisson(Outcome.observe(plan, 5, 6), plan, 0.05)
    assert ci.estimate == pytest.approx(0.8)
    assert special.pois_tail_ge(5 * ci.lower, 4) == pytest.approx(0.025, abs=1e-9)
    assert special.pois_tail_le(4 * ci.upper, 3) == pytest.approx(0.025, abs=1e-9)


def test_poisson_rejects_inconsistent_outcomes():
    plan = SamplingPlan(gamma=5, n_max=10)
    with pytest.raises(DomainError):
        ci_poisson(Outcome(n_stop=3, k_sum=1), plan, 0.05)


def test_infinite_limit_serializes_as_text():
    ci = ConfidenceInterval(lower=0.5, upper=math.inf, level=0.95)
    dumped = ci.model_dump(mode="json")
    assert dumped["upper"] == "inf"
    assert ConfidenceInterval.model_validate(dumped).upper == math.inf
    assert ConfidenceInterval.model_validate_json(ci.model_dump_json()) == ci
    assert ci.contains(1e300)


def test_bounded_early_stop_at_one():
    plan = SamplingPlan(gamma=3, n_max=10)
    ci = ci_bounded(Outcome.observe(plan, 3, 3), plan, 0.05)
    assert ci.upper == 1.0
    assert ci.lower == pytest.approx(0.025 ** (1 / 3), abs=1e-9)


def test_bounded_zero_matches_the_binomial_limit():
    plan = SamplingPlan(gamma=3, n_max=10)
    ci = ci_bounded(Outcome.observe(plan, 10, 0), plan, 0.05)
    assert ci.lower == 0.0
    assert ci.upper == pytest.approx(1 - 0.025**0.1, abs=1e-9)


def test_bounded_truncated_limits_invert_the_exponent():
    plan = SamplingPlan(gamma=5, n_max=10)
    ci = ci_bounded(Outcome.observe(plan, 10, 2.5), plan, 0.05)
    assert ci.case == "lower:truncated,upper:truncated"
    rate = math.log(0.025) / 10
    assert mb(0.25, ci.lower) == pytest.approx(rate, abs=1e-9)
    assert mb(0.25, ci.upper) == pytest.approx(rate, abs=1e-9)
    assert ci.lower < 0.25 < ci.upper


def test_bounded_rejects_estimates_above_one():
    plan = SamplingPlan(gamma=5, n_max=10)
    with pytest.raises(DomainError):
        ci_bounded(Outcome.observe(plan, 2, 7), plan, 0.05)
