import math
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from tis import dist
from tis.dist import Bernoulli, Beta, Bounded, FinitePopulation, Poisson, TwoPoint, Uniform
from tis.errors import DomainError, UnsupportedModelError
from tis.model import PrecisionSpec, SamplingPlan, support_values

from .conftest import enumerate_paths


def test_small_binomial_pmf():
    table = dist.exact_pmf(SamplingPlan(gamma=2, n_max=3), Bernoulli(p=0.5))
    law = {e.value: e.probability for e in table.entries}
    assert law == pytest.approx({Fraction(0): 1 / 8, Fraction(1, 3): 3 / 8, Fraction(2, 3): 2 / 8, Fraction(1): 2 / 8})
    assert table.total() == pytest.approx(1.0, abs=1e-15)
    assert table.stop_time_distribution() == pytest.approx({2: 0.25, 3: 0.75})


def test_small_binomial_coverage_and_expected_n():
    plan = SamplingPlan(gamma=2, n_max=3)
    spec = PrecisionSpec(eps_a=0.2, eps_r=0.5, delta=0.1)
    assert dist.exact_coverage(plan, Bernoulli(p=0.5), spec) == pytest.approx(5 / 8, abs=1e-15)
    expected = dist.expected_n(plan, Bernoulli(p=0.5))
    assert expected.value == pytest.approx(2.75, abs=1e-14)
    assert expected.bound == 3.0
    assert expected.holds and not expected.tie


@pytest.mark.parametrize("n", [1, 4, 7, 10])
def test_pmf_matches_path_enumeration(n):
    p = Fraction(3, 10)
    for gamma in range(1, n + 2):
        plan = SamplingPlan(gamma=gamma, n_max=n)
        exact = enumerate_paths(plan, p)
        table = dist.exact_pmf(plan, Bernoulli(p=0.3))
        assert {e.value for e in table.entries} == set(support_values(plan))
        for value, probability in exact.items():
            assert table.probability_of(value) == pytest.approx(float(probability), rel=1e-12, abs=1e-15)


def _cumulative_check(plan, model):
    table = dist.exact_pmf(plan, model)
    values = [e.value for e in table.entries]
    probs = np.array([e.probability for e in table.entries])
    points = set(values)
    points.update((a + b) / 2 for a, b in zip(values, values[1:]))
    points.update({Fraction(-1, 10), Fraction(0), values[-1] + Fraction(1, 7)})
    for z in sorted(points):
        below = math.fsum(probs[[v <= z for v in values]])
        above = math.fsum(probs[[v >= z for v in values]])
        assert dist.cdf_le(plan, model, z) == pytest.approx(below, abs=1e-10)
        assert dist.ccdf_ge(plan, model, z) == pytest.approx(above, abs=1e-10)


@pytest.mark.parametrize("gamma", [1, 2, 3, 5, 10])
@pytest.mark.parametrize("n", [1, 7, 12, 25, 40])
@pytest.mark.parametrize("p", [0.1, 0.25, 0.5, 0.9])
def test_tail_split_matches_pmf_binomial(gamma, n, p):
    _cumulative_check(SamplingPlan(gamma=gamma, n_max=n), Bernoulli(p=p))


@pytest.mark.parametrize("M", [0, 1, 7, 19, 20])
def test_tail_split_matches_pmf_finite(M):
    _cumulative_check(SamplingPlan(gamma=3, n_max=12), FinitePopulation(N=20, M=M))


@pytest.mark.parametrize("lam", [0.1, 0.7, 2.0, 6.0])
def test_tail_split_matches_pmf_poisson(lam):
    _cumulative_check(SamplingPlan(gamma=4, n_max=9), Poisson(lam=lam))


def test_finite_population_edges():
    everything = dist.exact_pmf(SamplingPlan(gamma=3, n_max=12), FinitePopulation(N=20, M=20))
    assert everything.probability_of(Fraction(1)) == pytest.approx(1.0, abs=1e-14)
    nothing = dist.exact_pmf(SamplingPlan(gamma=3, n_max=12), FinitePopulation(N=20, M=0))
    assert nothing.probability_of(Fraction(0)) == pytest.approx(1.0, abs=1e-14)


def test_poisson_pmf_sums_to_one():
    for lam in (0.05, 1.0, 12.0):
        table = dist.exact_pmf(SamplingPlan(gamma=6, n_max=15), Poisson(lam=lam))
        assert table.total() == pytest.approx(1.0, abs=1e-12)
        assert max(e.value for e in table.entries) == Fraction(6)


@pytest.mark.parametrize("p", np.linspace(0.15, 0.5, 8))
def test_expected_n_below_bound(p):
    report = dist.expected_n(SamplingPlan(gamma=5, n_max=20), Bernoulli(p=float(p)))
    assert report.value < report.bound
    assert report.bound_kind == "min(n, gamma/p)"


@pytest.mark.parametrize("p", np.linspace(0.25, 0.35, 5))
def test_expected_n_below_bound_for_the_explicit_plan(p, explicit_plan):
    report = dist.expected_n(explicit_plan, Bernoulli(p=float(p)))
    assert report.holds
    assert report.value < min(577, 173 / p)


def test_expected_n_ties_when_stopping_is_impossible():
    report = dist.expected_n(SamplingPlan(gamma=4, n_max=30), FinitePopulation(N=60, M=1))
    assert report.value == pytest.approx(30.0)
    assert report.bound == 30.0


def test_expected_n_finite_and_poisson():
    for M in range(8, 60, 7):
        report = dist.expected_n(SamplingPlan(gamma=4, n_max=30), FinitePopulation(N=60, M=M))
        assert report.value < report.bound
    report = dist.expected_n(SamplingPlan(gamma=4, n_max=30), Poisson(lam=0.3))
    assert report.bound == pytest.approx(4 / 0.3 + 1)
    assert report.value < report.bound


def test_explicit_plan_coverage_on_a_grid(explicit_plan, spec):
    for p in np.linspace(0.005, 0.995, 199):
        assert dist.exact_coverage(explicit_plan, Bernoulli(p=float(p)), spec) >= 1 - spec.delta


@pytest.mark.slow
def test_explicit_plan_coverage_on_a_fine_grid(explicit_plan, spec):
    for i in range(1, 1000):
        assert dist.exact_coverage(explicit_plan, Bernoulli(p=i / 1000), spec) >= 1 - spec.delta


def test_coverage_is_one_when_margins_cover_everything():
    spec = PrecisionSpec(eps_a=0.6, eps_r=0.9, delta=0.05)
    assert dist.exact_coverage(SamplingPlan(gamma=2, n_max=5), Bernoulli(p=0.5), spec) == pytest.approx(1.0)


def test_exact_operations_reject_bounded_models():
    model = Bounded(distribution=Beta(alpha=2, beta=5))
    with pytest.raises(UnsupportedModelError):
        dist.exact_pmf(SamplingPlan(gamma=3, n_max=10), model)
    with pytest.raises(UnsupportedModelError):
        dist.cdf_le(SamplingPlan(gamma=3, n_max=10), model, 0.5)


def test_finite_plan_larger_than_population():
    with pytest.raises(DomainError):
        dist.exact_pmf(SamplingPlan(gamma=3, n_max=30), FinitePopulation(N=20, M=4))


def test_model_validation():
    with pytest.raises(ValidationError):
        Bernoulli(p=1.0)
    with pytest.raises(ValidationError):
        FinitePopulation(N=5, M=6)
    with pytest.raises(ValidationError):
        TwoPoint(a=0.5, b=0.2, w=0.3)
    with pytest.raises(ValidationError):
        Uniform(lo=0.2, hi=1.5)
    assert Bounded(distribution=TwoPoint(a=0.0, b=1.0, w=0.25)).mean == pytest.approx(0.25)
    assert Bounded.model_validate({"distribution": {"kind": "beta", "alpha": 2, "beta": 5}}).mean == pytest.approx(2 / 7)


def _thresholds(plan):
    values = support_values(plan)
    return [*values, *((a + b) / 2 for a, b in zip(values, values[1:]))]


@pytest.mark.parametrize("plan", [SamplingPlan(gamma=5, n_max=20), SamplingPlan(gamma=3, n_max=9)], ids=str)
def test_tails_move_with_p(plan):
    grid = [float(p) for p in np.linspace(0.01, 0.99, 99)]
    for z in _thresholds(plan):
        below = [dist.cdf_le(plan, Bernoulli(p=p), z) for p in grid]
        above = [dist.ccdf_ge(plan, Bernoulli(p=p), z) for p in grid]
        assert all(b <= a + 1e-12 for a, b in zip(below, below[1:]))
        assert all(b >= a - 1e-12 for a, b in zip(above, above[1:]))


def test_tails_move_with_M():
    plan = SamplingPlan(gamma=5, n_max=20)
    for z in _thresholds(plan):
        below = [dist.cdf_le(plan, FinitePopulation(N=40, M=M), z) for M in range(41)]
        above = [dist.ccdf_ge(plan, FinitePopulation(N=40, M=M), z) for M in range(41)]
        assert all(b <= a + 1e-12 for a, b in zip(below, below[1:]))
        assert all(b >= a - 1e-12 for a, b in zip(above, above[1:]))
