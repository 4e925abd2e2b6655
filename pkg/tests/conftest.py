import itertools
from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest

from tis.model import PrecisionSpec, SamplingPlan, run_stop_rule


@pytest.fixture
def spec() -> PrecisionSpec:
    return PrecisionSpec(eps_a=0.05, eps_r=0.2, delta=0.05)


@pytest.fixture
def explicit_plan() -> SamplingPlan:
    return SamplingPlan(gamma=173, n_max=577)


def enumerate_paths(plan: SamplingPlan, p: Fraction) -> dict[Fraction, Fraction]:
    """Exact law of the estimator by walking every 0/1 path of length n_max."""
    law: dict[Fraction, Fraction] = defaultdict(Fraction)
    n = plan.n_max
    for path in itertools.product((0, 1), repeat=n):
        outcome = run_stop_rule(np.array(path, dtype=np.int64), plan)
        ones = sum(path)
        weight = p**ones * (1 - p) ** (n - ones)
        law[Fraction(min(outcome.k_sum, int(plan.gamma)), outcome.n_stop)] += weight
    return dict(law)
