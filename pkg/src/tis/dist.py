"""Exact law of the truncated estimator.

Tail probabilities follow the two-case reduction of the estimator to a
fixed-size sample sum: for ``gamma <= n z``

    Pr{est <= z} = Pr{S_(ceil(gamma/z) - 1) < gamma}
    Pr{est >= z} = Pr{S_floor(gamma/z) >= gamma}

and otherwise ``Pr{S_n <= n z}`` / ``Pr{S_n >= n z}``. The same reduction
holds for draws without replacement. The pmf over the support is built
independently from stop-time probabilities, which lets the two constructions
check each other.
"""

import bisect
import logging
import math
from fractions import Fraction
from functools import lru_cache
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from tis import special
from tis.errors import DomainError, UnsupportedModelError
from tis.model import PrecisionSpec, Rational, SamplingPlan, as_fraction

logger = logging.getLogger(__name__)

_PMF_TOLERANCE = 1e-10


class Bernoulli(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["bernoulli"] = "bernoulli"
    p: float = Field(gt=0.0, lt=1.0)

    @property
    def mean(self) -> float:
        return self.p


class FinitePopulation(BaseModel):
    """N units of which M carry the attribute, drawn without replacement."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["finite"] = "finite"
    N: int = Field(ge=1)
    M: int = Field(ge=0)

    @model_validator(mode="after")
    def _marked_within_population(self) -> "FinitePopulation":
        if self.M > self.N:
            raise DomainError(f"need 0 <= M <= N, got M={self.M}, N={self.N}")
        return self

    @property
    def mean(self) -> float:
        return self.M / self.N


class Poisson(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["poisson"] = "poisson"
    lam: float = Field(gt=0.0)

    @property
    def mean(self) -> float:
        return self.lam


class TwoPoint(BaseModel):
    """Value ``b`` with probability ``w``, else ``a``."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["two_point"] = "two_point"
    a: float
    b: float
    w: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordered(self) -> "TwoPoint":
        if not 0.0 <= self.a < self.b <= 1.0:
            raise DomainError(f"need 0 <= a < b <= 1, got a={self.a}, b={self.b}")
        return self

    @property
    def mean(self) -> float:
        return self.a + self.w * (self.b - self.a)


class Uniform(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform"] = "uniform"
    lo: float = 0.0
    hi: float = 1.0

    @model_validator(mode="after")
    def _ordered(self) -> "Uniform":
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise DomainError(f"need 0 <= lo < hi <= 1, got lo={self.lo}, hi={self.hi}")
        return self

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


class Beta(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["beta"] = "beta"
    alpha: float = Field(gt=0.0)
    beta: float = Field(gt=0.0)

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


BoundedDistribution = Annotated[TwoPoint | Uniform | Beta, Field(discriminator="kind")]


class Bounded(BaseModel):
    """A variable on [0, 1]; only simulation can verify it."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["bounded"] = "bounded"
    distribution: BoundedDistribution

    @property
    def mean(self) -> float:
        return self.distribution.mean


PopulationModel = Annotated[
    Bernoulli | FinitePopulation | Poisson | Bounded, Field(discriminator="kind")
]
ExactModel = Bernoulli | FinitePopulation | Poisson


class PmfEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: Rational
    probability: float
    n_stop: int
    k_sum: int


class PmfTable(BaseModel):
    """Probabilities of every support value, with the stop time behind each."""

    model_config = ConfigDict(frozen=True)

    plan: SamplingPlan
    model: PopulationModel
    entries: tuple[PmfEntry, ...]

    def total(self) -> float:
        return math.fsum(e.probability for e in self.entries)

    def stop_time_distribution(self) -> dict[int, float]:
        dist: dict[int, list[float]] = {}
        for e in self.entries:
            dist.setdefault(e.n_stop, []).append(e.probability)
        return {m: math.fsum(ps) for m, ps in sorted(dist.items())}

    def probability_of(self, value: Fraction) -> float:
        return math.fsum(e.probability for e in self.entries if e.value == value)


class ExpectedSampleNumber(BaseModel):
    """E[n] with the strict upper bound it must stay below."""

    model_config = ConfigDict(frozen=True)

    value: float
    bound: float
    bound_kind: str
    holds: bool
    tie: bool


def _exact_gamma(plan: SamplingPlan, model: object) -> int:
    match model:
        case Bounded():
            raise UnsupportedModelError("no exact law for a general bounded variable; use simulation")
        case FinitePopulation(N=N) if plan.n_max > N:
            raise DomainError(f"n_max={plan.n_max} exceeds population size N={N}")
        case Bernoulli() | FinitePopulation() | Poisson():
            return plan.gamma_int
    raise UnsupportedModelError(f"unknown population model {model!r}")


def sum_tail_ge(model: ExactModel, m: int, j: int) -> float:
    """Pr{X_1 + ... + X_m >= j}."""
    if m == 0:
        return 1.0 if j <= 0 else 0.0
    match model:
        case Bernoulli(p=p):
            return special.binom_tail_ge(m, p, j)
        case FinitePopulation(N=N, M=M):
            return special.hyper_tail_ge(N, M, m, j)
        case Poisson(lam=lam):
            return special.pois_tail_ge(m * lam, j)
    raise UnsupportedModelError(f"no exact sum law for {model!r}")


def sum_tail_le(model: ExactModel, m: int, j: int) -> float:
    """Pr{X_1 + ... + X_m <= j}."""
    if m == 0:
        return 1.0 if j >= 0 else 0.0
    match model:
        case Bernoulli(p=p):
            return special.binom_tail_le(m, p, j)
        case FinitePopulation(N=N, M=M):
            return special.hyper_tail_le(N, M, m, j)
        case Poisson(lam=lam):
            return special.pois_tail_le(m * lam, j)
    raise UnsupportedModelError(f"no exact sum law for {model!r}")


def cdf_le(plan: SamplingPlan, model: ExactModel, z: float | Fraction) -> float:
    """Pr{est <= z}. Floats are read as decimals; z = 0 gives Pr{est = 0}."""
    gamma = _exact_gamma(plan, model)
    n = plan.n_max
    zq = as_fraction(z)
    if zq < 0:
        return 0.0
    if zq > 0 and gamma <= n * zq:
        return sum_tail_le(model, math.ceil(gamma / zq) - 1, gamma - 1)
    return sum_tail_le(model, n, math.floor(n * zq))


def ccdf_ge(plan: SamplingPlan, model: ExactModel, z: float | Fraction) -> float:
    """Pr{est >= z}; 1 for z <= 0."""
    gamma = _exact_gamma(plan, model)
    n = plan.n_max
    zq = as_fraction(z)
    if zq <= 0:
        return 1.0
    if gamma <= n * zq:
        return sum_tail_ge(model, math.floor(gamma / zq), gamma)
    return sum_tail_ge(model, n, math.ceil(n * zq))


def _log_stop_bernoulli(p: float, gamma: int, stops: np.ndarray) -> np.ndarray:
    # gamma-th success exactly at draw m
    return (
        special.log_choose_array(stops - 1, gamma - 1)
        + gamma * math.log(p)
        + (stops - gamma) * math.log1p(-p)
    )


def _log_stop_finite(N: int, M: int, gamma: int, stops: np.ndarray) -> np.ndarray:
    # gamma - 1 marked units in the first m - 1 draws, then a marked one
    head = (
        special.log_choose_array(M, gamma - 1)
        + special.log_choose_array(N - M, stops - gamma)
        - special.log_choose_array(N, stops - 1)
    )
    remaining_marked = M - gamma + 1
    if remaining_marked <= 0:
        return np.full(stops.shape, -np.inf)
    return head + np.log(remaining_marked) - np.log(N - stops + 1)


def _log_stop_poisson(lam: float, gamma: int, stops: np.ndarray) -> np.ndarray:
    # sum s < gamma after m - 1 draws, then a draw of at least gamma - s
    below = np.arange(gamma)
    with np.errstate(divide="ignore"):
        log_jump = np.log([special.pois_tail_ge(lam, gamma - s) for s in below])
    return np.array(
        [special.log_sum_exp(special.pois_logpmf((m - 1) * lam, below) + log_jump) for m in stops]
    )


@lru_cache(maxsize=256)
def _pmf_arrays(
    plan: SamplingPlan, model: ExactModel
) -> tuple[tuple[Fraction, ...], np.ndarray, np.ndarray, np.ndarray]:
    """Support values (ascending), stop times, clipped sums and probabilities."""
    gamma = _exact_gamma(plan, model)
    n = plan.n_max
    poisson = isinstance(model, Poisson)
    below = np.arange(min(gamma, n + 1) if not poisson else gamma)
    first_stop = 1 if poisson else gamma
    stops = np.arange(n, first_stop - 1, -1)

    match model:
        case Bernoulli(p=p):
            log_below = special.binom_logpmf(n, p, below)
            log_stops = _log_stop_bernoulli(p, gamma, stops)
        case FinitePopulation(N=N, M=M):
            log_below = special.hyper_logpmf(N, M, n, below)
            log_stops = _log_stop_finite(N, M, gamma, stops)
        case Poisson(lam=lam):
            log_below = special.pois_logpmf(n * lam, below)
            log_stops = _log_stop_poisson(lam, gamma, stops)

    values = tuple(Fraction(int(j), n) for j in below) + tuple(Fraction(gamma, int(m)) for m in stops)
    n_stop = np.concatenate([np.full(below.size, n), stops]).astype(np.int64)
    k_sum = np.concatenate([below, np.full(stops.size, gamma)]).astype(np.int64)
    probs = np.exp(np.concatenate([log_below, log_stops]))
    for arr in (n_stop, k_sum, probs):
        arr.setflags(write=False)

    total = math.fsum(probs)
    if abs(total - 1.0) > _PMF_TOLERANCE:
        logger.warning("pmf for %s under %s sums to %.17g", plan, model, total)
    return values, n_stop, k_sum, probs


def exact_pmf(plan: SamplingPlan, model: ExactModel) -> PmfTable:
    """Probability of every support value of the estimator."""
    values, n_stop, k_sum, probs = _pmf_arrays(plan, model)
    entries = tuple(
        PmfEntry(value=v, probability=float(pr), n_stop=int(m), k_sum=int(k))
        for v, pr, m, k in zip(values, probs, n_stop, k_sum)
    )
    return PmfTable(plan=plan, model=model, entries=entries)


def model_parameter(model: ExactModel) -> Fraction:
    """The estimated mean as an exact rational."""
    match model:
        case FinitePopulation(N=N, M=M):
            return Fraction(M, N)
        case Bernoulli(p=p):
            return as_fraction(p)
        case Poisson(lam=lam):
            return as_fraction(lam)
    raise UnsupportedModelError(f"no exact parameter for {model!r}")


def exact_coverage(plan: SamplingPlan, model: ExactModel, spec: PrecisionSpec) -> float:
    """Pr{|est - θ| < ε_a or |est - θ| < ε_r θ}, exactly over the support."""
    values, _, _, probs = _pmf_arrays(plan, model)
    theta = model_parameter(model)
    eps_a, eps_r = spec.eps_a_exact, spec.eps_r_exact
    covered = np.zeros(len(values), dtype=bool)
    for lo, hi in ((theta - eps_a, theta + eps_a), (theta * (1 - eps_r), theta * (1 + eps_r))):
        covered[bisect.bisect_right(values, lo) : bisect.bisect_left(values, hi)] = True
    return min(1.0, math.fsum(probs[covered]))


def sample_number_bound(plan: SamplingPlan, model: PopulationModel) -> tuple[float, str]:
    """Strict upper bound on E[n]: min(n, gamma/p) for binary data, else min(n, gamma/mu + 1)."""
    n = plan.n_max
    match model:
        case Bernoulli() | FinitePopulation():
            kind = "min(n, gamma/p)"
            return (float(n) if model.mean == 0 else float(min(n, plan.gamma / model.mean))), kind
        case Poisson() | Bounded():
            kind = "min(n, gamma/mu + 1)"
            return (float(n) if model.mean == 0 else float(min(n, plan.gamma / model.mean + 1.0))), kind
    raise UnsupportedModelError(f"unknown population model {model!r}")


def expected_n(plan: SamplingPlan, model: ExactModel) -> ExpectedSampleNumber:
    """E[n] from the stop-time law, checked against its strict upper bound."""
    _, n_stop, _, probs = _pmf_arrays(plan, model)
    value = math.fsum(n_stop * probs)
    bound, kind = sample_number_bound(plan, model)
    holds = value < bound
    if value == bound:
        logger.info("E[n] ties its bound at %.17g for %s", bound, plan)
    return ExpectedSampleNumber(value=value, bound=bound, bound_kind=kind, holds=holds, tie=value == bound)
