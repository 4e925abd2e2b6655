"""Confidence intervals after a truncated inverse sampling run.

Every limit is the root of a monotone tail (or bound) equation, found by
bracketing bisection with ``scipy.optimize.bisect``.
"""

import bisect
import logging
import math
from collections.abc import Callable
from fractions import Fraction
from typing import Annotated, Any, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, PlainSerializer
from scipy import optimize

from tis import special
from tis.bounds import mb_unchecked
from tis.errors import DomainError, RootBracketError, UnreachableCaseError
from tis.model import Outcome, SamplingPlan

logger = logging.getLogger(__name__)

PROB_XTOL = 1e-13
RATE_RTOL = 1e-12
_MAX_DOUBLINGS = 1100
_FLOOR = -1e300


def _parse_extended(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in {"inf", "+inf", "infinity"}:
        return math.inf
    return value


def _dump_extended(value: float) -> float | str:
    return "inf" if value == math.inf else value


ExtendedReal = Annotated[
    float,
    BeforeValidator(_parse_extended),
    PlainSerializer(_dump_extended, when_used="json"),
]


class ConfidenceInterval(BaseModel):
    """Interval estimate at level ``1 - delta``.

    Real-valued intervals are open; the finite-population interval is a
    closed range of integers M with its proportion counterpart attached.
    """

    model_config = ConfigDict(frozen=True)

    lower: ExtendedReal
    upper: ExtendedReal
    level: float
    kind: Literal["real", "integer"] = "real"
    closed: bool = False
    estimate: float | None = None
    proportion: tuple[float, float] | None = None
    case: str | None = None

    def contains(self, value: float) -> bool:
        if self.closed:
            return self.lower <= value <= self.upper
        return self.lower < value < self.upper


def _check_delta(delta: float) -> float:
    if not 0.0 < delta < 1.0:
        raise DomainError(f"need 0 < delta < 1, got delta={delta}")
    return delta / 2


def _counts(outcome: Outcome) -> tuple[int, int]:
    k = outcome.k_sum
    if not float(k).is_integer():
        raise DomainError(f"this interval needs an integer sample sum, got k={k}")
    return outcome.n_stop, int(k)


def _bisect(f: Callable[[float], float], lo: float, hi: float, **tol: float) -> float:
    if f(lo) * f(hi) > 0:
        raise RootBracketError(f"no sign change on [{lo}, {hi}]")
    return float(optimize.bisect(f, lo, hi, maxiter=2000, **tol))


def ci_binomial(outcome: Outcome, delta: float) -> ConfidenceInterval:
    """Clopper-Pearson style limits from the stopping time and the sum."""
    half = _check_delta(delta)
    n, k = _counts(outcome)
    if not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n, got k={k}, n={n}")
    lower = 0.0
    if k > 0:
        lower = _bisect(lambda p: special.binom_tail_ge(n, p, k) - half, 0.0, 1.0, xtol=PROB_XTOL)
    upper = 1.0
    if k < n:
        upper = _bisect(lambda p: special.binom_tail_le(n, p, k) - half, 0.0, 1.0, xtol=PROB_XTOL)
    return ConfidenceInterval(lower=lower, upper=upper, level=1 - delta, estimate=k / n)


def ci_finite(outcome: Outcome, N: int, delta: float) -> ConfidenceInterval:
    """Smallest M_l and largest M_u whose tails still exceed delta/2."""
    half = _check_delta(delta)
    n, k = _counts(outcome)
    if not 0 <= k <= n <= N:
        raise DomainError(f"need 0 <= k <= n <= N, got k={k}, n={n}, N={N}")
    population = range(N + 1)

    def upper_tail(M: int) -> float:
        return special.hyper_tail_ge(N, M, n, k)

    def lower_tail(M: int) -> float:
        return special.hyper_tail_le(N, M, n, k)

    # upper_tail rises and lower_tail falls with M
    m_low = bisect.bisect_right(population, half, key=upper_tail)
    m_up = bisect.bisect_left(population, -half, key=lambda M: -lower_tail(M)) - 1

    low_ok = upper_tail(m_low) > half and (m_low == 0 or upper_tail(m_low - 1) <= half)
    up_ok = lower_tail(m_up) > half and (m_up == N or lower_tail(m_up + 1) <= half)
    if not (low_ok and up_ok):
        logger.debug("binary search neighbours disagree for k=%d n=%d N=%d; scanning", k, n, N)
        m_low = min(M for M in population if upper_tail(M) > half)
        m_up = max(M for M in population if lower_tail(M) > half)
    return ConfidenceInterval(
        lower=m_low,
        upper=m_up,
        level=1 - delta,
        kind="integer",
        closed=True,
        estimate=k / n,
        proportion=(m_low / N, m_up / N),
    )


def _solve_rate(tail: Callable[[float], float], half: float, rising: bool) -> float:
    """Root in lambda of tail(lambda) = half, doubling the bracket as needed."""

    def f(lam: float) -> float:
        gap = tail(lam) - half
        return gap if rising else -gap

    hi = 1.0
    for _ in range(_MAX_DOUBLINGS):
        if f(hi) > 0:
            break
        hi *= 2.0
    else:
        raise RootBracketError("rate bracket did not close")
    return _bisect(f, 0.0, hi, xtol=1e-300, rtol=RATE_RTOL)


def ci_poisson(outcome: Outcome, plan: SamplingPlan, delta: float) -> ConfidenceInterval:
    """Garwood style limits for a Poisson mean.

    For a truncated run (estimate below gamma/n) ``k_sum`` is the raw sum of
    all n counts; after an early stop only the stopping time matters.
    """
    half = _check_delta(delta)
    n_obs, k = _counts(outcome)
    gamma, n = plan.gamma_int, plan.n_max
    if n_obs > n or (n_obs < n and k < gamma):
        raise DomainError(f"outcome (n={n_obs}, k={k}) is inconsistent with plan gamma={gamma}, n={n}")
    est = Fraction(min(k, gamma), n_obs)
    switch = Fraction(gamma, n)
    cases = []

    if est == 0:
        lower = 0.0
        cases.append("lower:zero")
    elif est >= switch:
        lower = _solve_rate(lambda lam: special.pois_tail_ge(n_obs * lam, gamma), half, rising=True)
        cases.append("lower:stopped")
    else:
        lower = _solve_rate(lambda lam: special.pois_tail_ge(n * lam, k), half, rising=True)
        cases.append("lower:truncated")

    if n_obs == 1:
        upper = math.inf
        cases.append("upper:single")
    elif switch <= est < gamma:
        upper = _solve_rate(
            lambda lam: special.pois_tail_le((n_obs - 1) * lam, gamma - 1), half, rising=False
        )
        cases.append("upper:stopped")
    elif est < switch:
        upper = _solve_rate(lambda lam: special.pois_tail_le(n * lam, k), half, rising=False)
        cases.append("upper:truncated")
    else:
        raise UnreachableCaseError(f"estimate {est} with n={n_obs} escapes every upper-limit case")

    logger.debug("poisson interval cases %s", cases)
    return ConfidenceInterval(
        lower=lower, upper=upper, level=1 - delta, estimate=float(est), case=",".join(cases)
    )


def _root_below(g: Callable[[float], float], z: float) -> float:
    return _bisect(lambda mu: max(g(mu), _FLOOR), 0.0, z, xtol=PROB_XTOL)


def _root_above(g: Callable[[float], float], z: float) -> float:
    return _bisect(lambda mu: max(g(mu), _FLOOR), z, 1.0, xtol=PROB_XTOL)


def ci_bounded(outcome: Outcome, plan: SamplingPlan, delta: float) -> ConfidenceInterval:
    """Limits for the mean of a [0, 1] variable by inverting the bound exponents.

    Below gamma/n the fixed-size exponent mb is inverted at rate
    ln(delta/2)/n; otherwise the per-success exponent mi at rate
    ln(delta/2)/gamma, at the shifted point est*gamma/(gamma - est) for the
    upper limit.
    """
    half = _check_delta(delta)
    gamma, n = plan.gamma, plan.n_max
    est = min(outcome.k_sum, gamma) / outcome.n_stop
    if not 0.0 <= est <= 1.0:
        raise DomainError(f"estimate of a [0, 1] variable must lie in [0, 1], got {est}")
    per_sample = math.log(half) / n
    per_success = math.log(half) / gamma
    switch = gamma / n
    cases = []

    if est == 0.0:
        lower = 0.0
        cases.append("lower:zero")
    elif est < switch:
        lower = _root_below(lambda mu: mb_unchecked(est, mu) - per_sample, est)
        cases.append("lower:truncated")
    else:
        lower = _root_below(lambda mu: mb_unchecked(est, mu) / est - per_success, est)
        cases.append("lower:stopped")

    if est >= gamma / (gamma + 1):
        upper = 1.0
        cases.append("upper:one")
    elif est < switch:
        upper = _root_above(lambda mu: -(mb_unchecked(est, mu) - per_sample), est)
        cases.append("upper:truncated")
    else:
        shifted = est * gamma / (gamma - est)
        upper = _root_above(lambda mu: -(mb_unchecked(shifted, mu) / shifted - per_success), shifted)
        cases.append("upper:stopped")

    logger.debug("bounded interval cases %s", cases)
    return ConfidenceInterval(
        lower=lower, upper=upper, level=1 - delta, estimate=est, case=",".join(cases)
    )
