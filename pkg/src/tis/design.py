"""Sampling-plan design.

Explicit plans come from closed-form Chernoff-Hoeffding bounds. Refined plans
shrink them through a slack factor ``zeta`` inside ``ln(zeta * delta)`` and
are certified by evaluating four tail conditions at finitely many candidate
parameter values derived from the estimator support. The maximum of each
tail over a parameter interval is attained on that candidate set, which
:func:`worst_case_scan` checks against a dense grid.
"""

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from enum import StrEnum
from fractions import Fraction
from typing import Literal

from pydantic import BaseModel, ConfigDict

from tis import dist
from tis.bounds import mb, mi
from tis.errors import DomainError, SearchExhaustedError, SideConditionError
from tis.model import (
    PrecisionSpec,
    Rational,
    SamplingPlan,
    shifted_supports,
    shifted_supports_finite,
)

logger = logging.getLogger(__name__)

BORDERLINE = 1e-14
SCAN_SLACK = 1e-12
GAMMA_SCAN_CAP = 10**7

ConditionId = Literal["mix1", "mix2", "mix3", "mix4", "Fmix1", "Fmix2", "Fmix3", "Fmix4"]
Variant = Literal["binomial", "finite", "bounded"]


class CandidateGrouping(StrEnum):
    """How ``Q ∪ {x} ∩ I`` is read when building candidate sets.

    ``INTERSECT_ALL`` reads (Q ∪ {x}) ∩ I; ``AUGMENT_ONLY`` reads
    Q ∪ ({x} ∩ I), with Q restricted only to valid parameter values.
    """

    INTERSECT_ALL = "intersect-all"
    AUGMENT_ONLY = "augment-only"


class ConditionCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    condition: ConditionId
    point: Rational
    tail: float
    bound: float
    passed: bool
    borderline: bool


class PlanCertificate(BaseModel):
    """A plan together with the evidence for (or against) its precision.

    ``method`` is "explicit" for formula plans (no checks), "checked" for a
    plan run through the conditions, and "refined" for a certified plan found
    by the zeta search.
    """

    model_config = ConfigDict(frozen=True)

    plan: SamplingPlan
    spec: PrecisionSpec
    method: Literal["explicit", "checked", "refined"]
    variant: Variant = "binomial"
    population: int | None = None
    zeta: float | None = None
    grouping: CandidateGrouping = CandidateGrouping.INTERSECT_ALL
    checks: tuple[ConditionCheck, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def first_failure(self) -> ConditionCheck | None:
        return next((c for c in self.checks if not c.passed), None)


class _Condition:
    """One tail condition: where to look and what to evaluate there."""

    def __init__(
        self,
        cid: ConditionId,
        shifted: Iterable,
        extra: Sequence,
        inside: Callable[[Fraction], bool],
        valid: Callable[[Fraction], bool],
        tail: Callable[[Fraction], float],
        endpoints: Sequence = (),
    ) -> None:
        self.cid = cid
        self.shifted = tuple(shifted)
        self.extra = tuple(extra)
        self.inside = inside
        self.valid = valid
        self.tail = tail
        self.endpoints = tuple(endpoints)

    def candidates(self, grouping: CandidateGrouping) -> list:
        if grouping is CandidateGrouping.INTERSECT_ALL:
            points = {q for q in (*self.shifted, *self.extra) if self.inside(q)}
        else:
            points = {q for q in self.shifted if self.valid(q)}
            points.update(q for q in self.extra if self.inside(q))
        points.update(self.endpoints)
        return sorted(points)


def _check_side_condition(spec: PrecisionSpec) -> None:
    if spec.p_star_exact + spec.eps_a_exact > Fraction(1, 2):
        raise SideConditionError(
            f"eps_a/eps_r + eps_a <= 1/2 violated: {spec.p_star} + {spec.eps_a} > 0.5"
        )


def _rates(spec: PrecisionSpec) -> tuple[float, float]:
    z = spec.p_star + spec.eps_a
    return mb(z, spec.p_star), mi(z, spec.p_star)


def _just_above(x: float) -> int:
    return math.floor(x) + 1


def explicit_plan_binomial(spec: PrecisionSpec) -> SamplingPlan:
    """Smallest integers strictly above ln(δ/2)/mb and ln(δ/2)/mi at (p★ + ε_a, p★)."""
    _check_side_condition(spec)
    rate_b, rate_i = _rates(spec)
    log_risk = math.log(spec.delta / 2)
    return SamplingPlan(gamma=_just_above(log_risk / rate_i), n_max=_just_above(log_risk / rate_b))


def explicit_plan_finite(spec: PrecisionSpec, N: int) -> SamplingPlan:
    """The binomial formulas, with n capped at the population size."""
    if N < 1:
        raise DomainError(f"population size must be positive, got N={N}")
    plan = explicit_plan_binomial(spec)
    if plan.n_max <= N:
        return plan
    logger.warning("explicit n=%d exceeds N=%d; capping at the population size", plan.n_max, N)
    note = (
        f"n capped from {plan.n_max} to the population size N={N}; "
        "the explicit guarantee no longer applies"
    )
    return SamplingPlan(gamma=min(plan.gamma, N), n_max=N, notes=(note,))


def bounded_gamma_conditions(spec: PrecisionSpec, gamma: int) -> tuple[bool, bool, bool]:
    """The three threshold inequalities for a [0, 1]-bounded variable."""
    p_star = spec.p_star
    log_risk = math.log(spec.delta / 2)
    first = gamma > (1 - spec.eps_r_exact) / spec.eps_r_exact
    z = gamma * (p_star - spec.eps_a) / (gamma - 1 + spec.eps_r)
    if 0.0 < z <= 1.0 and z != p_star:
        second = gamma > log_risk / mi(z, p_star)
    else:
        second = False
    third = gamma > log_risk / _rates(spec)[1]
    return first, second, third


def explicit_plan_bounded(spec: PrecisionSpec) -> SamplingPlan:
    """Explicit plan for a variable bounded in [0, 1].

    n is the binomial one; gamma is scanned upward from the binomial gamma
    until all three threshold inequalities hold, one of which has gamma on
    both sides.
    """
    _check_side_condition(spec)
    start = explicit_plan_binomial(spec)
    gamma = int(start.gamma)
    for _ in range(GAMMA_SCAN_CAP):
        if all(bounded_gamma_conditions(spec, gamma)):
            return SamplingPlan(gamma=gamma, n_max=start.n_max)
        gamma += 1
    raise SearchExhaustedError(f"no threshold satisfies the bounded-variable conditions below {gamma}")


def _binomial_conditions(plan: SamplingPlan, spec: PrecisionSpec) -> list[_Condition]:
    q = shifted_supports(plan, spec)
    eps_a, eps_r, p_star = spec.eps_a_exact, spec.eps_r_exact, spec.p_star_exact

    def low(p: Fraction) -> bool:
        return 0 < p <= p_star

    def high(p: Fraction) -> bool:
        return p_star < p < 1

    def valid(p: Fraction) -> bool:
        return 0 < p < 1

    def model(p: Fraction) -> dist.Bernoulli:
        return dist.Bernoulli(p=float(p))

    return [
        _Condition("mix1", q.a_minus, (p_star,), low, valid,
                   lambda p: dist.ccdf_ge(plan, model(p), p + eps_a)),
        _Condition("mix2", q.a_plus, (p_star,), low, valid,
                   lambda p: dist.cdf_le(plan, model(p), p - eps_a)),
        _Condition("mix3", q.r_plus, (), high, valid,
                   lambda p: dist.ccdf_ge(plan, model(p), p * (1 + eps_r)), endpoints=(p_star,)),
        _Condition("mix4", q.r_minus, (), high, valid,
                   lambda p: dist.cdf_le(plan, model(p), p * (1 - eps_r)), endpoints=(p_star,)),
    ]


def _finite_conditions(plan: SamplingPlan, spec: PrecisionSpec, N: int) -> list[_Condition]:
    q = shifted_supports_finite(plan, spec, N)
    eps_a, eps_r = spec.eps_a_exact, spec.eps_r_exact
    split = N * spec.p_star_exact
    pivot = math.floor(split)

    def low(m: int) -> bool:
        return 0 < m <= split

    def high(m: int) -> bool:
        return split < m < N

    def valid(m: int) -> bool:
        return 0 <= m <= N

    def model(m: int) -> dist.FinitePopulation:
        return dist.FinitePopulation(N=N, M=int(m))

    return [
        _Condition("Fmix1", q.a_minus, (pivot,), low, valid,
                   lambda m: dist.ccdf_ge(plan, model(m), Fraction(m, N) + eps_a)),
        _Condition("Fmix2", q.a_plus, (pivot,), low, valid,
                   lambda m: dist.cdf_le(plan, model(m), Fraction(m, N) - eps_a)),
        _Condition("Fmix3", q.r_plus, (pivot + 1,), high, valid,
                   lambda m: dist.ccdf_ge(plan, model(m), Fraction(m, N) * (1 + eps_r))),
        _Condition("Fmix4", q.r_minus, (pivot + 1,), high, valid,
                   lambda m: dist.cdf_le(plan, model(m), Fraction(m, N) * (1 - eps_r))),
    ]


def _evaluate(
    conditions: list[_Condition],
    grouping: CandidateGrouping,
    delta: float,
    workers: int,
) -> tuple[ConditionCheck, ...]:
    jobs = [(c, point) for c in conditions for point in c.candidates(grouping)]
    half = delta / 2

    def run(job: tuple[_Condition, Fraction]) -> float:
        condition, point = job
        return condition.tail(point)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tails = list(pool.map(run, jobs))
    else:
        tails = [run(job) for job in jobs]
    return tuple(
        ConditionCheck(
            condition=c.cid,
            point=point,
            tail=tail,
            bound=half,
            passed=tail <= half,
            borderline=abs(tail - half) <= BORDERLINE,
        )
        for (c, point), tail in zip(jobs, tails)
    )


def _require_integer_plan(plan: SamplingPlan, N: int | None = None) -> None:
    gamma = plan.gamma_int
    if gamma > plan.n_max:
        raise DomainError(f"checking needs gamma <= n, got gamma={gamma}, n={plan.n_max}")
    if N is not None and plan.n_max > N:
        raise DomainError(f"checking needs n <= N, got n={plan.n_max}, N={N}")


def check_plan_binomial(
    plan: SamplingPlan,
    spec: PrecisionSpec,
    delta: float | None = None,
    grouping: CandidateGrouping = CandidateGrouping.INTERSECT_ALL,
    workers: int = 1,
) -> PlanCertificate:
    """Evaluate the four binomial tail conditions at every candidate point."""
    _require_integer_plan(plan)
    delta = spec.delta if delta is None else delta
    checks = _evaluate(_binomial_conditions(plan, spec), grouping, delta, workers)
    return PlanCertificate(plan=plan, spec=spec, method="checked", grouping=grouping, checks=checks)


def check_plan_finite(
    plan: SamplingPlan,
    spec: PrecisionSpec,
    N: int,
    delta: float | None = None,
    grouping: CandidateGrouping = CandidateGrouping.INTERSECT_ALL,
    workers: int = 1,
) -> PlanCertificate:
    """Evaluate the four finite-population conditions at every candidate M."""
    _require_integer_plan(plan, N)
    delta = spec.delta if delta is None else delta
    checks = _evaluate(_finite_conditions(plan, spec, N), grouping, delta, workers)
    return PlanCertificate(
        plan=plan,
        spec=spec,
        method="checked",
        variant="finite",
        population=N,
        grouping=grouping,
        checks=checks,
    )


def zeta_plan(spec: PrecisionSpec, zeta: float, N: int | None = None) -> SamplingPlan | None:
    """Plan with ln(zeta * delta) in place of ln(delta / 2); None if degenerate."""
    rate_b, rate_i = _rates(spec)
    log_risk = math.log(zeta * spec.delta)
    if log_risk >= 0:
        return None
    n = math.floor(log_risk / rate_b)
    gamma = math.floor(log_risk / rate_i)
    if N is not None:
        n = min(n, N)
        gamma = min(gamma, n)
    if gamma < 1 or n < 1:
        return None
    return SamplingPlan(gamma=gamma, n_max=n)


def refined_plan(
    spec: PrecisionSpec,
    N: int | None = None,
    zeta_range: tuple[float, float] = (1e-4, 0.5),
    max_iter: int = 60,
    grouping: CandidateGrouping = CandidateGrouping.INTERSECT_ALL,
    workers: int = 1,
) -> PlanCertificate:
    """Largest zeta (smallest plan) in ``zeta_range`` whose plan is certified.

    Bisection runs on ln(zeta) and assumes pass/fail is monotone in zeta; only
    the speed of the search depends on that, since every returned plan has
    been certified by the checker. ``N=None`` designs for a binomial
    parameter, an integer N for a finite population.
    """
    lo, hi = zeta_range
    if not 0 < lo <= hi:
        raise DomainError(f"zeta range must satisfy 0 < lo <= hi, got {zeta_range}")

    def certify(zeta: float) -> PlanCertificate | None:
        plan = zeta_plan(spec, zeta, N)
        if plan is None:
            return None
        if N is None:
            cert = check_plan_binomial(plan, spec, grouping=grouping, workers=workers)
        else:
            cert = check_plan_finite(plan, spec, N, grouping=grouping, workers=workers)
        logger.debug("zeta=%.6g gamma=%s n=%d passed=%s", zeta, plan.gamma, plan.n_max, cert.passed)
        return cert

    def refined(cert: PlanCertificate, zeta: float) -> PlanCertificate:
        return cert.model_copy(update={"method": "refined", "zeta": zeta})

    top = certify(hi)
    if top is not None and top.passed:
        return refined(top, hi)
    best = certify(lo)
    if best is None or not best.passed:
        raise SearchExhaustedError(
            f"no certified plan for zeta in [{lo}, {hi}]", best=best if best is not None else top
        )
    for _ in range(max_iter):
        if zeta_plan(spec, lo, N) == zeta_plan(spec, hi, N):
            break
        mid = math.sqrt(lo * hi)
        cert = certify(mid)
        if cert is not None and cert.passed:
            lo, best = mid, cert
        else:
            hi = mid
    logger.info(
        "refined plan gamma=%s n=%d at zeta=%.6g", best.plan.gamma, best.plan.n_max, lo
    )
    return refined(best, lo)


class ScanResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    condition: ConditionId
    grid_max: float
    grid_argmax: Rational | None
    candidate_max: float
    candidate_argmax: Rational | None
    dominated: bool


def _argmax(points: Sequence, tails: Sequence[float]) -> tuple[float, Fraction | None]:
    if not points:
        return 0.0, None
    best = max(range(len(points)), key=lambda i: tails[i])
    return tails[best], points[best]


def worst_case_scan(
    plan: SamplingPlan,
    spec: PrecisionSpec,
    delta: float | None = None,
    grid_size: int = 2000,
    N: int | None = None,
    grid: Sequence[Fraction] | None = None,
    grouping: CandidateGrouping = CandidateGrouping.INTERSECT_ALL,
) -> list[ScanResult]:
    """Compare each condition's maximum over a dense grid with its candidate maximum.

    The binomial grid is i/(grid_size + 1), i = 1..grid_size, unless ``grid``
    is given; for a finite population every M in 0..N is scanned.
    """
    if grid_size < 10:
        raise DomainError(f"grid_size must be at least 10, got {grid_size}")
    _require_integer_plan(plan, N)
    if N is None:
        conditions = _binomial_conditions(plan, spec)
        points = list(grid) if grid is not None else [
            Fraction(i, grid_size + 1) for i in range(1, grid_size + 1)
        ]
    else:
        conditions = _finite_conditions(plan, spec, N)
        points = list(range(N + 1))

    results = []
    for condition in conditions:
        candidates = condition.candidates(grouping)
        interval = [p for p in points if condition.inside(p) or p in condition.endpoints]
        cand_max, cand_at = _argmax(candidates, [condition.tail(p) for p in candidates])
        grid_max, grid_at = _argmax(interval, [condition.tail(p) for p in interval])
        results.append(
            ScanResult(
                condition=condition.cid,
                grid_max=grid_max,
                grid_argmax=grid_at,
                candidate_max=cand_max,
                candidate_argmax=cand_at,
                dominated=grid_max <= cand_max + SCAN_SLACK,
            )
        )
    return results
