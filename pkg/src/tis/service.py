"""Flag-level entry points shared by the CLI and the MCP server.

Each function takes plain values, builds the validated models and returns
the result object or a JSON-ready dict.
"""

import logging
from enum import StrEnum
from typing import Any

from tis import design, dist, intervals, sim
from tis.errors import DomainError
from tis.intervals import ConfidenceInterval
from tis.model import Outcome, PrecisionSpec, SamplingPlan

logger = logging.getLogger(__name__)


class Variant(StrEnum):
    BINOMIAL = "binomial"
    FINITE = "finite"
    POISSON = "poisson"
    BOUNDED = "bounded"


class Method(StrEnum):
    EXPLICIT = "explicit"
    REFINED = "refined"


class BoundedKind(StrEnum):
    TWO_POINT = "two-point"
    UNIFORM = "uniform"
    BETA = "beta"


_MODEL_FLAGS = {
    Variant.BINOMIAL: {"--p"},
    Variant.FINITE: {"--population", "--marked"},
    Variant.POISSON: {"--lam"},
    Variant.BOUNDED: {"--distribution", "--a", "--b", "--w", "--lo", "--hi", "--alpha", "--beta"},
}


def _gamma(value: float | None) -> int | float | None:
    if value is not None and float(value).is_integer():
        return int(value)
    return value


def _require(value: Any, flag: str, variant: Variant) -> Any:
    if value is None:
        raise DomainError(f"{flag} is required for variant {variant}")
    return value


def plan_document(
    variant: Variant,
    spec: PrecisionSpec,
    plan: SamplingPlan,
    method: str,
    certificate: design.PlanCertificate | None = None,
) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "variant": str(variant),
        "eps_a": spec.eps_a,
        "eps_r": spec.eps_r,
        "delta": spec.delta,
        "p_star": spec.p_star,
        "gamma": plan.gamma,
        "n": plan.n_max,
        "method": method,
    }
    if plan.notes:
        doc["notes"] = list(plan.notes)
    if certificate is not None:
        doc["passed"] = certificate.passed
        doc["grouping"] = str(certificate.grouping)
        if certificate.population is not None:
            doc["population"] = certificate.population
        if certificate.zeta is not None:
            doc["zeta"] = certificate.zeta
        doc["checks"] = [c.model_dump(mode="json") for c in certificate.checks]
    return doc


def design_plan(
    variant: Variant,
    eps_a: float,
    eps_r: float,
    delta: float,
    method: Method = Method.EXPLICIT,
    population: int | None = None,
    grouping: design.CandidateGrouping = design.CandidateGrouping.INTERSECT_ALL,
    workers: int = 1,
    zeta_range: tuple[float, float] = (1e-4, 0.5),
    max_iter: int = 60,
) -> dict[str, Any]:
    """Explicit or refined plan for ``variant`` as a JSON-ready document.

    ``zeta_range`` and ``max_iter`` only steer the refined search.
    """
    spec = PrecisionSpec(eps_a=eps_a, eps_r=eps_r, delta=delta)
    variant, method = Variant(variant), Method(method)
    if variant is Variant.POISSON:
        raise DomainError("no plan design for Poisson data; pass --gamma and --n directly")
    if method is Method.REFINED:
        if variant is Variant.BOUNDED:
            raise DomainError("only explicit plans exist for bounded variables")
        N = _require(population, "--population", variant) if variant is Variant.FINITE else None
        if max_iter < 0:
            raise DomainError(f"--max-iter must be non-negative, got {max_iter}")
        cert = design.refined_plan(
            spec, N=N, zeta_range=zeta_range, max_iter=max_iter, grouping=grouping, workers=workers
        )
        return plan_document(variant, spec, cert.plan, "refined", cert)
    match variant:
        case Variant.BINOMIAL:
            plan = design.explicit_plan_binomial(spec)
        case Variant.FINITE:
            plan = design.explicit_plan_finite(spec, _require(population, "--population", variant))
        case _:
            plan = design.explicit_plan_bounded(spec)
    return plan_document(variant, spec, plan, "explicit")


def check_plan(
    variant: Variant,
    gamma: int,
    n: int,
    eps_a: float,
    eps_r: float,
    delta: float,
    population: int | None = None,
    grouping: design.CandidateGrouping = design.CandidateGrouping.INTERSECT_ALL,
    workers: int = 1,
) -> dict[str, Any]:
    """Run a given plan through the binomial or finite-population conditions."""
    spec = PrecisionSpec(eps_a=eps_a, eps_r=eps_r, delta=delta)
    plan = SamplingPlan(gamma=gamma, n_max=n)
    variant = Variant(variant)
    match variant:
        case Variant.BINOMIAL:
            cert = design.check_plan_binomial(plan, spec, grouping=grouping, workers=workers)
        case Variant.FINITE:
            N = _require(population, "--population", variant)
            cert = design.check_plan_finite(plan, spec, N, grouping=grouping, workers=workers)
        case _:
            raise DomainError(f"plans can only be checked for binomial or finite data, not {variant}")
    return plan_document(variant, spec, plan, "checked", cert)


def confidence_interval(
    variant: Variant,
    k: float,
    n_stop: int,
    delta: float,
    gamma: float | None = None,
    n: int | None = None,
    population: int | None = None,
) -> ConfidenceInterval:
    variant = Variant(variant)
    k_sum: int | float = int(k) if float(k).is_integer() and variant is not Variant.BOUNDED else k
    plan = None
    if gamma is not None or n is not None:
        plan = SamplingPlan(gamma=_require(_gamma(gamma), "--gamma", variant), n_max=_require(n, "--n", variant))
    match variant:
        case Variant.BINOMIAL:
            outcome = Outcome(n_stop=n_stop, k_sum=k_sum) if plan is None else Outcome.observe(plan, n_stop, k_sum)
            return intervals.ci_binomial(outcome, delta)
        case Variant.FINITE:
            outcome = Outcome(n_stop=n_stop, k_sum=k_sum) if plan is None else Outcome.observe(plan, n_stop, k_sum)
            return intervals.ci_finite(outcome, _require(population, "--population", variant), delta)
        case Variant.POISSON:
            plan = _require(plan, "--gamma/--n", variant)
            return intervals.ci_poisson(Outcome.observe(plan, n_stop, k_sum), plan, delta)
        case _:
            plan = _require(plan, "--gamma/--n", variant)
            return intervals.ci_bounded(Outcome.observe(plan, n_stop, k_sum), plan, delta)


def population_model(
    variant: Variant,
    p: float | None = None,
    population: int | None = None,
    marked: int | None = None,
    lam: float | None = None,
    bounded: BoundedKind | None = None,
    params: dict[str, float] | None = None,
) -> dist.Bernoulli | dist.FinitePopulation | dist.Poisson | dist.Bounded:
    """Population model from flag values; ``params`` feeds the bounded distribution."""
    variant = Variant(variant)
    flags = {
        "--p": p,
        "--population": population,
        "--marked": marked,
        "--lam": lam,
        "--distribution": bounded,
        **{f"--{k}": v for k, v in (params or {}).items()},
    }
    stray = [flag for flag, value in flags.items() if value is not None and flag not in _MODEL_FLAGS[variant]]
    if stray:
        raise DomainError(f"{', '.join(stray)} cannot be used with variant {variant}")
    match variant:
        case Variant.BINOMIAL:
            return dist.Bernoulli(p=_require(p, "--p", variant))
        case Variant.FINITE:
            return dist.FinitePopulation(
                N=_require(population, "--population", variant), M=_require(marked, "--marked", variant)
            )
        case Variant.POISSON:
            return dist.Poisson(lam=_require(lam, "--lam", variant))
    kind = BoundedKind(_require(bounded, "--distribution", variant))
    given = {k: v for k, v in (params or {}).items() if v is not None}
    match kind:
        case BoundedKind.TWO_POINT:
            distribution = dist.TwoPoint(**given)
        case BoundedKind.UNIFORM:
            distribution = dist.Uniform(**given)
        case BoundedKind.BETA:
            distribution = dist.Beta(**given)
    return dist.Bounded(distribution=distribution)


def estimator_pmf(
    model: dist.ExactModel,
    gamma: int,
    n: int,
    spec: PrecisionSpec | None = None,
) -> dict[str, Any]:
    """Exact pmf with E[n] and, given a precision spec, the exact coverage."""
    plan = SamplingPlan(gamma=gamma, n_max=n)
    table = dist.exact_pmf(plan, model)
    doc: dict[str, Any] = {
        "plan": plan.model_dump(mode="json"),
        "model": model.model_dump(mode="json"),
        "entries": [e.model_dump(mode="json") for e in table.entries],
        "total": table.total(),
        "expected_n": dist.expected_n(plan, model).model_dump(mode="json"),
    }
    if spec is not None:
        doc["coverage"] = dist.exact_coverage(plan, model, spec)
    return doc


def simulation_plan(variant: Variant, spec: PrecisionSpec, gamma: float | None, n: int | None,
                    population: int | None = None) -> SamplingPlan:
    """The given plan, or the explicit one for ``variant`` when none is given."""
    if gamma is not None or n is not None:
        return SamplingPlan(gamma=_require(_gamma(gamma), "--gamma", variant), n_max=_require(n, "--n", variant))
    match Variant(variant):
        case Variant.BINOMIAL:
            return design.explicit_plan_binomial(spec)
        case Variant.FINITE:
            return design.explicit_plan_finite(spec, _require(population, "--population", variant))
        case Variant.BOUNDED:
            return design.explicit_plan_bounded(spec)
    raise DomainError("Poisson simulations need --gamma and --n")


def simulate(
    model: dist.PopulationModel,
    plan: SamplingPlan,
    spec: PrecisionSpec,
    trials: int,
    seed: int,
    workers: int = 1,
    dump_path: str | None = None,
) -> sim.SimReport:
    config = sim.SimConfig(
        model=model, plan=plan, spec=spec, trials=trials, seed=seed, parallelism=workers
    )
    return sim.run_trials(config, dump_path=dump_path)
