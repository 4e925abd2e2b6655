from typing import Any

from fastapi import FastAPI
from mcp.server.fastmcp import FastMCP
from pydantic import ValidationError

from tis import service
from tis.design import CandidateGrouping
from tis.errors import TisError
from tis.model import PrecisionSpec

TOOLS = ["design_plan", "check_plan", "confidence_interval", "estimator_pmf", "simulate_plan"]

# Create an MCP server
mcp = FastMCP("Truncated inverse sampling MCP server")


def _error(exc: Exception) -> dict[str, Any]:
    return {"error": f"{type(exc).__name__}: {exc}"}


@mcp.tool()
def design_plan(
    variant: str,
    eps_a: float,
    eps_r: float,
    delta: float,
    method: str = "explicit",
    population: int | None = None,
    zeta_min: float = 1e-4,
    zeta_max: float = 0.5,
    max_iter: int = 60,
) -> dict[str, Any]:
    """Design a truncated inverse sampling plan (gamma, n).

    Args:
        variant: "binomial", "finite" or "bounded"
        eps_a: absolute error margin
        eps_r: relative error margin, larger than eps_a
        delta: risk; the estimate misses both margins with probability below delta
        method: "explicit" (closed form) or "refined" (certified zeta search)
        population: population size N for the finite variant
        zeta_min, zeta_max: range of the slack factor searched by the refined method
        max_iter: bisection steps of the refined search
    """
    try:
        return service.design_plan(
            service.Variant(variant),
            eps_a,
            eps_r,
            delta,
            service.Method(method),
            population,
            zeta_range=(zeta_min, zeta_max),
            max_iter=max_iter,
        )
    except (TisError, ValidationError, ValueError) as exc:
        return _error(exc)


@mcp.tool()
def check_plan(
    variant: str,
    gamma: int,
    n: int,
    eps_a: float,
    eps_r: float,
    delta: float,
    population: int | None = None,
    grouping: str = "intersect-all",
) -> dict[str, Any]:
    """Evaluate the tail conditions of a plan at every candidate parameter value.

    Args:
        variant: "binomial" or "finite"
        gamma: threshold on the sample sum
        n: maximum sample number
        grouping: "intersect-all" or "augment-only"
    """
    try:
        return service.check_plan(
            service.Variant(variant), gamma, n, eps_a, eps_r, delta, population, CandidateGrouping(grouping)
        )
    except (TisError, ValidationError, ValueError) as exc:
        return _error(exc)


@mcp.tool()
def confidence_interval(
    variant: str,
    k: float,
    n_stop: int,
    delta: float,
    gamma: float | None = None,
    n: int | None = None,
    population: int | None = None,
) -> dict[str, Any]:
    """Confidence interval after a run stopped at n_stop with sample sum k.

    Args:
        variant: "binomial", "finite", "poisson" or "bounded"
        gamma: plan threshold, required for poisson and bounded
        n: plan maximum sample number, required for poisson and bounded
        population: population size N for the finite variant
    """
    try:
        interval = service.confidence_interval(service.Variant(variant), k, n_stop, delta, gamma, n, population)
        return interval.model_dump(mode="json", exclude_none=True)
    except (TisError, ValidationError, ValueError, ArithmeticError, RuntimeError) as exc:
        return _error(exc)


@mcp.tool()
def estimator_pmf(
    variant: str,
    gamma: int,
    n: int,
    p: float | None = None,
    population: int | None = None,
    marked: int | None = None,
    lam: float | None = None,
) -> dict[str, Any]:
    """Exact distribution of the estimator, with E[n].

    Args:
        variant: "binomial", "finite" or "poisson"
        p: Bernoulli parameter
        population: N for the finite variant
        marked: M for the finite variant
        lam: Poisson mean
    """
    try:
        model = service.population_model(
            service.Variant(variant), p=p, population=population, marked=marked, lam=lam
        )
        return service.estimator_pmf(model, gamma, n)
    except (TisError, ValidationError, ValueError) as exc:
        return _error(exc)


@mcp.tool()
def simulate_plan(
    variant: str,
    eps_a: float,
    eps_r: float,
    delta: float,
    trials: int = 10_000,
    seed: int = 0,
    gamma: float | None = None,
    n: int | None = None,
    p: float | None = None,
    population: int | None = None,
    marked: int | None = None,
    lam: float | None = None,
    distribution: str | None = None,
    params: dict[str, float] | None = None,
) -> dict[str, Any]:
    """Monte Carlo coverage and mean sample number of a plan.

    Args:
        variant: "binomial", "finite", "poisson" or "bounded"
        trials: number of simulated runs
        seed: seed of the per-trial random streams
        gamma: plan threshold; the explicit plan is used when gamma and n are omitted
        distribution: "two-point", "uniform" or "beta" for the bounded variant
        params: its parameters, e.g. {"alpha": 2, "beta": 5}
    """
    try:
        spec = PrecisionSpec(eps_a=eps_a, eps_r=eps_r, delta=delta)
        model = service.population_model(
            service.Variant(variant),
            p=p,
            population=population,
            marked=marked,
            lam=lam,
            bounded=service.BoundedKind(distribution) if distribution is not None else None,
            params=params,
        )
        plan = service.simulation_plan(variant, spec, gamma, n, population)
        report = service.simulate(model, plan, spec, trials, seed)
        return {"plan": plan.model_dump(mode="json"), **report.model_dump(mode="json")}
    except (TisError, ValidationError, ValueError, ArithmeticError, RuntimeError) as exc:
        return _error(exc)


mcp_app = mcp.streamable_http_app()


app = FastAPI(
    lifespan=lambda _: mcp.session_manager.run(),
)


# Add info endpoint
@app.get("/", include_in_schema=False)
async def serve_info():
    return {
        "server": "Truncated inverse sampling MCP server",
        "tools": TOOLS,
        "mcp_protocol": True,
        "mcp_endpoint": "/mcp/",
        "test_endpoints": [
            "/test/plan?eps_a=0.05&eps_r=0.2&delta=0.05",
        ],
    }


# Add simple test endpoint for easy browser testing
@app.get("/test/plan")
async def test_plan(eps_a: float = 0.05, eps_r: float = 0.2, delta: float = 0.05, variant: str = "binomial"):
    return design_plan(variant, eps_a, eps_r, delta)


app.mount("/", mcp_app)
