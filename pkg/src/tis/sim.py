"""Monte Carlo runs of the stopping rule.

Each trial draws from its own Philox stream keyed by the seed with the trial
index in the top counter word, so a trial's path does not depend on which
worker ran it or in what order. Per-trial results land in arrays indexed by
trial and are reduced with integer sums, which keeps reports bit-identical
for any ``parallelism``.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from tis import dist, intervals
from tis.dist import Bernoulli, Beta, Bounded, FinitePopulation, Poisson, PopulationModel, TwoPoint, Uniform
from tis.errors import DomainError, UnsupportedModelError
from tis.intervals import ConfidenceInterval
from tis.model import Outcome, PrecisionSpec, SamplingPlan, as_fraction, run_stop_rule

logger = logging.getLogger(__name__)

CHUNK = 512
DUMP_COLUMNS = ("trial", "n_stop", "k_sum", "estimate", "covered", "ci_lo", "ci_hi", "ci_covered")


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: PopulationModel
    plan: SamplingPlan
    spec: PrecisionSpec
    trials: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    parallelism: int = Field(default=1, ge=1)


class SimReport(BaseModel):
    """Empirical precision coverage, interval coverage and mean sample number.

    Standard errors are ``None`` for a single trial; the pass flags are then
    ``None`` as well.
    """

    model_config = ConfigDict(frozen=True)

    trials: int
    seed: int
    truth: float
    coverage_hat: float
    coverage_se: float | None
    ci_coverage_hat: float
    ci_coverage_se: float | None
    mean_n_hat: float
    mean_n_se: float | None
    n_bound: float
    bound_kind: str
    coverage_pass: bool | None
    ci_coverage_pass: bool | None
    mean_n_pass: bool | None

    @property
    def se_defined(self) -> bool:
        return self.coverage_se is not None


def trial_stream(seed: int, trial: int) -> np.random.Generator:
    counter = np.array([0, 0, 0, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def _urn(N: int, M: int, length: int, rng: np.random.Generator) -> NDArray[np.int64]:
    out = np.zeros(length, dtype=np.int64)
    marked, left = M, N
    for i, u in enumerate(rng.random(length)):
        if u * left < marked:
            out[i] = 1
            marked -= 1
        left -= 1
    return out


def generate_path(model: PopulationModel, length: int, rng: np.random.Generator) -> np.ndarray:
    """``length`` sample values from ``model``.

    Finite populations are drawn by sequential urn updates; Beta variables
    as G1 / (G1 + G2) of two independent gamma draws.
    """
    if length < 0:
        raise DomainError(f"path length must be non-negative, got {length}")
    match model:
        case Bernoulli(p=p):
            return (rng.random(length) < p).astype(np.int64)
        case FinitePopulation(N=N, M=M):
            if length > N:
                raise DomainError(f"cannot draw {length} units without replacement from N={N}")
            return _urn(N, M, length, rng)
        case Poisson(lam=lam):
            return rng.poisson(lam, length).astype(np.int64)
        case Bounded(distribution=TwoPoint(a=a, b=b, w=w)):
            return np.where(rng.random(length) < w, b, a)
        case Bounded(distribution=Uniform(lo=lo, hi=hi)):
            return rng.uniform(lo, hi, length)
        case Bounded(distribution=Beta(alpha=alpha, beta=beta)):
            g1 = rng.standard_gamma(alpha, length)
            g2 = rng.standard_gamma(beta, length)
            return g1 / (g1 + g2)
    raise UnsupportedModelError(f"cannot simulate {model!r}")


def _interval_for(config: SimConfig):
    model, plan, delta = config.model, config.plan, config.spec.delta
    match model:
        case Bernoulli():
            def ci(outcome: Outcome) -> ConfidenceInterval:
                return intervals.ci_binomial(outcome, delta)
        case FinitePopulation(N=N):
            def ci(outcome: Outcome) -> ConfidenceInterval:
                return intervals.ci_finite(outcome, N, delta)
        case Poisson():
            def ci(outcome: Outcome) -> ConfidenceInterval:
                return intervals.ci_poisson(outcome, plan, delta)
        case Bounded():
            def ci(outcome: Outcome) -> ConfidenceInterval:
                return intervals.ci_bounded(outcome, plan, delta)
        case _:
            raise UnsupportedModelError(f"no interval for {model!r}")

    @lru_cache(maxsize=65536)
    def cached(n_stop: int, k_sum: int | float) -> ConfidenceInterval:
        return ci(Outcome(n_stop=n_stop, k_sum=k_sum, gamma=plan.gamma))

    return cached


def _precision_event(config: SimConfig):
    """``|est - θ| < ε_a or |est - θ| < ε_r θ``, evaluated in exact rationals."""
    model, gamma = config.model, config.plan.gamma
    theta = as_fraction(model.mean) if isinstance(model, Bounded) else dist.model_parameter(model)
    eps_a, eps_r = config.spec.eps_a_exact, config.spec.eps_r_exact

    @lru_cache(maxsize=65536)
    def covered(n_stop: int, k_sum: int | float) -> bool:
        gap = abs(Fraction(as_fraction(min(k_sum, gamma)), n_stop) - theta)
        return gap < eps_a or gap < eps_r * theta

    return covered


def _truth(model: PopulationModel) -> float:
    # the interval for a finite population is over M, not M/N
    match model:
        case FinitePopulation(M=M):
            return float(M)
    return model.mean


class _Trials:
    """Per-trial result columns, written by index."""

    def __init__(self, trials: int) -> None:
        self.n_stop = np.zeros(trials, dtype=np.int64)
        self.k_sum = np.zeros(trials, dtype=np.float64)
        self.estimate = np.zeros(trials, dtype=np.float64)
        self.covered = np.zeros(trials, dtype=bool)
        self.ci_lo = np.zeros(trials, dtype=np.float64)
        self.ci_hi = np.zeros(trials, dtype=np.float64)
        self.ci_covered = np.zeros(trials, dtype=bool)


def _run_chunk(config: SimConfig, ci, covered, results: _Trials, start: int, stop: int) -> None:
    plan = config.plan
    truth = _truth(config.model)
    for trial in range(start, stop):
        path = generate_path(config.model, plan.n_max, trial_stream(config.seed, trial))
        outcome = run_stop_rule(path, plan)
        interval = ci(outcome.n_stop, outcome.k_sum)
        results.n_stop[trial] = outcome.n_stop
        results.k_sum[trial] = outcome.k_sum
        results.estimate[trial] = outcome.estimate
        results.covered[trial] = covered(outcome.n_stop, outcome.k_sum)
        results.ci_lo[trial] = interval.lower
        results.ci_hi[trial] = interval.upper
        results.ci_covered[trial] = interval.contains(truth)


def _proportion_se(hits: int, trials: int) -> float | None:
    if trials < 2:
        return None
    p = hits / trials
    return math.sqrt(p * (1.0 - p) / trials)


def _mean_se(total: int, squares: int, trials: int) -> float | None:
    if trials < 2:
        return None
    # exact integer variance numerator
    variance = (trials * squares - total * total) / (trials * trials * (trials - 1))
    return math.sqrt(variance)


def _dump(path: Path, results: _Trials) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(DUMP_COLUMNS)
        for trial in range(len(results.n_stop)):
            writer.writerow(
                (
                    trial,
                    int(results.n_stop[trial]),
                    f"{results.k_sum[trial]:.17g}",
                    f"{results.estimate[trial]:.17g}",
                    int(results.covered[trial]),
                    f"{results.ci_lo[trial]:.17g}",
                    f"{results.ci_hi[trial]:.17g}",
                    int(results.ci_covered[trial]),
                )
            )


def run_trials(config: SimConfig, dump_path: Path | str | None = None) -> SimReport:
    """Run ``config.trials`` independent trials and aggregate them."""
    trials = config.trials
    results = _Trials(trials)
    ci = _interval_for(config)
    covered = _precision_event(config)
    chunks = [(start, min(start + CHUNK, trials)) for start in range(0, trials, CHUNK)]
    logger.info(
        "simulating %d trials of %s with gamma=%s n=%d on %d worker(s)",
        trials,
        config.model.kind,
        config.plan.gamma,
        config.plan.n_max,
        config.parallelism,
    )
    if config.parallelism > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            futures = [pool.submit(_run_chunk, config, ci, covered, results, a, b) for a, b in chunks]
            for future in futures:
                future.result()
    else:
        for a, b in chunks:
            _run_chunk(config, ci, covered, results, a, b)

    hits = int(results.covered.sum())
    ci_hits = int(results.ci_covered.sum())
    n_total = int(results.n_stop.sum())
    n_squares = int(np.sum(results.n_stop * results.n_stop))
    coverage_se = _proportion_se(hits, trials)
    ci_se = _proportion_se(ci_hits, trials)
    mean_se = _mean_se(n_total, n_squares, trials)
    mean_n = n_total / trials
    bound, kind = dist.sample_number_bound(config.plan, config.model)
    target = 1.0 - config.spec.delta

    if dump_path is not None:
        _dump(Path(dump_path), results)

    report = SimReport(
        trials=trials,
        seed=config.seed,
        truth=_truth(config.model),
        coverage_hat=hits / trials,
        coverage_se=coverage_se,
        ci_coverage_hat=ci_hits / trials,
        ci_coverage_se=ci_se,
        mean_n_hat=mean_n,
        mean_n_se=mean_se,
        n_bound=bound,
        bound_kind=kind,
        coverage_pass=None if coverage_se is None else hits / trials >= target - 3 * coverage_se,
        ci_coverage_pass=None if ci_se is None else ci_hits / trials >= target - 3 * ci_se,
        mean_n_pass=None if mean_se is None else mean_n < bound,
    )
    logger.info("coverage %.6f, interval coverage %.6f, mean n %.3f", report.coverage_hat,
                report.ci_coverage_hat, report.mean_n_hat)
    return report
