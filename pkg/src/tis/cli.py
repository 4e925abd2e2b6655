"""``tis`` command line.

Every subcommand prints JSON by default; ``--format csv`` writes one row per
record with floats at 17 significant digits and rationals as num/den column
pairs, and ``--format table`` renders a rich table. Exit code 2 means the
input was rejected, 1 that a computation failed.

Examples::

    tis plan --variant binomial --eps-a 0.05 --eps-r 0.2 --delta 0.05
    tis check --variant binomial --gamma 173 --n 577 --eps-a 0.05 --eps-r 0.2 --delta 0.05
    tis ci --variant binomial --k 0 --n-stop 10 --delta 0.05
    tis pmf --variant binomial --p 0.5 --gamma 2 --n 3 --format csv
    tis simulate --variant binomial --p 0.25 --eps-a 0.05 --eps-r 0.2 --delta 0.05 --seed 42
"""

import csv
import io
import json
import logging
from contextlib import contextmanager
from enum import StrEnum
from pathlib import Path
from typing import Annotated, Any, Iterator

import typer
from mcp.server.fastmcp.utilities.logging import configure_logging
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from tis import service
from tis.config import get_settings
from tis.design import CandidateGrouping
from tis.errors import (
    RootBracketError,
    SearchExhaustedError,
    TisError,
    UnreachableCaseError,
)
from tis.model import PrecisionSpec
from tis.service import BoundedKind, Method, Variant

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="tis",
    help="Truncated inverse sampling: plan design, exact laws, intervals and simulation.",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)


class Level(StrEnum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class OutputFormat(StrEnum):
    JSON = "json"
    CSV = "csv"
    TABLE = "table"


VariantOpt = Annotated[Variant, typer.Option(help="Population model.")]
EpsA = Annotated[float, typer.Option("--eps-a", help="Absolute margin ε_a.")]
EpsR = Annotated[float, typer.Option("--eps-r", help="Relative margin ε_r.")]
Delta = Annotated[float, typer.Option(help="Risk δ; intervals have level 1 - δ.")]
Population = Annotated[int | None, typer.Option("--population", "-N", help="Population size N.")]
Gamma = Annotated[float | None, typer.Option(help="Threshold γ of the plan.")]
MaxN = Annotated[int | None, typer.Option("--n", help="Maximum sample number n of the plan.")]
Threads = Annotated[
    int | None, typer.Option(min=1, help="Worker threads [default: TIS_THREADS or 1].")
]
Format = Annotated[OutputFormat, typer.Option("--format", help="Output format.")]
Output = Annotated[Path | None, typer.Option(help="Write to this file instead of stdout.")]


def _load_config(path: Path) -> dict[str, Any]:
    try:
        document = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise typer.BadParameter(f"cannot read {path}: {exc}", param_hint="--config") from exc
    if not isinstance(document, dict):
        raise typer.BadParameter("config must be a JSON object", param_hint="--config")
    return document


def _flag_defaults(document: dict[str, Any], command: str | None) -> dict[str, Any]:
    """Flat flag values plus any section named after the subcommand."""
    flat = {k.replace("-", "_"): v for k, v in document.items() if not isinstance(v, dict)}
    section = document.get(command or "", {})
    if isinstance(section, dict):
        flat.update({k.replace("-", "_"): v for k, v in section.items()})
    return flat


@app.callback()
def _root(
    ctx: typer.Context,
    config: Annotated[
        Path | None,
        typer.Option(help="JSON file with flag values; flags given on the command line win."),
    ] = None,
    log_level: Annotated[Level | None, typer.Option(help="Logging level [default: TIS_LOG_LEVEL or INFO].")] = None,
) -> None:
    configure_logging(str(log_level) if log_level is not None else get_settings().log_level)
    if config is not None:
        ctx.default_map = {ctx.invoked_subcommand: _flag_defaults(_load_config(config), ctx.invoked_subcommand)}


def _fail(exc: BaseException, code: int) -> None:
    if isinstance(exc, ValidationError):
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        message = f"{where}: {first['msg']}" if where else first["msg"]
    else:
        message = str(exc)
    typer.echo(f"error: {message}", err=True)
    if isinstance(exc, SearchExhaustedError) and exc.best is not None:
        failure = exc.best.first_failure()
        if failure is not None:
            typer.echo(
                f"best attempt gamma={exc.best.plan.gamma} n={exc.best.plan.n_max} "
                f"fails {failure.condition} at {failure.point} (tail {failure.tail:.6g})",
                err=True,
            )
    raise typer.Exit(code) from exc


@contextmanager
def _diagnostics() -> Iterator[None]:
    try:
        yield
    except typer.Exit:
        raise
    except (SearchExhaustedError, UnreachableCaseError, RootBracketError) as exc:
        _fail(exc, 1)
    except (TisError, ValidationError) as exc:
        _fail(exc, 2)
    except (ArithmeticError, RuntimeError) as exc:
        logger.debug("internal failure", exc_info=exc)
        _fail(exc, 1)


def _threads(threads: int | None) -> int:
    return threads if threads is not None else get_settings().threads


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def flatten(record: dict[str, Any]) -> dict[str, Any]:
    """One CSV row: rationals become ``<key>_num``/``<key>_den``, pairs ``<key>_lo``/``<key>_hi``."""
    row: dict[str, Any] = {}
    for key, value in record.items():
        if isinstance(value, dict) and set(value) == {"num", "den"}:
            row[f"{key}_num"], row[f"{key}_den"] = value["num"], value["den"]
        elif isinstance(value, (list, tuple)) and len(value) == 2:
            row[f"{key}_lo"], row[f"{key}_hi"] = value
        elif isinstance(value, (dict, list, tuple)):
            row[key] = json.dumps(value)
        else:
            row[key] = value
    return row


def _render(document: Any, rows: list[dict[str, Any]], fmt: OutputFormat, title: str) -> str:
    match fmt:
        case OutputFormat.JSON:
            return json.dumps(document, indent=2) + "\n"
        case OutputFormat.CSV:
            flat = [flatten(r) for r in rows]
            columns = list(dict.fromkeys(k for r in flat for k in r))
            buffer = io.StringIO()
            writer = csv.writer(buffer, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows([_cell(r.get(c)) for c in columns] for r in flat)
            return buffer.getvalue()
    table = Table(title=title)
    flat = [flatten(r) for r in rows]
    columns = list(dict.fromkeys(k for r in flat for k in r))
    for column in columns:
        table.add_column(column)
    for r in flat:
        table.add_row(*(_cell(r.get(c)) for c in columns))
    console = Console(file=io.StringIO(), width=200, force_terminal=False)
    console.print(table)
    return console.file.getvalue()


def _emit(document: Any, rows: list[dict[str, Any]], fmt: OutputFormat, output: Path | None, title: str) -> None:
    text = _render(document, rows, fmt, title)
    if output is None:
        typer.echo(text, nl=False)
    else:
        output.write_text(text)


def _plan_rows(document: dict[str, Any]) -> list[dict[str, Any]]:
    checks = document.get("checks")
    if not checks:
        return [{k: v for k, v in document.items() if k != "notes"}]
    return checks


@app.command()
def plan(
    variant: VariantOpt,
    eps_a: EpsA,
    eps_r: EpsR,
    delta: Delta,
    method: Annotated[Method, typer.Option(help="Closed-form plan or certified zeta search.")] = Method.EXPLICIT,
    population: Population = None,
    zeta_min: Annotated[float, typer.Option(help="Smallest zeta tried by the refined search.")] = 1e-4,
    zeta_max: Annotated[float, typer.Option(help="Largest zeta tried by the refined search.")] = 0.5,
    max_iter: Annotated[int, typer.Option(help="Bisection steps of the refined search.")] = 60,
    grouping: Annotated[CandidateGrouping, typer.Option(help="Candidate-set grouping.")] = CandidateGrouping.INTERSECT_ALL,
    threads: Threads = None,
    fmt: Format = OutputFormat.JSON,
    output: Output = None,
) -> None:
    """Design a sampling plan (γ, n).

    Example: tis plan --variant binomial --eps-a 0.05 --eps-r 0.2 --delta 0.05 --method refined
    """
    with _diagnostics():
        document = service.design_plan(
            variant, eps_a, eps_r, delta, method, population, grouping, _threads(threads),
            zeta_range=(zeta_min, zeta_max), max_iter=max_iter,
        )
        _emit(document, _plan_rows(document), fmt, output, "plan")


@app.command()
def check(
    variant: VariantOpt,
    gamma: Annotated[int, typer.Option(help="Threshold γ of the plan.")],
    n: Annotated[int, typer.Option("--n", help="Maximum sample number n of the plan.")],
    eps_a: EpsA,
    eps_r: EpsR,
    delta: Delta,
    population: Population = None,
    grouping: Annotated[CandidateGrouping, typer.Option(help="Candidate-set grouping.")] = CandidateGrouping.INTERSECT_ALL,
    threads: Threads = None,
    fmt: Format = OutputFormat.JSON,
    output: Output = None,
) -> None:
    """Evaluate the tail conditions of a given plan at every candidate point.

    Example: tis check --variant binomial --gamma 1 --n 1 --eps-a 0.05 --eps-r 0.2 --delta 0.05
    """
    with _diagnostics():
        document = service.check_plan(
            variant, gamma, n, eps_a, eps_r, delta, population, grouping, _threads(threads)
        )
        _emit(document, _plan_rows(document), fmt, output, "check")


@app.command()
def ci(
    variant: VariantOpt,
    k: Annotated[float, typer.Option(help="Sample sum at the stopping time.")],
    n_stop: Annotated[int, typer.Option(help="Stopping time 𝐧.")],
    delta: Delta,
    gamma: Gamma = None,
    n: MaxN = None,
    population: Population = None,
    fmt: Format = OutputFormat.JSON,
    output: Output = None,
) -> None:
    """Confidence interval from an observed (k, 𝐧).

    Poisson and bounded data need the plan (--gamma, --n); an infinite limit
    prints as "inf".

    Example: tis ci --variant poisson --k 3 --n-stop 1 --gamma 3 --n 10 --delta 0.05
    """
    with _diagnostics():
        interval = service.confidence_interval(variant, k, n_stop, delta, gamma, n, population)
        document = interval.model_dump(mode="json", exclude_none=True)
        _emit(document, [document], fmt, output, "interval")


@app.command()
def pmf(
    variant: VariantOpt,
    gamma: Annotated[int, typer.Option(help="Threshold γ of the plan.")],
    n: Annotated[int, typer.Option("--n", help="Maximum sample number n of the plan.")],
    p: Annotated[float | None, typer.Option(help="Bernoulli parameter.")] = None,
    population: Population = None,
    marked: Annotated[int | None, typer.Option("--marked", "-M", help="Marked units M.")] = None,
    lam: Annotated[float | None, typer.Option(help="Poisson mean λ.")] = None,
    eps_a: Annotated[float | None, typer.Option("--eps-a", help="Add exact coverage for ε_a.")] = None,
    eps_r: Annotated[float | None, typer.Option("--eps-r", help="Add exact coverage for ε_r.")] = None,
    delta: Annotated[float, typer.Option(help="Risk δ used with --eps-a/--eps-r.")] = 0.05,
    fmt: Format = OutputFormat.JSON,
    output: Output = None,
) -> None:
    """Exact distribution of the estimator.

    CSV columns: support_value_num, support_value_den, probability, n_stop, k_sum.

    Example: tis pmf --variant binomial --p 0.5 --gamma 2 --n 3
    """
    with _diagnostics():
        model = service.population_model(variant, p=p, population=population, marked=marked, lam=lam)
        spec = None
        if eps_a is not None or eps_r is not None:
            spec = PrecisionSpec(eps_a=eps_a, eps_r=eps_r, delta=delta)
        document = service.estimator_pmf(model, gamma, n, spec)
        rows = [
            {
                "support_value": e["value"],
                "probability": e["probability"],
                "n_stop": e["n_stop"],
                "k_sum": e["k_sum"],
            }
            for e in document["entries"]
        ]
        _emit(document, rows, fmt, output, "pmf")


@app.command()
def simulate(
    variant: VariantOpt,
    eps_a: EpsA,
    eps_r: EpsR,
    delta: Delta,
    gamma: Gamma = None,
    n: MaxN = None,
    p: Annotated[float | None, typer.Option(help="Bernoulli parameter.")] = None,
    population: Population = None,
    marked: Annotated[int | None, typer.Option("--marked", "-M", help="Marked units M.")] = None,
    lam: Annotated[float | None, typer.Option(help="Poisson mean λ.")] = None,
    distribution: Annotated[BoundedKind | None, typer.Option(help="Bounded distribution.")] = None,
    a: Annotated[float | None, typer.Option(help="Two-point low value.")] = None,
    b: Annotated[float | None, typer.Option(help="Two-point high value.")] = None,
    w: Annotated[float | None, typer.Option(help="Two-point weight of b.")] = None,
    lo: Annotated[float | None, typer.Option(help="Uniform lower end.")] = None,
    hi: Annotated[float | None, typer.Option(help="Uniform upper end.")] = None,
    alpha: Annotated[float | None, typer.Option(help="Beta shape α.")] = None,
    beta: Annotated[float | None, typer.Option(help="Beta shape β.")] = None,
    trials: Annotated[int, typer.Option(min=1, help="Number of trials.")] = 10_000,
    seed: Annotated[int, typer.Option(min=0, help="Seed of the per-trial streams.")] = 0,
    threads: Threads = None,
    dump: Annotated[Path | None, typer.Option(help="Write per-trial rows to this CSV file.")] = None,
    fmt: Format = OutputFormat.JSON,
    output: Output = None,
) -> None:
    """Monte Carlo check of a plan; the explicit plan is used when --gamma/--n are omitted.

    Output is identical for a given seed whatever --threads is.

    Example: tis simulate --variant bounded --distribution beta --alpha 2 --beta 5 --eps-a 0.05 --eps-r 0.2 --delta 0.05
    """
    with _diagnostics():
        spec = PrecisionSpec(eps_a=eps_a, eps_r=eps_r, delta=delta)
        model = service.population_model(
            variant,
            p=p,
            population=population,
            marked=marked,
            lam=lam,
            bounded=distribution,
            params={"a": a, "b": b, "w": w, "lo": lo, "hi": hi, "alpha": alpha, "beta": beta},
        )
        plan_ = service.simulation_plan(variant, spec, gamma, n, population)
        report = service.simulate(model, plan_, spec, trials, seed, _threads(threads), dump)
        document = {"plan": plan_.model_dump(mode="json"), **report.model_dump(mode="json")}
        _emit(document, [report.model_dump(mode="json")], fmt, output, "simulation")


def main() -> None:
    app()
