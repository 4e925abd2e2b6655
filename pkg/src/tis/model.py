"""Truncated inverse sampling: plans, precision targets, outcomes and the
finite support of the estimator.

Sampling continues until the running sum reaches the threshold ``gamma`` or
the sample count reaches ``n_max``; the estimate is ``min(k, gamma) / n``.
"""

import math
from collections.abc import Iterator, Sequence
from fractions import Fraction
from typing import Annotated, Any, NamedTuple

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PlainSerializer,
    PlainValidator,
    WithJsonSchema,
    computed_field,
    model_validator,
)

from tis.errors import DomainError, InsufficientSamplesError


def as_fraction(value: Any) -> Fraction:
    """Exact rational for ``value``; floats are read as their shortest decimal repr.

    Accepts Fraction, int, float, "a/b" strings, ``{"num": a, "den": b}`` and
    ``[a, b]`` pairs.
    """
    match value:
        case Fraction():
            return value
        case bool():
            raise DomainError(f"not a rational number: {value!r}")
        case int():
            return Fraction(value)
        case float():
            if not math.isfinite(value):
                raise DomainError(f"not a finite number: {value!r}")
            return Fraction(repr(value))
        case str():
            return Fraction(value)
        case {"num": num, "den": den}:
            return Fraction(int(num), int(den))
        case [num, den]:
            return Fraction(int(num), int(den))
    raise DomainError(f"not a rational number: {value!r}")


def _rational_pair(value: Fraction) -> dict[str, int]:
    return {"num": value.numerator, "den": value.denominator}


Rational = Annotated[
    Fraction,
    PlainValidator(as_fraction),
    PlainSerializer(_rational_pair, return_type=dict),
    WithJsonSchema(
        {
            "type": "object",
            "properties": {"num": {"type": "integer"}, "den": {"type": "integer"}},
            "required": ["num", "den"],
        }
    ),
]

PositiveNumber = Annotated[int | float, Field(gt=0)]


class SamplingPlan(BaseModel):
    """Threshold ``gamma`` and maximum sample size ``n_max`` of the stopping rule."""

    model_config = ConfigDict(frozen=True)

    gamma: PositiveNumber
    n_max: int = Field(ge=1)
    notes: tuple[str, ...] = ()

    @property
    def integer_gamma(self) -> bool:
        return float(self.gamma).is_integer()

    @property
    def gamma_int(self) -> int:
        if not self.integer_gamma:
            raise DomainError(f"this variant needs an integer threshold, got gamma={self.gamma}")
        return int(self.gamma)

    @property
    def fixed_size(self) -> bool:
        """True when early stopping can never trigger for 0/1 data."""
        return self.gamma > self.n_max

    @property
    def flags(self) -> list[str]:
        flags = list(self.notes)
        if self.fixed_size:
            flags.append(
                f"gamma={self.gamma} exceeds n_max={self.n_max}: fixed-size sampling for 0/1 data"
            )
        return flags


class PrecisionSpec(BaseModel):
    """Absolute margin ``eps_a``, relative margin ``eps_r`` and risk ``delta``."""

    model_config = ConfigDict(frozen=True)

    eps_a: float
    eps_r: float
    delta: float

    @model_validator(mode="after")
    def _margins(self) -> "PrecisionSpec":
        if not 0.0 < self.eps_a < self.eps_r < 1.0:
            raise DomainError(
                f"need 0 < eps_a < eps_r < 1, got eps_a={self.eps_a}, eps_r={self.eps_r}"
            )
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"need 0 < delta < 1, got delta={self.delta}")
        return self

    @property
    def p_star(self) -> float:
        """Parameter value where the absolute and relative criteria coincide."""
        return self.eps_a / self.eps_r

    @property
    def eps_a_exact(self) -> Fraction:
        return as_fraction(self.eps_a)

    @property
    def eps_r_exact(self) -> Fraction:
        return as_fraction(self.eps_r)

    @property
    def p_star_exact(self) -> Fraction:
        return self.eps_a_exact / self.eps_r_exact


class Outcome(BaseModel):
    """Observed stopping time ``n_stop`` and sample sum ``k_sum``.

    ``k_sum`` is the raw sum at the stopping time; clipping at ``gamma``
    only happens in :attr:`estimate`. Without a threshold the estimate is
    ``k_sum / n_stop``.
    """

    model_config = ConfigDict(frozen=True)

    n_stop: int = Field(ge=1)
    k_sum: Annotated[int | float, Field(ge=0)]
    gamma: PositiveNumber | None = None

    @computed_field
    @property
    def estimate(self) -> float:
        k = self.k_sum if self.gamma is None else min(self.k_sum, self.gamma)
        return k / self.n_stop

    @property
    def clipped_sum(self) -> int | float:
        return self.k_sum if self.gamma is None else min(self.k_sum, self.gamma)

    @classmethod
    def observe(cls, plan: SamplingPlan, n_stop: int, k_sum: int | float) -> "Outcome":
        """Outcome checked against the stopping rule of ``plan``."""
        if not 1 <= n_stop <= plan.n_max:
            raise DomainError(f"n_stop={n_stop} outside 1..{plan.n_max}")
        if n_stop < plan.n_max and k_sum < plan.gamma:
            raise DomainError(
                f"sampling stopped at {n_stop} < n_max={plan.n_max} with k={k_sum} below gamma={plan.gamma}"
            )
        return cls(n_stop=n_stop, k_sum=k_sum, gamma=plan.gamma)


def run_stop_rule(samples: Sequence[float] | np.ndarray, plan: SamplingPlan) -> Outcome:
    """Apply the stopping rule of ``plan`` to a finite sample stream."""
    data = np.asarray(samples)
    if data.ndim != 1 or data.size < plan.n_max:
        raise InsufficientSamplesError(
            f"need at least n_max={plan.n_max} samples, got {data.size}"
        )
    head = data[: plan.n_max]
    if np.any(head < 0):
        raise DomainError("samples must be non-negative")
    running = np.cumsum(head)
    crossed = np.flatnonzero(running >= plan.gamma)
    n_stop = int(crossed[0]) + 1 if crossed.size else plan.n_max
    k = running[n_stop - 1]
    integral = np.issubdtype(data.dtype, np.integer) or np.issubdtype(data.dtype, np.bool_)
    k_sum = int(k) if integral else float(k)
    return Outcome(n_stop=n_stop, k_sum=k_sum, gamma=plan.gamma)


class SupportSet(BaseModel):
    """Strictly increasing exact values the estimator can take."""

    model_config = ConfigDict(frozen=True)

    values: tuple[Rational, ...]

    @model_validator(mode="after")
    def _increasing(self) -> "SupportSet":
        if any(a >= b for a, b in zip(self.values, self.values[1:])):
            raise DomainError("support values must be strictly increasing")
        return self

    def __iter__(self) -> Iterator[Fraction]:  # type: ignore[override]
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, item: object) -> bool:
        return item in self.values

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])


def support_values(plan: SamplingPlan, poisson: bool = False) -> list[Fraction]:
    """Sorted support as a plain list (see :func:`estimator_support`)."""
    gamma, n = plan.gamma_int, plan.n_max
    top = gamma if poisson else min(gamma, n)
    first_stop = 1 if poisson else gamma
    values = {Fraction(j, n) for j in range(top + 1)}
    values.update(Fraction(gamma, m) for m in range(first_stop, n))
    return sorted(values)


def estimator_support(plan: SamplingPlan, poisson: bool = False) -> SupportSet:
    """{j/n : j = 0..gamma} ∪ {gamma/m : m = gamma..n-1}.

    0/1 data cannot reach the threshold before ``gamma`` samples, so early
    stops start at m = gamma; Poisson counts can cross it at m = 1.
    """
    return SupportSet(values=tuple(support_values(plan, poisson)))


class ShiftedSupports(NamedTuple):
    """Supports of p̂ - ε_a, p̂ + ε_a, p̂/(1 + ε_r) and p̂/(1 - ε_r)."""

    a_minus: tuple
    a_plus: tuple
    r_plus: tuple
    r_minus: tuple


def shifted_supports(plan: SamplingPlan, spec: PrecisionSpec, poisson: bool = False) -> ShiftedSupports:
    """Elementwise shifts of the support; callers intersect them with intervals."""
    support = support_values(plan, poisson)
    eps_a, eps_r = spec.eps_a_exact, spec.eps_r_exact
    return ShiftedSupports(
        a_minus=tuple(v - eps_a for v in support),
        a_plus=tuple(v + eps_a for v in support),
        r_plus=tuple(v / (1 + eps_r) for v in support),
        r_minus=tuple(v / (1 - eps_r) for v in support),
    )


def shifted_supports_finite(plan: SamplingPlan, spec: PrecisionSpec, N: int) -> ShiftedSupports:
    """Integer supports of ⌊N(p̂-ε_a)⌋, ⌈N(p̂+ε_a)⌉, ⌊Np̂/(1+ε_r)⌋, ⌈Np̂/(1-ε_r)⌉."""
    if N < 1:
        raise DomainError(f"population size must be positive, got N={N}")
    support = support_values(plan)
    eps_a, eps_r = spec.eps_a_exact, spec.eps_r_exact
    return ShiftedSupports(
        a_minus=tuple(sorted({math.floor(N * (v - eps_a)) for v in support})),
        a_plus=tuple(sorted({math.ceil(N * (v + eps_a)) for v in support})),
        r_plus=tuple(sorted({math.floor(N * v / (1 + eps_r)) for v in support})),
        r_minus=tuple(sorted({math.ceil(N * v / (1 - eps_r)) for v in support})),
    )
