"""Chernoff-Hoeffding exponents for fixed-size and inverse sampling.

``mb(z, mu)`` is minus the Bernoulli Kullback-Leibler divergence of ``z`` from
``mu``; ``mi(z, mu) = mb(z, mu) / z`` is its per-success counterpart used for
the threshold of inverse sampling. Both are ≤ 0 with equality iff z = mu.
"""

import math
from collections.abc import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from tis.errors import DomainError

Exponent = Callable[[float, float], float]


class BoundArg(BaseModel):
    """A deviation point ``z`` paired with a mean parameter ``mu``."""

    model_config = ConfigDict(frozen=True)

    z: float
    mu: float

    @model_validator(mode="after")
    def _in_range(self) -> "BoundArg":
        _check(self.z, self.mu)
        return self

    def mb(self) -> float:
        return mb(self.z, self.mu)

    def mi(self) -> float:
        return mi(self.z, self.mu)


def _check(z: float, mu: float) -> None:
    if not 0.0 < mu < 1.0:
        raise DomainError(f"mu must lie in (0, 1), got {mu}")
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"z must lie in [0, 1], got {z}")


def _log1p_minus(x: float) -> float:
    """log1p(x) - x without cancellation for small |x|."""
    if abs(x) >= 0.01:
        return math.log1p(x) - x
    # alternating series -x^2/2 + x^3/3 - ...; 12 terms reach 1e-24 at |x| = 0.01
    total = 0.0
    power = x
    for k in range(2, 14):
        power *= x
        total += (-1) ** (k + 1) * power / k
    return total


def mb_unchecked(z: float, mu: float) -> float:
    """mb without argument checks; -inf when mu touches 0 or 1 away from z."""
    if z == mu:
        return 0.0
    if mu <= 0.0:
        return math.log1p(-mu) if z == 0.0 else -math.inf
    if mu >= 1.0:
        return math.log(mu) if z == 1.0 else -math.inf
    if z == 0.0:
        return math.log1p(-mu)
    if z == 1.0:
        return math.log(mu)
    d = mu - z
    if abs(d) <= 0.5 * min(z, 1.0 - z):
        # first-order terms cancel exactly in this form
        value = z * _log1p_minus(d / z) + (1.0 - z) * _log1p_minus(-d / (1.0 - z))
    else:
        value = z * _log_ratio(mu, z) + (1.0 - z) * _log_complement_ratio(mu, z)
    return min(0.0, value)


def _log_ratio(mu: float, z: float) -> float:
    """ln(mu / z); log1p of the exact difference when mu and z are within a factor 2."""
    if 0.5 * z <= mu <= 2.0 * z:
        return math.log1p((mu - z) / z)
    return math.log(mu / z)


def _log_complement_ratio(mu: float, z: float) -> float:
    """ln((1 - mu) / (1 - z)) for z < 1."""
    if 0.5 * (1.0 - z) <= 1.0 - mu <= 2.0 * (1.0 - z):
        return math.log1p((z - mu) / (1.0 - z))
    return math.log1p(-mu) - math.log1p(-z)


def mb(z: float, mu: float) -> float:
    """z ln(mu/z) + (1 - z) ln((1 - mu)/(1 - z)), continuous at z ∈ {0, 1}."""
    _check(z, mu)
    return mb_unchecked(z, mu)


def mi(z: float, mu: float) -> float:
    """mb(z, mu) / z for z ∈ (0, 1]."""
    _check(z, mu)
    if z == 0.0:
        raise DomainError("mi is undefined at z = 0")
    return mb_unchecked(z, mu) / z


def absolute_shift(fn: Exponent, eps: float, sign: int) -> Callable[[float], float]:
    """mu -> fn(mu + sign * eps, mu)."""
    return lambda mu: fn(mu + sign * eps, mu)


def relative_shift(fn: Exponent, eps: float, sign: int) -> Callable[[float], float]:
    """mu -> fn(mu * (1 + sign * eps), mu)."""
    return lambda mu: fn(mu * (1.0 + sign * eps), mu)


def _grid(lo: float, hi: float, points: int, margin: float) -> np.ndarray:
    return np.linspace(lo + margin, hi - margin, points)


def is_strictly_monotone(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    increasing: bool,
    points: int = 1000,
    margin: float = 1e-6,
    slack: float = 1e-13,
) -> bool:
    """Check strict monotonicity of ``f`` on a grid of (lo, hi) up to ``slack``."""
    values = np.array([f(float(x)) for x in _grid(lo, hi, points, margin)])
    steps = np.diff(values)
    if increasing:
        return bool(np.all(steps > -slack))
    return bool(np.all(steps < slack))


def dominates(
    f: Callable[[float], float],
    g: Callable[[float], float],
    lo: float,
    hi: float,
    points: int = 1000,
    margin: float = 1e-6,
    slack: float = 1e-13,
) -> bool:
    """Check f(x) > g(x) on a grid of (lo, hi) up to ``slack``."""
    return all(f(float(x)) > g(float(x)) - slack for x in _grid(lo, hi, points, margin))
