"""Log-space combinatorics and exact tails of the binomial, Poisson and
hypergeometric laws.

Every probability is assembled from log pmf terms and combined with a
log-sum-exp anchored at the largest term, so thresholds and sample sizes in
the 10^4 to 10^5 range do not underflow.
"""

import math
from functools import lru_cache
from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln, xlog1py, xlogy

from tis.errors import DomainError

# natural-log probability, -inf allowed
LogProb: TypeAlias = float

# (x - 1)! is exact as a Python int and its log correctly rounded up to here
_EXACT_FACTORIAL_MAX = 170

# terms below this fraction of the leading term end a Poisson tail sum
_LOG_TRUNCATION = math.log(1e-18)


def log_gamma(x: float) -> float:
    """ln Γ(x) for x > 0.

    Integer arguments up to 171 go through the exact factorial, everything
    else through ``scipy.special.gammaln``.
    """
    if not x > 0 or math.isinf(x):
        raise DomainError(f"log_gamma requires a finite x > 0, got {x}")
    if float(x).is_integer() and x - 1 <= _EXACT_FACTORIAL_MAX:
        return math.log(math.factorial(int(x) - 1))
    return float(gammaln(x))


def log_choose(m: int, z: int) -> LogProb:
    """ln C(m, z), or -inf when z < 0 or z > m."""
    if z < 0 or z > m or m < 0:
        return -math.inf
    return log_gamma(m + 1) - log_gamma(z + 1) - log_gamma(m - z + 1)


@lru_cache(maxsize=32)
def _log_factorial_table(size: int) -> NDArray[np.float64]:
    exact = min(size, _EXACT_FACTORIAL_MAX + 1)
    head = np.array([math.log(math.factorial(i)) for i in range(exact)], dtype=np.float64)
    if size <= exact:
        return head
    tail = gammaln(np.arange(exact, size, dtype=np.float64) + 1.0)
    return np.concatenate([head, tail])


def log_factorials(upto: int) -> NDArray[np.float64]:
    """Table of ln(i!) for i = 0..upto (possibly longer)."""
    size = 256
    while size <= upto:
        size *= 2
    return _log_factorial_table(size)


def log_choose_array(m: ArrayLike, z: ArrayLike) -> NDArray[np.float64]:
    """Vectorised :func:`log_choose` over broadcast integer arrays."""
    mm, zz = np.broadcast_arrays(np.asarray(m, dtype=np.int64), np.asarray(z, dtype=np.int64))
    inside = (zz >= 0) & (zz <= mm)
    lf = log_factorials(int(mm.max(initial=0)))
    top = np.where(inside, mm, 0)
    low = np.where(inside, zz, 0)
    return np.where(inside, lf[top] - lf[low] - lf[top - low], -np.inf)


def log_sum_exp(log_terms: ArrayLike) -> LogProb:
    """ln Σ exp(t) anchored at the maximum term, with a compensated sum."""
    terms = np.asarray(log_terms, dtype=np.float64)
    if terms.size == 0:
        return -math.inf
    anchor = float(terms.max())
    if anchor == -math.inf:
        return -math.inf
    return anchor + math.log(math.fsum(np.exp(terms - anchor)))


def _prob(log_terms: ArrayLike) -> float:
    return min(1.0, math.exp(log_sum_exp(log_terms)))


def _check_binom(n: int, p: float) -> None:
    if n < 0:
        raise DomainError(f"binomial size must be non-negative, got {n}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binomial parameter must lie in [0, 1], got {p}")


def binom_logpmf(n: int, p: float, ks: ArrayLike) -> NDArray[np.float64]:
    """Vectorised ln Pr{Bin(n, p) = k}; -inf outside 0..n."""
    _check_binom(n, p)
    k = np.asarray(ks, dtype=np.int64)
    inside = (k >= 0) & (k <= n)
    kk = np.where(inside, k, 0)
    lf = log_factorials(n)
    out = lf[n] - lf[kk] - lf[n - kk] + xlogy(kk, p) + xlog1py(n - kk, -p)
    return np.where(inside, out, -np.inf)


def binom_tail_ge(n: int, p: float, j: int) -> float:
    """Pr{Bin(n, p) ≥ j}."""
    _check_binom(n, p)
    if j <= 0:
        return 1.0
    if j > n or p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    return _prob(binom_logpmf(n, p, np.arange(j, n + 1)))


def binom_tail_le(n: int, p: float, j: int) -> float:
    """Pr{Bin(n, p) ≤ j}."""
    _check_binom(n, p)
    if j < 0:
        return 0.0
    if j >= n or p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    return _prob(binom_logpmf(n, p, np.arange(0, j + 1)))


def _check_mean(mean: float) -> None:
    if not mean >= 0 or math.isinf(mean):
        raise DomainError(f"Poisson mean must be finite and non-negative, got {mean}")


def pois_logpmf(mean: float, ks: ArrayLike) -> NDArray[np.float64]:
    """Vectorised ln Pr{Poisson(mean) = k}; -inf for k < 0."""
    _check_mean(mean)
    k = np.asarray(ks, dtype=np.int64)
    inside = k >= 0
    kk = np.where(inside, k, 0)
    lf = log_factorials(int(kk.max(initial=0)))
    out = xlogy(kk, mean) - mean - lf[kk]
    return np.where(inside, out, -np.inf)


def pois_tail_le(mean: float, j: int) -> float:
    """Pr{Poisson(mean) ≤ j}."""
    _check_mean(mean)
    if j < 0:
        return 0.0
    if mean == 0.0:
        return 1.0
    return _prob(pois_logpmf(mean, np.arange(0, j + 1)))


def pois_tail_ge(mean: float, j: int) -> float:
    """Pr{Poisson(mean) ≥ j}.

    Below the mean the complement of the lower tail is used; above it the
    terms are summed directly until they fall under 1e-18 of the leading one.
    """
    _check_mean(mean)
    if j <= 0:
        return 1.0
    if mean == 0.0:
        return 0.0
    if j <= mean:
        return max(0.0, 1.0 - pois_tail_le(mean, j - 1))
    width = max(32, int(8.0 * math.sqrt(mean)) + 32)
    while True:
        terms = pois_logpmf(mean, np.arange(j, j + width))
        if terms[-1] - terms[0] < _LOG_TRUNCATION:
            return _prob(terms)
        width *= 2


def _hyper_range(N: int, M: int, n: int) -> tuple[int, int]:
    if not 0 <= M <= N:
        raise DomainError(f"hypergeometric requires 0 <= M <= N, got M={M}, N={N}")
    if not 1 <= n <= N:
        raise DomainError(f"hypergeometric requires 1 <= n <= N, got n={n}, N={N}")
    return max(0, n - (N - M)), min(n, M)


def hyper_logpmf(N: int, M: int, n: int, ks: ArrayLike) -> NDArray[np.float64]:
    """Vectorised ln Pr{Hyp(N, M, n) = k}; -inf outside the support."""
    lo, hi = _hyper_range(N, M, n)
    k = np.asarray(ks, dtype=np.int64)
    inside = (k >= lo) & (k <= hi)
    kk = np.where(inside, k, lo)
    lf = log_factorials(N)

    def lc(a: int | NDArray, b: int | NDArray) -> NDArray:
        return lf[a] - lf[b] - lf[np.subtract(a, b)]

    out = lc(M, kk) + lc(N - M, n - kk) - lc(N, n)
    return np.where(inside, out, -np.inf)


def hyper_tail_ge(N: int, M: int, n: int, j: int) -> float:
    """Pr{Hyp(N, M, n) ≥ j}: at least j marked units in n draws without replacement."""
    lo, hi = _hyper_range(N, M, n)
    if j <= lo:
        return 1.0
    if j > hi:
        return 0.0
    return _prob(hyper_logpmf(N, M, n, np.arange(j, hi + 1)))


def hyper_tail_le(N: int, M: int, n: int, j: int) -> float:
    """Pr{Hyp(N, M, n) ≤ j}."""
    lo, hi = _hyper_range(N, M, n)
    if j < lo:
        return 0.0
    if j >= hi:
        return 1.0
    return _prob(hyper_logpmf(N, M, n, np.arange(lo, j + 1)))
