import math
from fractions import Fraction
from functools import partial

import mpmath
import numpy as np
import pytest
from scipy import stats

from tis import special
from tis.errors import DomainError

mpmath.mp.dps = 40


def test_log_gamma_exact_and_continuous():
    assert special.log_gamma(5) == math.log(24)
    assert special.log_gamma(1) == 0.0
    assert special.log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-14)
    assert special.log_gamma(1000.5) == pytest.approx(float(mpmath.loggamma(1000.5)), rel=1e-14)


@pytest.mark.parametrize("x", [0, -1.5, math.inf])
def test_log_gamma_rejects(x):
    with pytest.raises(DomainError):
        special.log_gamma(x)


def test_log_choose():
    assert special.log_choose(10, 3) == pytest.approx(math.log(120), rel=1e-14)
    assert special.log_choose(10, -1) == -math.inf
    assert special.log_choose(10, 11) == -math.inf
    assert special.log_choose(7, 0) == 0.0


def test_log_choose_array_matches_scalar():
    m = np.arange(0, 400, 7)
    got = special.log_choose_array(m, 5)
    for mi, value in zip(m, got):
        assert value == pytest.approx(special.log_choose(int(mi), 5), abs=1e-9)


def test_log_sum_exp_does_not_underflow():
    assert special.log_sum_exp([-1000.0, -1000.0]) == pytest.approx(-1000.0 + math.log(2), rel=1e-15)
    assert special.log_sum_exp([]) == -math.inf
    assert special.log_sum_exp([-math.inf, -math.inf]) == -math.inf


@pytest.mark.parametrize("n,p,j", [(20, 0.3, 7), (577, 0.25, 173), (1000, 0.01, 25), (50, 0.9, 50)])
def test_binomial_tails_against_incomplete_beta(n, p, j):
    upper = mpmath.betainc(j, n - j + 1, 0, p, regularized=True)
    assert special.binom_tail_ge(n, p, j) == pytest.approx(float(upper), rel=1e-10)
    assert special.binom_tail_le(n, p, j - 1) == pytest.approx(float(1 - upper), rel=1e-10)


def test_binomial_tail_far_out_stays_positive():
    tail = special.binom_tail_ge(100_000, 0.3, 32_000)
    assert 0.0 < tail < 1e-40
    assert tail == pytest.approx(stats.binom.sf(31_999, 100_000, 0.3), rel=1e-7)


def test_binomial_tail_corners():
    assert special.binom_tail_ge(10, 0.5, 0) == 1.0
    assert special.binom_tail_ge(10, 0.5, 11) == 0.0
    assert special.binom_tail_ge(10, 0.0, 1) == 0.0
    assert special.binom_tail_le(10, 1.0, 9) == 0.0
    assert special.binom_tail_le(0, 0.3, 0) == 1.0
    with pytest.raises(DomainError):
        special.binom_tail_ge(10, 1.5, 3)


@pytest.mark.parametrize("mean,j", [(0.7, 3), (5.0, 2), (5.0, 14), (250.0, 300), (40.0, 10)])
def test_poisson_tails_against_incomplete_gamma(mean, j):
    ge = mpmath.gammainc(j, 0, mean, regularized=True)
    le = mpmath.gammainc(j + 1, mean, mpmath.inf, regularized=True)
    assert special.pois_tail_ge(mean, j) == pytest.approx(float(ge), rel=1e-10)
    assert special.pois_tail_le(mean, j) == pytest.approx(float(le), rel=1e-10)


def test_poisson_zero_mean():
    assert special.pois_tail_ge(0.0, 1) == 0.0
    assert special.pois_tail_le(0.0, 0) == 1.0
    with pytest.raises(DomainError):
        special.pois_tail_le(-1.0, 2)


def _hyper_exact(N, M, n, ks):
    return sum(Fraction(math.comb(M, k) * math.comb(N - M, n - k), math.comb(N, n)) for k in ks)


@pytest.mark.parametrize("N,M,n,j", [(20, 7, 10, 4), (60, 30, 25, 20), (1000, 250, 577, 150), (10, 0, 5, 0)])
def test_hypergeometric_tails_exact(N, M, n, j):
    lo, hi = max(0, n - (N - M)), min(n, M)
    ge = _hyper_exact(N, M, n, range(max(j, lo), hi + 1))
    le = _hyper_exact(N, M, n, range(lo, min(j, hi) + 1))
    assert special.hyper_tail_ge(N, M, n, j) == pytest.approx(float(ge), rel=1e-9, abs=1e-300)
    assert special.hyper_tail_le(N, M, n, j) == pytest.approx(float(le), rel=1e-9, abs=1e-300)


def test_hypergeometric_preconditions():
    with pytest.raises(DomainError):
        special.hyper_tail_ge(10, 11, 5, 1)
    with pytest.raises(DomainError):
        special.hyper_tail_le(10, 3, 11, 1)


def test_logpmfs_sum_to_one():
    assert math.fsum(np.exp(special.binom_logpmf(300, 0.37, np.arange(301)))) == pytest.approx(1.0, abs=1e-12)
    assert math.fsum(np.exp(special.hyper_logpmf(80, 33, 40, np.arange(41)))) == pytest.approx(1.0, abs=1e-12)
    assert math.fsum(np.exp(special.pois_logpmf(4.2, np.arange(200)))) == pytest.approx(1.0, abs=1e-12)


TAIL_PAIRS = [
    pytest.param(50, partial(special.binom_tail_ge, 50, 0.3), partial(special.binom_tail_le, 50, 0.3), id="binomial"),
    pytest.param(40, partial(special.pois_tail_ge, 5.0), partial(special.pois_tail_le, 5.0), id="poisson"),
    pytest.param(150, partial(special.pois_tail_ge, 60.0), partial(special.pois_tail_le, 60.0), id="poisson-large"),
    pytest.param(
        16, partial(special.hyper_tail_ge, 30, 12, 15), partial(special.hyper_tail_le, 30, 12, 15), id="hypergeometric"
    ),
]


@pytest.mark.parametrize("top,ge,le", TAIL_PAIRS)
def test_tails_are_complementary(top, ge, le):
    for j in range(-1, top + 2):
        assert ge(j) + le(j - 1) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("top,ge,le", TAIL_PAIRS)
def test_tails_are_monotone_in_the_threshold(top, ge, le):
    upper = [ge(j) for j in range(-1, top + 2)]
    lower = [le(j) for j in range(-1, top + 2)]
    assert all(b <= a + 1e-12 for a, b in zip(upper, upper[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(lower, lower[1:]))


@pytest.mark.parametrize("n", [1, 12, 60])
def test_binomial_upper_tail_grows_with_p(n):
    grid = np.linspace(0.0, 1.0, 101)
    for j in range(n + 2):
        tails = [special.binom_tail_ge(n, float(p), j) for p in grid]
        assert all(b >= a - 1e-12 for a, b in zip(tails, tails[1:]))


@pytest.mark.parametrize("N", range(1, 31))
def test_hypergeometric_upper_tail_grows_with_M(N):
    for n in range(1, N + 1):
        for j in range(n + 2):
            tails = [special.hyper_tail_ge(N, M, n, j) for M in range(N + 1)]
            assert all(b >= a - 1e-12 for a, b in zip(tails, tails[1:]))


@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)])
def test_binomial_tails_match_rational_arithmetic(p):
    for n in range(13):
        pmf = [math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)]
        for j in range(n + 2):
            assert special.binom_tail_ge(n, float(p), j) == pytest.approx(float(sum(pmf[j:])), abs=1e-14)
            assert special.binom_tail_le(n, float(p), j) == pytest.approx(float(sum(pmf[: j + 1])), abs=1e-14)
