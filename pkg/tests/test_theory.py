import itertools
import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contam_runs.core import CoinSpec, DomainError
from contam_runs.exact_oracle import brute_force_conditional_si
from contam_runs.theory import (
    accompanying_cdf_new,
    accompanying_cdf_old,
    alpha_conjecture,
    alpha_t1,
    alpha_t2,
    cfk_sandwich,
    check_conditions,
    hitting_cdf_limit,
    log_inv_p,
    m0_center,
    m_center,
    p_a1,
    p_a1_direct,
    tau_scale,
)

HALF = CoinSpec(0.5)


def test_coin_validation():
    for bad in (0.0, 1.0, -0.2, 1.5, float("nan")):
        with pytest.raises(DomainError):
            CoinSpec(bad)
    c = CoinSpec(0.25)
    assert c.q == 0.75
    assert c.c == pytest.approx(math.log(4))


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_log_inv_p(p):
    coin = CoinSpec(p)
    assert log_inv_p(1, coin) == 0
    assert log_inv_p(1 / p, coin) == pytest.approx(1, rel=1e-15)
    with pytest.raises(DomainError):
        log_inv_p(0, coin)


def test_log_inv_p_base_two():
    assert log_inv_p(8, HALF) == pytest.approx(3, rel=1e-15)


def _enumerated_p_a1(m, T, p):
    return sum(
        p ** sum(w) * (1 - p) ** (m - sum(w)) for w in itertools.product((0, 1), repeat=m) if w.count(0) == T
    )


def test_p_a1_examples():
    assert p_a1(3, 1, HALF) == pytest.approx(_enumerated_p_a1(3, 1, 0.5), abs=1e-15)
    assert p_a1(3, 1, HALF) == 0.375
    assert p_a1(5, 0, HALF) == 0.03125
    assert p_a1(2, 2, CoinSpec(0.3)) == pytest.approx(0.49, rel=1e-14)
    with pytest.raises(DomainError):
        p_a1(2, 3, HALF)


@pytest.mark.parametrize("p", [0.3, 0.5, 0.9])
@pytest.mark.parametrize("T", [0, 1, 2, 3])
def test_p_a1_log_space_matches_direct(p, T):
    coin = CoinSpec(p)
    for m in range(61, 400, 7):
        direct = p_a1_direct(m, T, coin)
        if direct < 1e-300:
            break
        assert p_a1(m, T, coin) == pytest.approx(direct, rel=1e-10)


def test_p_a1_no_underflow_in_log_space():
    assert p_a1(5000, 2, CoinSpec(0.9)) > 0


def test_alpha_t1_examples():
    assert alpha_t1(2, HALF) == 0.5
    assert alpha_t1(3, HALF) == pytest.approx(1 / 3, abs=1e-15)
    assert alpha_t1(10**6, HALF) == pytest.approx(0.5, abs=1e-5)
    with pytest.raises(DomainError):
        alpha_t1(1, HALF)


@pytest.mark.parametrize("m", [2, 3, 5, 8])
def test_alpha_t1_matches_enumeration(m):
    exact = brute_force_conditional_si(m, 1, HALF, exact=True)
    p = Fraction(1, 2)
    assert exact == (1 - p) + (2 * p ** (m - 1) - 1) / m


def test_alpha_t2_examples():
    assert alpha_t2(10, HALF) == pytest.approx(0.5 - 0.2, abs=1e-15)
    assert alpha_t2(10**6, HALF) == pytest.approx(0.5, abs=1e-5)
    assert alpha_t2(10**6, HALF, refined=True) == pytest.approx(0.5, abs=1e-5)
    with pytest.raises(DomainError):
        alpha_t2(2, HALF)


def test_alpha_t2_refined_against_enumeration():
    bf = brute_force_conditional_si(8, 2, HALF)
    assert abs(bf - alpha_t2(8, HALF, refined=True)) <= 2 * 0.5**8


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_alpha_t2_unrefined_error_is_order_p_to_m(p):
    coin = CoinSpec(p)
    ratios = []
    for m in range(5, 13):
        bf = brute_force_conditional_si(m, 2, coin)
        ratios.append(abs(bf - alpha_t2(m, coin)) / p**m)
        assert abs(bf - alpha_t2(m, coin, refined=True)) <= abs(bf - alpha_t2(m, coin))
    # error is p^m * (2(m-2)/(m p^2) - 2(m-4)/(m p)), bounded in m
    assert max(ratios) <= 2 / p**2 + 2 / p


def test_alpha_t2_unrefined_error_at_half_is_four_p_to_m():
    for m in range(5, 13):
        bf = brute_force_conditional_si(m, 2, HALF, exact=True)
        assert abs(bf - (Fraction(1, 2) - Fraction(2, m))) == 4 * Fraction(1, 2) ** m


def test_alpha_conjecture_exact_for_pure_runs():
    for m in range(2, 11):
        assert brute_force_conditional_si(m, 0, HALF) == pytest.approx(alpha_conjecture(m, 0, HALF), abs=1e-14)


def test_m0_examples():
    N = 10**6
    lq = math.log2(N / 2)
    assert m0_center(N, 0, HALF).value == pytest.approx(lq, rel=1e-14)
    assert m0_center(N, 1, HALF).value == pytest.approx(23.174, abs=5e-4)
    assert m0_center(N, 2, HALF).value == pytest.approx(26.417, abs=5e-4)
    r = m0_center(N, 2, HALF)
    assert r.integer_part == 26 and 0 <= r.fractional_part < 1
    assert r.integer_part + r.fractional_part == r.value
    with pytest.raises(DomainError):
        m0_center(2, 1, HALF)


def _m_center_mp(N, T, p):
    """50-digit re-evaluation of the corrected centering, typed independently."""
    with mpmath.workdps(50):
        p = mpmath.mpf(p)
        q = 1 - p
        c = mpmath.log(1 / p)

        def lg(x):
            return mpmath.log(x) / c

        L = lg(q * N)
        LL = lg(L)
        qz = 2 * q / (2 + T * q - q)
        val = (
            L
            + T * LL
            + T**2 * LL / (c * L)
            - T / (c * qz * L)
            - mpmath.mpf(T**3) / (2 * c) * (LL / L) ** 2
            + T**2 * LL / (c * qz * L**2)
            + T**3 * LL / (c * L) ** 2
            + (T * lg(q / p) - lg(mpmath.factorial(T))) * (1 + T / (c * L) - T**2 * LL / (c * L**2))
        )
        return val


@pytest.mark.parametrize("N", [10**4, 10**5, 10**6, 10**7, 10**8])
@pytest.mark.parametrize("T", [1, 2])
@pytest.mark.parametrize("p", [0.4, 0.5, 0.6])
def test_m_center_high_precision(N, T, p):
    ref = _m_center_mp(N, T, p)
    got = m_center(N, T, CoinSpec(p)).value
    assert abs(got - float(ref)) <= 1e-9 * abs(float(ref))


def test_m_center_approaches_m0():
    for e in range(4, 9):
        N = 10**e
        d = m_center(N, 1, HALF).value - m0_center(N, 1, HALF).value
        L = math.log2(N / 2)
        rate = math.log2(L) / L
        assert abs(d) / rate < 5
    assert m_center(1e200, 1, HALF).value - m0_center(1e200, 1, HALF).value == pytest.approx(0, abs=0.1)


def test_m_center_requires_positive_T():
    with pytest.raises(DomainError):
        m_center(10**6, 0, HALF)


@pytest.mark.parametrize("cdf", [accompanying_cdf_old, accompanying_cdf_new])
@pytest.mark.parametrize("T,p", [(1, 0.5), (2, 0.5), (2, 0.6), (2, 0.4)])
def test_accompanying_cdfs_are_cdfs(cdf, T, p):
    coin = CoinSpec(p)
    vals = [cdf(k, 10**6, T, coin) for k in range(-60, 80)]
    assert vals == sorted(vals)
    assert vals[0] == pytest.approx(0, abs=1e-12)
    assert vals[-1] == pytest.approx(1, abs=1e-12)
    assert all(0 <= v <= 1 for v in vals)


def test_old_cdf_formula():
    frac = m0_center(10**6, 1, HALF).fractional_part
    for k in (-2, 0, 1, 3):
        assert accompanying_cdf_old(k, 10**6, 1, HALF) == pytest.approx(math.exp(-(0.5 ** (k - frac))), rel=1e-14)


def test_new_approaches_old_when_fractions_agree():
    # with the corrections vanishing, both CDFs use the same Gumbel form
    N = 1e300
    coin = HALF
    fn = m_center(N, 1, coin).fractional_part
    fo = m0_center(N, 1, coin).fractional_part
    for k in range(-3, 4):
        new = accompanying_cdf_new(k, N, 1, coin)
        shifted = math.exp(-(0.5 ** (k - fn)))
        assert new == pytest.approx(shifted, abs=0.02)
    assert abs(fn - fo) < 0.1 or abs(abs(fn - fo) - 1) < 0.1


def test_tau_scale():
    m = 13
    expected = (0.5 + (2 * 0.5**12 - 1) / 13) * 13 * 0.5**12 * 0.5
    assert tau_scale(m, 1, HALF) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(DomainError):
        tau_scale(3, 2, HALF)
    big = 400
    assert tau_scale(big, 1, HALF) / (0.5 * big * 0.5 ** (big - 1) * 0.5) == pytest.approx(1, rel=0.01)


def test_hitting_cdf_limit():
    assert hitting_cdf_limit(0) == 0
    assert hitting_cdf_limit(math.log(2)) == pytest.approx(0.5)
    assert hitting_cdf_limit(1e6) == 1
    with pytest.raises(DomainError):
        hitting_cdf_limit(-1)


def test_cfk_sandwich_examples():
    b0 = cfk_sandwich(1000, 10, 1, HALF, alpha=0.4, epsilon=0.0)
    pa = p_a1(10, 1, HALF)
    assert b0.upper / b0.lower == pytest.approx(math.exp(4 * 10 * pa))
    b = cfk_sandwich(1000, 10, 1, HALF, alpha=0.4, epsilon=1e-3)
    assert b.lower < b.upper
    with pytest.raises(DomainError):
        cfk_sandwich(1000, 10, 1, HALF, alpha=0.0, epsilon=1e-3)
    with pytest.raises(DomainError):
        cfk_sandwich(1000, 10, 1, HALF, alpha=1.2, epsilon=1e-3)


@given(
    st.integers(1, 10**7),
    st.integers(1, 60),
    st.integers(0, 3),
    st.floats(0.05, 0.95),
    st.floats(0.01, 1.0),
    st.floats(0, 0.5),
)
def test_cfk_sandwich_ordered(N, m, T, p, a, eps):
    if m < T:
        return
    b = cfk_sandwich(N, m, T, CoinSpec(p), a, eps)
    assert 0 <= b.lower <= b.upper <= 1


def test_check_conditions_examples():
    r = check_conditions(40, 1, HALF, epsilon=0.01)
    assert r.siii and r.sii
    r = check_conditions(3, 1, HALF, epsilon=1e-6)
    assert not r.siii
    r = check_conditions(8, 1, HALF)
    assert r.si_deviation is not None and r.si_deviation <= 1e-12
    assert check_conditions(20, 1, HALF).si_deviation is None
