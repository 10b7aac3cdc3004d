"""Closed-form quantities for contaminated head runs.

Logarithms written ``log`` in the docstrings are base ``1/p``; ``c = ln(1/p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import CoinSpec, DomainError

__all__ = [
    "CenteringResult",
    "SandwichBounds",
    "ConditionReport",
    "log_inv_p",
    "p_a1",
    "p_a1_direct",
    "alpha_t1",
    "alpha_t2",
    "alpha_conjecture",
    "alpha",
    "m0_center",
    "m_center",
    "q0",
    "accompanying_cdf_old",
    "accompanying_cdf_new",
    "tau_scale",
    "hitting_cdf_limit",
    "cfk_sandwich",
    "default_epsilon",
    "check_conditions",
]


@dataclass(frozen=True)
class CenteringResult:
    value: float
    integer_part: int
    fractional_part: float

    @classmethod
    def split(cls, value: float) -> "CenteringResult":
        ip = math.floor(value)
        return cls(value=value, integer_part=int(ip), fractional_part=value - ip)


@dataclass(frozen=True)
class SandwichBounds:
    lower: float
    upper: float
    alpha: float
    epsilon: float
    m: int
    N: int

    def contains(self, x: float, strict: bool = True) -> bool:
        if strict:
            return self.lower < x < self.upper
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class ConditionReport:
    siii: bool
    sii: bool
    si_deviation: float | None
    epsilon: float
    alpha: float | None


def log_inv_p(x: float, coin: CoinSpec) -> float:
    """Logarithm of ``x`` in base ``1/p``."""
    if not x > 0:
        raise DomainError(f"logarithm needs a positive argument, got {x}")
    return math.log(x) / coin.c


def _log_p_a1(m: int, T: int, coin: CoinSpec) -> float:
    log_binom = math.lgamma(m + 1) - math.lgamma(T + 1) - math.lgamma(m - T + 1)
    return log_binom + (m - T) * math.log(coin.p) + T * math.log(coin.q)


def p_a1(m: int, T: int, coin: CoinSpec) -> float:
    """Probability that a fixed window of length ``m`` holds exactly ``T`` tails."""
    if T < 0 or m < T:
        raise DomainError(f"need m >= T >= 0, got m={m}, T={T}")
    if m <= 60:
        return p_a1_direct(m, T, coin)
    return math.exp(_log_p_a1(m, T, coin))


def p_a1_direct(m: int, T: int, coin: CoinSpec) -> float:
    if T < 0 or m < T:
        raise DomainError(f"need m >= T >= 0, got m={m}, T={T}")
    return math.comb(m, T) * coin.p ** (m - T) * coin.q**T


def alpha_t1(m: int, coin: CoinSpec) -> float:
    """Conditional avoidance level for ``T = 1``; exact for every ``m >= 2``."""
    if m < 2:
        raise DomainError(f"alpha for T=1 needs m >= 2, got {m}")
    return coin.q + (2.0 * coin.p ** (m - 1) - 1.0) / m


def alpha_t2(m: int, coin: CoinSpec, refined: bool = False) -> float:
    """Conditional avoidance level for ``T = 2``.

    ``q - 2/m`` is correct up to ``O(p^m)``; ``refined=True`` adds the two
    leading ``p^m``-order corrections.
    """
    if m < 3:
        raise DomainError(f"alpha for T=2 needs m >= 3, got {m}")
    p = coin.p
    val = coin.q - 2.0 / m
    if refined:
        val += 2.0 * (m - 2) / m * p ** (m - 2) - 2.0 * (m - 4) / m * p ** (m - 1)
    return val


def alpha_conjecture(m: int, T: int, coin: CoinSpec) -> float:
    """``q - T/m``: proven only for T in {1, 2} up to O(p^m); exact for T = 0."""
    if m < max(T, 1):
        raise DomainError(f"need m >= max(T, 1), got m={m}, T={T}")
    return coin.q - T / m


def alpha(m: int, T: int, coin: CoinSpec, refined: bool = False) -> float:
    if T == 1:
        return alpha_t1(m, coin)
    if T == 2:
        return alpha_t2(m, coin, refined)
    return alpha_conjecture(m, T, coin)


def _check_qn(N: float, coin: CoinSpec) -> float:
    qn = coin.q * N
    if not qn > 1.0:
        raise DomainError(f"centering needs q*N > 1, got q*N = {qn:g}")
    return qn


def m0_center(N: float, T: int, coin: CoinSpec) -> CenteringResult:
    """Classical centering ``log(qN) + T log(log(qN)) + T log(q/p) - log(T!)``."""
    qn = _check_qn(N, coin)
    c = coin.c
    lq = math.log(qn) / c
    val = lq
    if T:
        val += T * math.log(lq) / c + T * math.log(coin.q / coin.p) / c - math.lgamma(T + 1) / c
    return CenteringResult.split(val)


def q0(T: int, coin: CoinSpec) -> float:
    q = coin.q
    return 2.0 * q / (2.0 + T * q - q)


def m_center(N: float, T: int, coin: CoinSpec) -> CenteringResult:
    """Corrected centering with the ``1/log(qN)`` and ``(1/log(qN))^2`` terms."""
    if T < 1:
        raise DomainError("the corrected centering is defined for T >= 1")
    qn = _check_qn(N, coin)
    c = coin.c
    L = math.log(qn) / c
    LL = math.log(L) / c
    qz = q0(T, coin)
    const = (T * math.log(coin.q / coin.p) - math.lgamma(T + 1)) / c
    terms = (
        L,
        T * LL,
        T**2 * LL / (c * L),
        -T / (c * qz * L),
        -(T**3) / (2 * c) * (LL / L) ** 2,
        T**2 * LL / (c * qz * L**2),
        T**3 * LL / (c * L) ** 2,
        const * (1 + T / (c * L) - T**2 * LL / (c * L**2)),
    )
    return CenteringResult.split(math.fsum(terms))


def accompanying_cdf_old(k: int, N: float, T: int, coin: CoinSpec) -> float:
    """Approximation of ``P(mu(N) - [m0(N)] < k)``."""
    frac = m0_center(N, T, coin).fractional_part
    return _gumbel_lattice(coin.p, k - frac)


def _exponent_multiplier(N: float, T: int, coin: CoinSpec) -> float:
    c = coin.c
    L = math.log(coin.q * N) / c
    LL = math.log(L) / c
    return 1.0 - T / (c * L) + T**2 * LL / (c * L**2)


def accompanying_cdf_new(k: int, N: float, T: int, coin: CoinSpec) -> float:
    """Approximation of ``P(mu(N) - [m(N)] < k)`` with the rescaled exponent."""
    frac = m_center(N, T, coin).fractional_part
    return _gumbel_lattice(coin.p, (k - frac) * _exponent_multiplier(N, T, coin))


def _gumbel_lattice(p: float, e: float) -> float:
    # exp(-p**e) without overflow for very negative e
    le = e * math.log(p)
    if le > 700.0:
        return 0.0
    return math.exp(-math.exp(le))


def tau_scale(m: int, T: int, coin: CoinSpec, refined: bool = False) -> float:
    """Rate ``alpha * P(A_1)`` making ``tau_m`` approximately standard exponential."""
    a = alpha(m, T, coin, refined)
    if a <= 0.0:
        raise DomainError(f"alpha = {a:.6g} <= 0 for T={T}, m={m}, p={coin.p}; m is too small")
    return a * p_a1(m, T, coin)


def hitting_cdf_limit(x: float) -> float:
    if x < 0:
        raise DomainError(f"x must be non-negative, got {x}")
    return -math.expm1(-x)


def cfk_sandwich(N: int, m: int, T: int, coin: CoinSpec, alpha: float, epsilon: float) -> SandwichBounds:
    """Two-sided exponential bounds on the probability that none of ``N``
    consecutive window events occurs."""
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0,1], got {alpha}")
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    if m < 1 or N < 1:
        raise DomainError("m and N must be positive")
    pa = p_a1(m, T, coin)
    lo = math.exp(min(0.0, -(alpha + 10 * epsilon) * N * pa - 2 * m * pa))
    hi = math.exp(min(0.0, -(alpha - 10 * epsilon) * N * pa + 2 * m * pa))
    return SandwichBounds(lower=lo, upper=hi, alpha=alpha, epsilon=epsilon, m=m, N=N)


def default_epsilon(m: int, T: int, coin: CoinSpec, C: float = 1.0) -> float:
    return C * m ** (T + 1) * coin.p**m


def check_conditions(m: int, T: int, coin: CoinSpec, epsilon: float | None = None) -> ConditionReport:
    """Evaluate the rarity and short-range conditions at ``epsilon``.

    ``si_deviation`` compares the enumerated conditional avoidance probability
    with the closed-form level and is only filled in for ``m <= 12``.
    """
    if epsilon is None:
        epsilon = default_epsilon(m, T, coin)
    if m < T or epsilon <= 0:
        raise DomainError("need m >= T and epsilon > 0")
    pa = p_a1(m, T, coin)
    try:
        a = alpha(m, T, coin, refined=(T == 2))
    except DomainError:
        a = None
    dev = None
    if a is not None and m <= 12:
        from .exact_oracle import brute_force_conditional_si

        dev = abs(brute_force_conditional_si(m, T, coin) - a)
    return ConditionReport(siii=pa < epsilon / m, sii=m * pa < epsilon, si_deviation=dev, epsilon=epsilon, alpha=a)
