"""Exact window-avoidance probabilities.

Two independent routes:

* enumeration of all ``2^N`` records, tallied by number of heads so the
  probability is a polynomial in ``p`` with exact integer coefficients;
* a forward dynamic program over a finite automaton whose state is the list
  of ages of the most recent ``T + 1`` tails still inside a live window.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numba
import numpy as np

from .core import CoinSpec, DomainError, RunParams, SizeLimitError

__all__ = [
    "WindowMode",
    "ENUM_MAX_N",
    "CONDITIONAL_MAX_M",
    "DP_MAX_T",
    "DP_MAX_M",
    "DP_MAX_N",
    "Automaton",
    "build_automaton",
    "state_count_bound",
    "brute_force_no_occurrence",
    "brute_force_conditional_si",
    "dp_no_window_probability",
    "exact_mu_distribution",
    "exact_tau_survival",
]

ENUM_MAX_N = 22
CONDITIONAL_MAX_M = 12
DP_MAX_T = 3
DP_MAX_M = 64
DP_MAX_N = 10**7

_CHUNK = 1 << 20


class WindowMode(enum.Enum):
    AT_MOST_T = "at_most"
    EXACTLY_T = "exactly"

    @classmethod
    def parse(cls, value: "WindowMode | str") -> "WindowMode":
        if isinstance(value, cls):
            return value
        v = str(value).lower().replace("-", "_")
        for mode in cls:
            if v in (mode.value, mode.name.lower()):
                return mode
        raise ValueError(f"unknown window mode {value!r}")


def _qualifies(zeros, T: int, mode: WindowMode):
    if mode is WindowMode.AT_MOST_T:
        return zeros <= T
    return zeros == T


def _evaluate(counts: np.ndarray, length: int, coin: CoinSpec, exact: bool):
    """Sum ``counts[k] p^k q^(length-k)`` either exactly or with fsum."""
    if exact:
        p = Fraction(coin.p)
        q = 1 - p
        return sum((int(c) * p**k * q ** (length - k) for k, c in enumerate(counts) if c), Fraction(0))
    p, q = coin.p, coin.q
    return math.fsum(float(c) * p**k * q ** (length - k) for k, c in enumerate(counts) if c)


@lru_cache(maxsize=512)
def _avoid_counts(N: int, m: int, T: int, mode: WindowMode) -> tuple[int, ...]:
    # counts[k] = number of length-N records with k heads and no qualifying window
    mask = np.uint64((1 << m) - 1)
    counts = np.zeros(N + 1, dtype=np.int64)
    total = 1 << N
    for lo in range(0, total, _CHUNK):
        x = np.arange(lo, min(total, lo + _CHUNK), dtype=np.uint64)
        hit = np.zeros(x.size, dtype=bool)
        for start in range(N - m + 1):
            ones = np.bitwise_count((x >> np.uint64(start)) & mask)
            hit |= _qualifies(m - ones.astype(np.int64), T, mode)
        w = np.bitwise_count(x[~hit]).astype(np.int64)
        counts += np.bincount(w, minlength=N + 1)
    return tuple(int(c) for c in counts)


def brute_force_no_occurrence(
    N: int, params: RunParams, coin: CoinSpec, mode: WindowMode | str = WindowMode.EXACTLY_T, exact: bool = False
):
    """Probability that no window starting at ``1..N-m+1`` qualifies, by full enumeration.

    With ``exact=True`` the result is a :class:`fractions.Fraction` computed from
    the binary value of ``p`` (so dyadic ``p`` gives bit-exact results).
    """
    mode = WindowMode.parse(mode)
    if N < 0:
        raise DomainError("N must be non-negative")
    if N > ENUM_MAX_N:
        raise SizeLimitError(f"enumeration limited to N <= {ENUM_MAX_N}, got N={N}")
    m, T = params.m, params.T
    if N < m:
        return Fraction(1) if exact else 1.0
    counts = np.array(_avoid_counts(N, m, T, mode), dtype=np.int64)
    return _evaluate(counts, N, coin, exact)


@lru_cache(maxsize=64)
def _conditional_counts(m: int, T: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    # records X_1..X_{2m-1}; returns (weights of A_1, weights of A_1 and no A_2..A_m)
    L = 2 * m - 1
    mask = np.uint64((1 << m) - 1)
    first = np.zeros(L + 1, dtype=np.int64)
    joint = np.zeros(L + 1, dtype=np.int64)
    total = 1 << L
    for lo in range(0, total, _CHUNK):
        x = np.arange(lo, min(total, lo + _CHUNK), dtype=np.uint64)
        a1 = (m - np.bitwise_count(x & mask).astype(np.int64)) == T
        x = x[a1]
        first += np.bincount(np.bitwise_count(x).astype(np.int64), minlength=L + 1)
        later = np.zeros(x.size, dtype=bool)
        for start in range(1, m):
            later |= (m - np.bitwise_count((x >> np.uint64(start)) & mask).astype(np.int64)) == T
        joint += np.bincount(np.bitwise_count(x[~later]).astype(np.int64), minlength=L + 1)
    return tuple(int(c) for c in first), tuple(int(c) for c in joint)


def brute_force_conditional_si(m: int, T: int, coin: CoinSpec, exact: bool = False):
    """``P(no A_2, ..., A_m | A_1)`` with exactly-``T`` windows, by enumerating
    all ``2^(2m-1)`` records ``X_1..X_{2m-1}``."""
    if m > CONDITIONAL_MAX_M:
        raise SizeLimitError(f"conditional enumeration limited to m <= {CONDITIONAL_MAX_M}, got m={m}")
    if m < 1 or T < 0 or T > m:
        raise DomainError(f"P(A_1) = 0 for m={m}, T={T}")
    first, joint = _conditional_counts(m, T)
    L = 2 * m - 1
    den = _evaluate(np.array(first), L, coin, exact)
    num = _evaluate(np.array(joint), L, coin, exact)
    if den == 0:
        raise DomainError(f"P(A_1) underflows to 0 for m={m}, T={T}, p={coin.p}")
    return num / den


class Automaton:
    """Transition tables of the zero-age automaton for one ``(m, T, mode)``.

    State ``s`` lists the ages (1 = latest toss) of at most ``T + 1`` most
    recent tails whose age is at most ``m - 1``. Reading a toss ages every
    tail by one, inserts age 1 on tails, and the window of the last ``m``
    tosses then holds the tails of age ``<= m``. Keeping ``T + 1`` of them is
    enough to tell "fewer than", "exactly" and "more than" ``T`` apart.
    """

    def __init__(self, m: int, T: int, mode: WindowMode) -> None:
        self.m, self.T, self.mode = m, T, mode
        index: dict[tuple[int, ...], int] = {(): 0}
        states: list[tuple[int, ...]] = [()]
        succ = [[], []]
        kill = [[], []]
        i = 0
        while i < len(states):
            ages = states[i]
            for bit in (0, 1):
                aged = [a + 1 for a in ages]
                if bit == 0:
                    aged.insert(0, 1)
                kill[bit].append(bool(_qualifies(len(aged), T, mode)))
                nxt = tuple(a for a in aged if a <= m - 1)[: T + 1]
                j = index.get(nxt)
                if j is None:
                    j = index[nxt] = len(states)
                    states.append(nxt)
                succ[bit].append(j)
            i += 1
        self.states = states
        self.succ_tails = np.array(succ[0], dtype=np.int64)
        self.succ_heads = np.array(succ[1], dtype=np.int64)
        self.kill_tails = np.array(kill[0], dtype=np.bool_)
        self.kill_heads = np.array(kill[1], dtype=np.bool_)

    @property
    def size(self) -> int:
        return len(self.states)


@lru_cache(maxsize=128)
def build_automaton(m: int, T: int, mode: WindowMode) -> Automaton:
    return Automaton(m, T, mode)


def state_count_bound(m: int, T: int) -> int:
    return sum(math.comb(m - 1, j) for j in range(T + 2))


@numba.njit(cache=True, nogil=True)
def _propagate(v, succ_h, succ_t, kill_h, kill_t, p, q, warm, checked):
    n = v.shape[0]
    w = np.empty(n)
    for step in range(warm + checked):
        check = step >= warm
        w[:] = 0.0
        for s in range(n):
            x = v[s]
            if x == 0.0:
                continue
            if not (check and kill_h[s]):
                w[succ_h[s]] += p * x
            if not (check and kill_t[s]):
                w[succ_t[s]] += q * x
        v, w = w, v
    return v


def _check_dp_limits(N: int, m: int, T: int) -> None:
    if T > DP_MAX_T:
        raise SizeLimitError(f"DP limited to T <= {DP_MAX_T}, got T={T}")
    if m > DP_MAX_M:
        raise SizeLimitError(f"DP limited to m <= {DP_MAX_M}, got m={m}")
    if N > DP_MAX_N:
        raise SizeLimitError(f"DP limited to N <= {DP_MAX_N}, got N={N}")
    if N < 0:
        raise DomainError("N must be non-negative")


def dp_no_window_probability(
    N: int, params: RunParams, coin: CoinSpec, mode: WindowMode | str = WindowMode.EXACTLY_T
) -> float:
    """Exact probability that no length-``m`` window among ``X_1..X_N`` qualifies."""
    mode = WindowMode.parse(mode)
    m, T = params.m, params.T
    _check_dp_limits(N, m, T)
    if N < m:
        return 1.0
    auto = build_automaton(m, T, mode)
    v = np.zeros(auto.size)
    v[0] = 1.0
    warm = m - 1
    v = _propagate(
        v, auto.succ_heads, auto.succ_tails, auto.kill_heads, auto.kill_tails, coin.p, coin.q, warm, N - warm
    )
    return min(1.0, math.fsum(v.tolist()))


def exact_mu_distribution(
    N: int, T: int, coin: CoinSpec, m_range: Iterable[int], workers: int | None = None
) -> dict[int, float]:
    """``P(mu(N) < m)`` for each ``m`` in ``m_range``."""
    ms = sorted(set(int(m) for m in m_range))

    def one(m: int) -> float:
        if m <= 0:
            return 0.0
        if m > N:
            return 1.0
        return dp_no_window_probability(N, RunParams(T=T, m=m), coin, WindowMode.AT_MOST_T)

    for m in ms:
        if 0 < m <= N:
            _check_dp_limits(N, m, T)
    if workers is None or workers <= 1 or len(ms) <= 1:
        vals = [one(m) for m in ms]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(one, ms))
    return dict(zip(ms, vals))


def exact_tau_survival(n: int, params: RunParams, coin: CoinSpec) -> float:
    """``P(tau_m > n)``: no exactly-``T`` window completed by toss ``n``."""
    return dp_no_window_probability(n, params, coin, WindowMode.EXACTLY_T)
