"""Seeded Monte Carlo replications of the longest run and the hitting time.

Replication ``r`` draws its tosses from a Philox stream keyed by
``SeedSequence(seed, spawn_key=(r,))``, so results never depend on how
replications are spread over worker processes.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from . import theory
from .core import CoinSpec, ConfigError
from .run_scan import StreamScanner

__all__ = [
    "SimulationConfig",
    "EmpiricalDistribution",
    "KSReport",
    "Theory",
    "HittingResult",
    "CompareResult",
    "substream",
    "generate_sequence",
    "iter_blocks",
    "simulate_longest_values",
    "run_longest_experiment",
    "run_hitting_experiment",
    "ks_distance",
    "compare_new_old",
    "dkw_epsilon",
]

BLOCK = 1 << 16
CENSOR_MEAN_LIFETIMES = 50

BitSource = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class SimulationConfig:
    N: int
    s: int
    T: int
    coin: CoinSpec
    seed: int = 20240607
    m_hit: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.s < 1:
            raise ConfigError("s must be at least 1")
        if self.N < 1:
            raise ConfigError("N must be positive")
        if self.T < 0:
            raise ConfigError("T must be non-negative")
        if self.m_hit is not None and self.m_hit < 1:
            raise ConfigError("m_hit must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def validate_longest(self) -> None:
        if not self.coin.q * self.N > 1:
            raise ConfigError(f"q*N must exceed 1, got {self.coin.q * self.N:g}")
        if self.m_hit is not None and self.N < self.m_hit:
            raise ConfigError("N must be at least m_hit")


def substream(seed: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replication,))))


def bernoulli_bits(rng: np.random.Generator, size: int, p: float) -> np.ndarray:
    return (rng.random(size) < p).view(np.uint8)


def generate_sequence(rng: np.random.Generator, N: int, coin: CoinSpec) -> np.ndarray:
    """``N`` i.i.d. tosses as a uint8 array (1 = heads)."""
    return bernoulli_bits(rng, N, coin.p)


def iter_blocks(rng: np.random.Generator, N: int, coin: CoinSpec, block: int = BLOCK, source: BitSource | None = None) -> Iterator[np.ndarray]:
    done = 0
    while done < N:
        size = min(block, N - done)
        yield source(rng, size) if source is not None else bernoulli_bits(rng, size, coin.p)
        done += size


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Tallies of observed values; ``support`` is sorted and may include ``inf``
    for censored observations."""

    support: np.ndarray
    counts: np.ndarray
    total: int

    @classmethod
    def from_samples(cls, values: Sequence[float] | np.ndarray) -> "EmpiricalDistribution":
        arr = np.asarray(values)
        if arr.size == 0:
            raise ValueError("empirical distribution needs at least one sample")
        support, counts = np.unique(arr, return_counts=True)
        return cls(support=support, counts=counts.astype(np.int64), total=int(arr.size))

    @property
    def is_lattice(self) -> bool:
        return np.issubdtype(self.support.dtype, np.integer)

    def cdf(self, x: float) -> float:
        """Fraction of observations ``<= x``."""
        idx = np.searchsorted(self.support, x, side="right")
        return float(self.counts[:idx].sum()) / self.total

    def cdf_strict(self, x: float) -> float:
        """Fraction of observations ``< x``."""
        idx = np.searchsorted(self.support, x, side="left")
        return float(self.counts[:idx].sum()) / self.total

    def to_dict(self) -> dict:
        return {
            "support": [_jsonable(v) for v in self.support.tolist()],
            "counts": self.counts.tolist(),
            "total": self.total,
        }


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


class Theory(enum.Enum):
    OLD = "old"
    NEW = "new"
    EXP_LIMIT = "exp_limit"


@dataclass(frozen=True)
class KSReport:
    distance: float
    table: list[dict]
    which_theory: Theory | None = None

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "which_theory": self.which_theory.value if self.which_theory else None,
            "table": self.table,
        }


def ks_distance(
    emp: EmpiricalDistribution,
    theory_cdf: Callable[[float], float],
    which: Theory | None = None,
    lattice: bool | None = None,
) -> KSReport:
    """Kolmogorov distance between ``emp`` and a CDF ``F(x) = P(X <= x)``.

    On an integer lattice both CDFs are step functions jumping at integers,
    so the supremum is attained on ``min-1 .. max``. Otherwise the empirical
    step is compared with ``F`` at both its left and right limit.
    """
    if emp.total == 0 or emp.support.size == 0:
        raise ValueError("empty empirical distribution")
    if lattice is None:
        lattice = emp.is_lattice
    rows: list[dict] = []
    if lattice:
        cum = dict(zip(emp.support.tolist(), np.cumsum(emp.counts).tolist()))
        lo, hi = int(emp.support[0]), int(emp.support[-1])
        running = 0
        for k in range(lo - 1, hi + 1):
            running = cum.get(k, running)
            g = running / emp.total
            f = float(theory_cdf(k))
            rows.append({"x": k, "empirical_cdf": g, "theory_cdf": f, "gap": abs(g - f)})
    else:
        cum = np.cumsum(emp.counts)
        for x, c, n in zip(emp.support.tolist(), cum.tolist(), emp.counts.tolist()):
            right = c / emp.total
            left = (c - n) / emp.total
            f = float(theory_cdf(x))
            rows.append(
                {
                    "x": _jsonable(x),
                    "empirical_cdf_left": left,
                    "empirical_cdf": right,
                    "theory_cdf": f,
                    "gap": max(abs(right - f), abs(left - f)),
                }
            )
    distance = max(r["gap"] for r in rows)
    return KSReport(distance=distance, table=rows, which_theory=which)


def dkw_epsilon(s: int, delta: float) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band at level ``delta``."""
    return math.sqrt(math.log(2.0 / delta) / (2.0 * s))


# -- replication workers -----------------------------------------------------


def _longest_block(args) -> list[int]:
    seed, reps, N, T, p, source = args
    coin = CoinSpec(p)
    out = []
    for r in reps:
        rng = substream(seed, r)
        scanner = StreamScanner(T)
        for block in iter_blocks(rng, N, coin, source=source):
            scanner.feed(block)
        out.append(scanner.longest)
    return out


def _hitting_block(args) -> list[int | None]:
    seed, reps, cap, m, T, p, source = args
    coin = CoinSpec(p)
    out = []
    for r in reps:
        rng = substream(seed, r)
        scanner = StreamScanner(T, windows=[m])
        for block in iter_blocks(rng, cap, coin, source=source):
            scanner.feed(block)
            if scanner.all_hit:
                break
        out.append(scanner.hitting_time(m))
    return out


def _run_blocks(worker, make_args, s: int, workers: int) -> list:
    per = max(1, min(64, -(-s // (4 * workers))))
    chunks = [list(range(i, min(s, i + per))) for i in range(0, s, per)]
    if workers <= 1 or len(chunks) <= 1:
        parts = [worker(make_args(c)) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(worker, [make_args(c) for c in chunks]))
    return [x for part in parts for x in part]


def simulate_longest_values(config: SimulationConfig, source: BitSource | None = None) -> np.ndarray:
    """Raw longest-run lengths, one per replication, in replication order."""
    config.validate_longest()
    vals = _run_blocks(
        _longest_block,
        lambda reps: (config.seed, reps, config.N, config.T, config.coin.p, source),
        config.s,
        config.workers,
    )
    return np.asarray(vals, dtype=np.int64)


def run_longest_experiment(config: SimulationConfig, centering: str = "new", source: BitSource | None = None) -> EmpiricalDistribution:
    """Distribution of ``mu(N) - [m(N)]`` (or ``[m0(N)]`` with ``centering="old"``)."""
    mu = simulate_longest_values(config, source)
    center = _center(config, centering)
    return EmpiricalDistribution.from_samples(mu - center.integer_part)


def _center(config: SimulationConfig, which: str) -> theory.CenteringResult:
    if which == "new":
        return theory.m_center(config.N, config.T, config.coin)
    if which == "old":
        return theory.m0_center(config.N, config.T, config.coin)
    raise ValueError(f"unknown centering {which!r}")


@dataclass(frozen=True)
class HittingResult:
    distribution: EmpiricalDistribution
    scale: float
    cap: int
    censored: int
    hitting_times: np.ndarray = field(repr=False)


def run_hitting_experiment(
    config: SimulationConfig,
    refined: bool = False,
    cap_factor: float = CENSOR_MEAN_LIFETIMES,
    source: BitSource | None = None,
) -> HittingResult:
    """Scaled first hitting times ``tau_m * alpha * P(A_1)``.

    The toss budget is ``ceil(cap_factor / scale)`` (``config.N`` is not
    used); replications without a hit by then are censored and enter the
    distribution as ``inf``.
    """
    if config.m_hit is None:
        raise ConfigError("hitting experiment needs m_hit")
    m = config.m_hit
    scale = theory.tau_scale(m, config.T, config.coin, refined=refined)
    if cap_factor <= 0:
        raise ConfigError("cap_factor must be positive")
    cap = max(m, math.ceil(cap_factor / scale))
    raw = _run_blocks(
        _hitting_block,
        lambda reps: (config.seed, reps, cap, m, config.T, config.coin.p, source),
        config.s,
        config.workers,
    )
    taus = np.array([-1 if t is None else t for t in raw], dtype=np.int64)
    scaled = np.where(taus < 0, np.inf, taus * scale)
    return HittingResult(
        distribution=EmpiricalDistribution.from_samples(scaled),
        scale=scale,
        cap=cap,
        censored=int((taus < 0).sum()),
        hitting_times=taus,
    )


@dataclass(frozen=True)
class CompareResult:
    ks_new: KSReport
    ks_old: KSReport
    center_new: theory.CenteringResult
    center_old: theory.CenteringResult
    longest: np.ndarray = field(repr=False)


def lattice_cdf(strict_cdf: Callable[[int], float]) -> Callable[[int], float]:
    """Turn ``k -> P(X < k)`` into ``k -> P(X <= k)`` on the integers."""
    return lambda k: strict_cdf(int(k) + 1)


def compare_new_old(config: SimulationConfig, source: BitSource | None = None) -> CompareResult:
    """Score one simulation pass against both accompanying distributions."""
    mu = simulate_longest_values(config, source)
    N, T, coin = config.N, config.T, config.coin
    cn = theory.m_center(N, T, coin)
    co = theory.m0_center(N, T, coin)
    ks_new = ks_distance(
        EmpiricalDistribution.from_samples(mu - cn.integer_part),
        lattice_cdf(lambda k: theory.accompanying_cdf_new(k, N, T, coin)),
        which=Theory.NEW,
    )
    ks_old = ks_distance(
        EmpiricalDistribution.from_samples(mu - co.integer_part),
        lattice_cdf(lambda k: theory.accompanying_cdf_old(k, N, T, coin)),
        which=Theory.OLD,
    )
    return CompareResult(ks_new=ks_new, ks_old=ks_old, center_new=cn, center_old=co, longest=mu)
