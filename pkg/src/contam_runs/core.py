"""Shared value types and error classes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ContamRunsError(Exception):
    """Base class for library errors."""


class DomainError(ContamRunsError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class SizeLimitError(ContamRunsError, ValueError):
    """A request exceeds the size an exact method can handle."""


class ConfigError(ContamRunsError, ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class CoinSpec:
    """Biased coin with heads probability ``p``.

    ``q`` is the tails probability and ``c = ln(1/p)``; logarithms in the
    centering formulas are taken in base ``1/p``.
    """

    p: float

    def __post_init__(self) -> None:
        p = self.p
        if not isinstance(p, (int, float)) or isinstance(p, bool) or not math.isfinite(p):
            raise DomainError(f"p must be a finite real, got {p!r}")
        if not 0.0 < p < 1.0:
            raise DomainError(f"p must be in (0,1), got {p}")
        object.__setattr__(self, "p", float(p))

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def c(self) -> float:
        return -math.log(self.p)


@dataclass(frozen=True)
class RunParams:
    """Contamination count ``T`` (allowed tails) and window length ``m``."""

    T: int
    m: int

    def __post_init__(self) -> None:
        if int(self.T) != self.T or self.T < 0:
            raise DomainError(f"T must be a non-negative integer, got {self.T!r}")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "m", int(self.m))


def as_bits(seq: Sequence[int] | np.ndarray) -> np.ndarray:
    """Validate a heads/tails record (1 = heads, 0 = tails) as a uint8 array."""
    arr = np.asarray(seq)
    if arr.ndim != 1:
        raise ValueError("bit sequence must be one-dimensional")
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint8)
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit sequence may contain only 0 and 1")
    return arr.astype(np.uint8, copy=False)
