"""Domain types and power-of-two arithmetic shared by every module."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Weight = Union[Fraction, float]


class DomainError(ValueError):
    pass


class InfeasibleClient(ValueError):
    pass


class NotPlaced(KeyError):
    pass


class UnsupportedInput(ValueError):
    """Raised by protocols restricted to the windows-scheduling special case."""


def floor_log2(x: float) -> int:
    """Exponent of the largest power of two not larger than ``x`` (x >= 1)."""
    if x < 1:
        raise DomainError(f"floor_log2 needs x >= 1, got {x!r}")
    if isinstance(x, int) or float(x).is_integer():
        return int(x).bit_length() - 1
    k = math.floor(math.log2(x))
    # log2 can land one off around exact powers
    if 2 ** (k + 1) <= x:
        k += 1
    elif 2 ** k > x:
        k -= 1
    return k


def floor_pow2(x: float) -> int:
    return 1 << floor_log2(x)


def ceil_log2(x: float) -> int:
    if x <= 0:
        raise DomainError(f"ceil_log2 needs x > 0, got {x!r}")
    if x <= 1:
        # only x == 1 is reachable from the protocols; fractions stay exact below
        k = 0
        while 2.0 ** (k - 1) >= x:
            k -= 1
        return k
    k = floor_log2(x)
    return k if 2 ** k == x else k + 1


def ceil_pow2(x: float) -> Union[int, float]:
    k = ceil_log2(x)
    return 1 << k if k >= 0 else 2.0 ** k


def is_pow2(x: float) -> bool:
    return x >= 1 and float(x).is_integer() and (int(x) & (int(x) - 1)) == 0


def inv(w: float) -> Weight:
    """1/w, exact when w is integral."""
    if isinstance(w, int) or float(w).is_integer():
        return Fraction(1, int(w))
    return 1.0 / w


def as_number(text: str) -> Union[int, float]:
    try:
        return int(text)
    except ValueError:
        return float(text)


def fmt_number(x: Union[int, float, Fraction]) -> str:
    """Round-trippable text for workload values (ints stay ints)."""
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, float) and x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


@dataclass(frozen=True)
class Client:
    """One mobile client: life interval [arrival, departure], laxity, bandwidth.

    The laxity is not required to fit inside the life interval; random
    workloads routinely produce clients that leave before a full window
    elapses, and the verifier only checks windows inside the life interval.
    """

    id: int
    arrival: int
    departure: int
    laxity: Union[int, float]
    bandwidth: Union[int, float] = 1
    capacity: Union[int, float] = 1

    def __post_init__(self):
        if self.arrival < 1:
            raise DomainError(f"client {self.id}: arrival slot must be >= 1")
        if self.departure < self.arrival:
            raise DomainError(f"client {self.id}: departs before it arrives")
        if not self.laxity > 0:
            raise DomainError(f"client {self.id}: laxity must be positive")
        if not 0 < self.bandwidth <= self.capacity:
            raise InfeasibleClient(
                f"client {self.id}: bandwidth {self.bandwidth} outside (0, {self.capacity}]"
            )

    @property
    def weight(self) -> Weight:
        return inv(self.laxity)

    @property
    def load(self) -> Weight:
        """Share of one station consumed per slot on average: (b/B)/w."""
        w = self.weight
        if isinstance(w, Fraction):
            return Fraction(self.bandwidth) / Fraction(self.capacity) * w
        return self.bandwidth / self.capacity * w

    def life(self) -> int:
        return self.departure - self.arrival + 1
