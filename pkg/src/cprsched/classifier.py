"""Client classes: laxity band times bandwidth lane count."""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field
from typing import List, Tuple

from .core import DomainError, InfeasibleClient, ceil_log2, floor_pow2


class Factor(str, enum.Enum):
    CONSTANT = "constant"
    LOGARITHMIC = "log"
    LINEAR = "linear"

    @classmethod
    def parse(cls, text: str) -> "Factor":
        aliases = {"const": "constant", "logarithmic": "log", "lin": "linear"}
        return cls(aliases.get(text, text))


def _step(factor: Factor, w: float) -> float:
    if factor is Factor.CONSTANT:
        return 2 * w
    if factor is Factor.LOGARITHMIC:
        return w * math.log2(w)
    return w * w


class _Chain:
    """Band boundaries of one factor, grown on demand.

    Readers never see a half-built list: extension happens under a lock and
    only appends.
    """

    def __init__(self, factor: Factor):
        self.factor = factor
        self.bounds: List[float] = [1, 2, 4]
        self._lock = threading.Lock()

    def cover(self, x: float) -> None:
        if self.bounds[-1] > x:
            return
        with self._lock:
            while self.bounds[-1] <= x:
                self.bounds.append(_step(self.factor, self.bounds[-1]))


_CHAINS = {f: _Chain(f) for f in Factor}


def laxity_class(w: float, factor: Factor) -> Tuple[float, float]:
    """Return the half-open band [w_low, w_high) holding floor_pow2(w)."""
    if w < 1:
        raise DomainError(f"laxity must be >= 1, got {w!r}")
    factor = Factor.parse(factor) if isinstance(factor, str) else factor
    fw = floor_pow2(w)
    if fw < 2:
        return (1, 2)
    if fw < 4:
        return (2, 4)
    chain = _CHAINS[factor]
    chain.cover(fw)
    bounds = chain.bounds
    # first boundary index is 2 (w=4): walk like the while-loop in the pseudocode
    i = 2
    while fw >= bounds[i + 1]:
        i += 1
    return (bounds[i], bounds[i + 1])


def bandwidth_lanes(b: float, capacity: float = 1) -> int:
    if not 0 < b <= capacity:
        raise InfeasibleClient(f"bandwidth {b!r} outside (0, {capacity!r}]")
    return floor_pow2(capacity / b)


@dataclass(frozen=True, order=True)
class ClassKey:
    w_low: float
    w_high: float
    lanes: int
    capacity: float = field(default=1, compare=False)

    def __post_init__(self):
        if not self.w_low < self.w_high:
            raise DomainError("class band must satisfy w_low < w_high")

    @property
    def lane_bandwidth(self) -> float:
        return self.capacity / self.lanes

    @property
    def root_exp(self) -> int:
        """log2 of the anchor count per lane (conceptual depth of subtree roots)."""
        return ceil_log2(self.w_low)

    @property
    def anchors_per_lane(self) -> int:
        return 1 << self.root_exp

    @property
    def label(self) -> str:
        return f"{self.w_low!r}:{self.w_high!r}:{self.lanes}"


def class_key(client, factor: Factor, capacity: float = 1) -> ClassKey:
    lo, hi = laxity_class(client.laxity, factor)
    return ClassKey(lo, hi, bandwidth_lanes(client.bandwidth, capacity), capacity)
