"""Cost accounting, station lower bounds, ratio series and worst-case bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .core import ceil_pow2, floor_pow2, inv


def realloc_cost(laxities: Iterable[float], rho: float = 1):
    """rho * sum(1/w) over the reallocated clients."""
    total = sum((inv(w) for w in laxities), Fraction(0))
    if rho == 1:
        return total
    if isinstance(total, Fraction) and float(rho).is_integer():
        return total * int(rho)
    return float(total) * rho


def _ceil(x) -> int:
    if isinstance(x, Fraction):
        return -((-x.numerator) // x.denominator)
    # sums of floats carry noise; nudge before the ceiling
    return math.ceil(x - 1e-9)


def h_of(clients: Iterable, mode: str = "time") -> int:
    """Ceiling of total weight (``time``) or bandwidth-scaled weight (``load``)."""
    if mode == "time":
        return _ceil(sum((c.weight for c in clients), Fraction(0)))
    if mode == "load":
        return _ceil(sum((c.load for c in clients), Fraction(0)))
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class SlotRow:
    t: int
    S: int
    H_time: int
    H_load: int
    gamma: int
    R: object = 0
    D: object = 0
    ratio: Optional[object] = None
    realloc_count: int = 0
    arrivals: int = 0
    departures: int = 0
    anomaly: bool = False


class MetricsTracker:
    """Running sums for one run.

    ``D`` is the weight departed since the last reallocation; it includes the
    departures of the slot being closed and resets after any slot with R > 0.
    """

    def __init__(self, rho: float = 1):
        self.rho = rho
        self.D = Fraction(0)
        self.weight = Fraction(0)
        self.load = Fraction(0)
        self.rows: List[SlotRow] = []

    def arrived(self, client) -> None:
        self.weight += client.weight
        self.load += client.load

    def departed(self, client) -> None:
        self.weight -= client.weight
        self.load -= client.load
        self.D += client.weight

    def close_slot(self, t, S, gamma, R, realloc_count, arrivals=0, departures=0) -> SlotRow:
        row = SlotRow(t, S, _ceil(self.weight), _ceil(self.load), gamma, R, self.D,
                      realloc_count=realloc_count, arrivals=arrivals, departures=departures)
        if R > 0:
            if self.D > 0:
                row.ratio = R / self.D
            else:
                row.anomaly = True
            self.D = Fraction(0)
        self.rows.append(row)
        return row


@dataclass
class BetaStats:
    ratios: List[object] = field(default_factory=list)
    times: List[int] = field(default_factory=list)
    anomalies: List[int] = field(default_factory=list)

    @property
    def max(self):
        return max(self.ratios) if self.ratios else None

    @property
    def mean(self) -> float:
        return float(np.mean([float(r) for r in self.ratios])) if self.ratios else float("nan")

    @property
    def std(self) -> float:
        return float(np.std([float(r) for r in self.ratios])) if self.ratios else float("nan")


def beta_series(rows: Sequence[SlotRow]) -> BetaStats:
    out = BetaStats()
    for row in rows:
        if row.R > 0:
            if row.ratio is None:
                out.anomalies.append(row.t)
            else:
                out.ratios.append(row.ratio)
                out.times.append(row.t)
    return out


@dataclass
class AlphaStats:
    times: np.ndarray
    time_ratio: np.ndarray
    load_times: np.ndarray
    load_ratio: np.ndarray

    @property
    def max(self) -> float:
        return float(self.time_ratio.max()) if self.time_ratio.size else float("nan")

    def pct_below(self, threshold: float = 4.0, mode: str = "time") -> float:
        r = self.time_ratio if mode == "time" else self.load_ratio
        if not r.size:
            return float("nan")
        return 100.0 * float(np.count_nonzero(r < threshold)) / r.size


def alpha_series(rows: Sequence[SlotRow]) -> AlphaStats:
    t = np.array([r.t for r in rows], dtype=np.int64)
    S = np.array([r.S for r in rows], dtype=float)
    Ht = np.array([r.H_time for r in rows], dtype=float)
    Hl = np.array([r.H_load for r in rows], dtype=float)
    mt, ml = Ht > 0, Hl > 0
    return AlphaStats(t[mt], S[mt] / Ht[mt], t[ml], S[ml] / Hl[ml])


# ------------------------------------------------------------------- bounds

def class_beta_bound(w_low: float, w_high: float, rho: float = 1) -> float:
    """Largest R/D a single departure in class [w_low, w_high) can cause."""
    if math.isinf(w_high):
        return math.inf
    return rho * (2 * floor_pow2(w_high) / ceil_pow2(w_low) - 1)


@dataclass(frozen=True)
class Bounds:
    alpha_theorem: float
    beta_theorem: float
    alpha_corollary: Optional[float]
    beta_corollary: Optional[float]


def _log2(x: float) -> float:
    return math.log2(x)


def theorem_bounds(
    classes: Sequence,
    rho: float = 1,
    H: Optional[int] = None,
    factor=None,
    w_max: Optional[float] = None,
    w_min: Optional[float] = None,
    b_max: Optional[float] = None,
    b_min: Optional[float] = None,
    capacity: float = 1,
) -> Bounds:
    """Worst-case (alpha, beta) for the classes in use.

    ``classes`` holds (w_low, w_high, ...) tuples or ClassKeys.  ``H`` stands
    in for the optimal station count.  The closed forms per factor need the
    laxity and bandwidth extremes of the active clients.
    """
    if not classes:
        raise ValueError("need at least one class in use")
    bands = [(getattr(c, "w_low", None) or c[0], getattr(c, "w_high", None) or c[1]) for c in classes]
    w_low_max = max(lo for lo, _ in bands)
    w_high_max = max(hi for _, hi in bands)
    beta_thm = class_beta_bound(w_low_max, w_high_max, rho)
    gamma = len(set(classes))
    alpha_thm = 4 * (1 + gamma + H) / H if H else math.inf

    alpha_cor = beta_cor = None
    if factor is not None:
        from .classifier import Factor

        factor = Factor.parse(factor) if isinstance(factor, str) else factor
        if factor is Factor.CONSTANT:
            beta_cor = 3 * rho
        elif w_max is not None and factor is Factor.LOGARITHMIC:
            beta_cor = rho * (2 * _log2(w_max) - 1)
        elif w_max is not None:
            beta_cor = rho * (2 * math.sqrt(w_max) - 1)
        if None not in (w_max, w_min, b_max, b_min) and H:
            lanes = 1 + _log2(ceil_pow2(capacity / b_min) / ceil_pow2(capacity / b_max))
            fmax, fmin = floor_pow2(w_max), floor_pow2(w_min)
            if factor is Factor.CONSTANT:
                bands_term = 1 + _log2(fmax / fmin)
            elif factor is Factor.LOGARITHMIC:
                bands_term = 1 + _log2(fmax) / _log2(_log2(max(4, fmin)))
            else:
                bands_term = 1 + _log2(_log2(max(2, fmax)) / _log2(max(2, fmin)))
            alpha_cor = 4 * (1 + (1 + lanes * bands_term) / H)
    return Bounds(alpha_thm, beta_thm, alpha_cor, beta_cor)
