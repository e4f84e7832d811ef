"""Piecewise-linear demand and supply curves and their measure operations.

A demand curve gives the rate of buy interest at or above each price, a
supply curve the rate of sell interest at or below each price.  Both are
stored as breakpoint sequences spanning one closed price interval and are
evaluated by linear interpolation.  Curve increments act as measures (the
local arrival intensities of limit orders), so alongside evaluation this
module provides left-continuous inverses, interval masses, inverse-CDF
price sampling, the vertical shift used by market-maker corrections, and
the walrasian crossing point.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import InitVar, dataclass, field
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np

__all__ = [
    "AssumptionError",
    "AssumptionReport",
    "DegenerateMeasureError",
    "DemandSupplyPair",
    "Direction",
    "DomainError",
    "MonotoneCurve",
    "PriceInterval",
    "WalrasPoint",
    "check_assumptions",
    "require_core_assumptions",
    "walras",
]

_REL_TOL = 1e-12


class DomainError(ValueError):
    """An argument fell outside the price or rate domain of a curve."""


class AssumptionError(ValueError):
    """A structural assumption on the curve pair does not hold."""

    def __init__(self, label: str, message: str):
        self.label = label
        super().__init__(f"{label}: {message}")


class DegenerateMeasureError(ValueError):
    """Sampling was requested from a curve with zero total increment mass."""


class Direction(Enum):
    DECREASING = "decreasing"
    INCREASING = "increasing"


@dataclass(frozen=True)
class PriceInterval:
    """Open interval of admissible prices; endpoints act as quote fallbacks."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"empty interval: [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains_open(self, x: float) -> bool:
        return self.lo < x < self.hi

    def contains_closed(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class MonotoneCurve:
    """Weakly monotone piecewise-linear curve over a closed price span.

    ``prices`` must be strictly increasing; ``rates`` must follow
    ``direction``.  Rates are nonnegative unless ``allow_negative`` is set,
    which shifted curves use (their validity domain is the caller's
    responsibility).
    """

    prices: Tuple[float, ...]
    rates: Tuple[float, ...]
    direction: Direction
    allow_negative: InitVar[bool] = False

    # interpolation and sampling tables, derived once
    _px: np.ndarray = field(init=False, repr=False, compare=False)
    _rx: np.ndarray = field(init=False, repr=False, compare=False)
    _cum: np.ndarray = field(init=False, repr=False, compare=False)
    _price_list: list = field(init=False, repr=False, compare=False)
    _rate_list: list = field(init=False, repr=False, compare=False)
    _rev_rate_list: list = field(init=False, repr=False, compare=False)
    _cum_list: list = field(init=False, repr=False, compare=False)
    _seg_per_mass: list = field(init=False, repr=False, compare=False)

    def __post_init__(self, allow_negative: bool):
        prices = tuple(float(p) for p in self.prices)
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "rates", rates)
        if len(prices) < 2 or len(prices) != len(rates):
            raise ValueError("need matching price/rate sequences of length >= 2")
        if not all(map(math.isfinite, prices)) or not all(map(math.isfinite, rates)):
            raise ValueError("breakpoints must be finite")
        if any(b <= a for a, b in zip(prices, prices[1:])):
            raise ValueError("breakpoint prices must be strictly increasing")
        diffs = [b - a for a, b in zip(rates, rates[1:])]
        if self.direction is Direction.DECREASING:
            if any(d > 0.0 for d in diffs):
                raise AssumptionError(
                    "(A1)", "rates must be nonincreasing for a decreasing curve"
                )
        elif any(d < 0.0 for d in diffs):
            raise AssumptionError(
                "(A1)", "rates must be nondecreasing for an increasing curve"
            )
        if not allow_negative and min(rates) < 0.0:
            raise ValueError("rates must be nonnegative")

        px = np.asarray(prices, dtype=np.float64)
        rx = np.asarray(rates, dtype=np.float64)
        cum = np.abs(rx - rx[0])  # nondecreasing by monotonicity
        seg = []
        cl = cum.tolist()
        pl = px.tolist()
        for k in range(len(pl) - 1):
            dm = cl[k + 1] - cl[k]
            seg.append((pl[k + 1] - pl[k]) / dm if dm > 0.0 else 0.0)
        object.__setattr__(self, "_px", px)
        object.__setattr__(self, "_rx", rx)
        object.__setattr__(self, "_cum", cum)
        object.__setattr__(self, "_price_list", pl)
        object.__setattr__(self, "_rate_list", rx.tolist())
        object.__setattr__(self, "_rev_rate_list", rx.tolist()[::-1])
        object.__setattr__(self, "_cum_list", cl)
        object.__setattr__(self, "_seg_per_mass", seg)

    @property
    def lo(self) -> float:
        return self.prices[0]

    @property
    def hi(self) -> float:
        return self.prices[-1]

    @property
    def span(self) -> PriceInterval:
        return PriceInterval(self.lo, self.hi)

    @property
    def max_rate(self) -> float:
        return self.rates[0] if self.direction is Direction.DECREASING else self.rates[-1]

    @property
    def min_rate(self) -> float:
        return self.rates[-1] if self.direction is Direction.DECREASING else self.rates[0]

    @property
    def total_mass(self) -> float:
        """Total increment mass, |rate(hi) - rate(lo)|."""
        return float(self._cum[-1])

    def _check_price(self, x: float) -> float:
        tol = _REL_TOL * (self.hi - self.lo)
        if x < self.lo - tol or x > self.hi + tol:
            raise DomainError(f"price {x} outside [{self.lo}, {self.hi}]")
        return min(max(x, self.lo), self.hi)

    def value_at(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Linear interpolation of the rate at price(s) ``x``.

        Exact at breakpoints.  Accepts a scalar or an ndarray.
        """
        if isinstance(x, np.ndarray):
            tol = _REL_TOL * (self.hi - self.lo)
            if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
                raise DomainError("price array leaves the curve span")
            return np.interp(np.clip(x, self.lo, self.hi), self._px, self._rx)
        x = self._check_price(float(x))
        pl = self._price_list
        j = bisect_right(pl, x) - 1
        if j < 0:
            j = 0
        elif j >= len(pl) - 1:
            j = len(pl) - 2
        rl = self._rate_list
        if x == pl[j]:
            return rl[j]
        if x == pl[j + 1]:
            return rl[j + 1]
        t = (x - pl[j]) / (pl[j + 1] - pl[j])
        return rl[j] + t * (rl[j + 1] - rl[j])

    def _check_level(self, v: float) -> None:
        tol = _REL_TOL * max(1.0, abs(self.max_rate))
        if v < -tol or v > self.max_rate + tol:
            raise DomainError(f"rate level {v} outside [0, {self.max_rate}]")

    def inverse(self, v: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Left-continuous generalized inverse at rate level ``v``.

        For a decreasing curve this is sup{x : rate(x) >= v}; for an
        increasing curve inf{x : rate(x) >= v}.  Levels above the maximum
        rate raise :class:`DomainError`.
        """
        if isinstance(v, np.ndarray):
            return self._inverse_array(v)
        v = float(v)
        self._check_level(v)
        pl = self._price_list
        rl = self._rate_list
        n = len(pl)
        if self.direction is Direction.DECREASING:
            if v <= rl[-1]:
                return pl[-1]
            k = bisect_left(self._rev_rate_list, v)
            j = n - 1 - k  # rightmost index with rate >= v
            hi_r = rl[j]
            return pl[j] + (hi_r - v) / (hi_r - rl[j + 1]) * (pl[j + 1] - pl[j])
        if v <= rl[0]:
            return pl[0]
        k = bisect_left(rl, v)  # leftmost index with rate >= v
        if k >= n:
            k = n - 1
        lo_r = rl[k - 1]
        return pl[k - 1] + (v - lo_r) / (rl[k] - lo_r) * (pl[k] - pl[k - 1])

    def _inverse_array(self, v: np.ndarray) -> np.ndarray:
        tol = _REL_TOL * max(1.0, abs(self.max_rate))
        if np.any(v < -tol) or np.any(v > self.max_rate + tol):
            raise DomainError("rate level array leaves [0, max_rate]")
        rx, px = self._rx, self._px
        n = len(px)
        if self.direction is Direction.DECREASING:
            rev = rx[::-1]
            k = np.searchsorted(rev, v, side="left")
            j = np.clip(n - 1 - k, 0, n - 2)
            hi_r = rx[j]
            dr = hi_r - rx[j + 1]
            frac = np.where(dr > 0.0, (hi_r - v) / np.where(dr > 0.0, dr, 1.0), 0.0)
            x = px[j] + frac * (px[j + 1] - px[j])
            return np.where(v <= rx[-1], px[-1], x)
        k = np.clip(np.searchsorted(rx, v, side="left"), 1, n - 1)
        lo_r = rx[k - 1]
        dr = rx[k] - lo_r
        frac = np.where(dr > 0.0, (v - lo_r) / np.where(dr > 0.0, dr, 1.0), 0.0)
        x = px[k - 1] + frac * (px[k] - px[k - 1])
        return np.where(v <= rx[0], px[0], x)

    def increment_mass(self, a: float, b: float) -> float:
        """Mass the curve increment assigns to [a, b]: |rate(b) - rate(a)|."""
        if b < a:
            raise ValueError(f"inverted mass interval [{a}, {b}]")
        return abs(self.value_at(b) - self.value_at(a))

    def sample_limit_price(self, u: float) -> float:
        """Quantile ``u`` of the normalized increment measure.

        Returns the smallest price whose cumulative increment mass reaches
        ``u * total_mass``; monotone in ``u``.
        """
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"quantile argument {u} outside [0, 1]")
        total = self._cum_list[-1]
        if total <= 0.0:
            raise DegenerateMeasureError("curve has zero total increment mass")
        return self.sample_from_target(u * total)

    def sample_from_target(self, target: float) -> float:
        """Price at cumulative increment mass ``target``; the engine hot loop
        inlines this exact arithmetic, keep the two in lockstep."""
        cl = self._cum_list
        j = bisect_left(cl, target)
        if j == 0:
            return self._price_list[0]
        jm = j - 1
        return self._price_list[jm] + (target - cl[jm]) * self._seg_per_mass[jm]


@dataclass(frozen=True)
class DemandSupplyPair:
    """A decreasing demand curve and an increasing supply curve on one span.

    Construction validates monotone directions, matching spans, strictly
    increasing supply-minus-demand (on every merged segment), and, unless
    ``check_positive`` is disabled (shifted pairs), positivity of both
    curves on the open interval.
    """

    demand: MonotoneCurve
    supply: MonotoneCurve
    check_positive: InitVar[bool] = True

    def __post_init__(self, check_positive: bool):
        if self.demand.direction is not Direction.DECREASING:
            raise AssumptionError("(A1)", "demand curve must be nonincreasing")
        if self.supply.direction is not Direction.INCREASING:
            raise AssumptionError("(A1)", "supply curve must be nondecreasing")
        if (self.demand.lo, self.demand.hi) != (self.supply.lo, self.supply.hi):
            raise ValueError("demand and supply must span the same interval")
        bad = _a3_violation(self.demand, self.supply)
        if bad is not None:
            raise AssumptionError(
                "(A3)", f"supply minus demand not strictly increasing near x={bad}"
            )
        if check_positive:
            bad = _a4_violation(self.demand, self.supply)
            if bad is not None:
                raise AssumptionError(
                    "(A4)", f"curve not positive on the open interval near x={bad}"
                )

    @property
    def interval(self) -> PriceInterval:
        return PriceInterval(self.demand.lo, self.demand.hi)

    def shifted(self, rho: float) -> "DemandSupplyPair":
        """Both curves lowered by ``rho`` (market-maker correction).

        The result may take negative rates; callers restrict attention to
        the region where the shifted curves stay positive.
        """
        if rho < 0.0:
            raise ValueError("shift amount must be nonnegative")
        return DemandSupplyPair(
            MonotoneCurve(
                self.demand.prices,
                tuple(r - rho for r in self.demand.rates),
                Direction.DECREASING,
                allow_negative=True,
            ),
            MonotoneCurve(
                self.supply.prices,
                tuple(r - rho for r in self.supply.rates),
                Direction.INCREASING,
                allow_negative=True,
            ),
            check_positive=False,
        )


def _merged_breakpoints(demand: MonotoneCurve, supply: MonotoneCurve) -> list:
    pts = sorted(set(demand.prices) | set(supply.prices))
    return pts

def _a3_violation(demand: MonotoneCurve, supply: MonotoneCurve):
    """Leftmost merged segment whose supply-demand slope gap is not positive."""
    pts = _merged_breakpoints(demand, supply)
    for a, b in zip(pts, pts[1:]):
        sd = (demand.value_at(b) - demand.value_at(a)) / (b - a)
        ss = (supply.value_at(b) - supply.value_at(a)) / (b - a)
        if not ss - sd > 0.0:
            return a
    return None


def _a4_violation(demand: MonotoneCurve, supply: MonotoneCurve):
    """A point of the open interval where either curve fails positivity.

    Piecewise-linear curves attain interior minima at breakpoints or
    arbitrarily near the endpoints, so checking merged breakpoints plus
    slightly shrunk endpoints is exhaustive.
    """
    lo, hi = demand.lo, demand.hi
    eps = 1e-9 * (hi - lo)
    probes = [lo + eps, hi - eps] + [p for p in _merged_breakpoints(demand, supply) if lo < p < hi]
    for x in probes:
        if demand.value_at(x) <= 0.0 or supply.value_at(x) <= 0.0:
            return x
    return None


@dataclass(frozen=True)
class WalrasPoint:
    """Crossing of demand and supply: maximizer of min(demand, supply).

    ``x`` is the leftmost maximizer, ``x_hi`` the rightmost; the flag is
    set when the two agree (strict monotonicity through the crossing).
    """

    x: float
    volume: float
    unique: bool
    x_hi: float


def walras(pair: DemandSupplyPair, tol: float = 1e-12) -> WalrasPoint:
    """Walrasian point of the pair: price and volume where the curves cross.

    The crossing of supply minus demand is bracketed by bisection; when the
    curves never cross inside the span, the matching endpoint is used.  The
    volume is the largest value of min(demand, supply) over the closed span.
    """
    _require_a1_a4(pair)
    demand, supply = pair.demand, pair.supply
    lo, hi = demand.lo, demand.hi
    g_lo = supply.value_at(lo) - demand.value_at(lo)
    g_hi = supply.value_at(hi) - demand.value_at(hi)
    if g_lo >= 0.0:
        volume = min(demand.value_at(lo), supply.value_at(lo))
    elif g_hi <= 0.0:
        volume = min(demand.value_at(hi), supply.value_at(hi))
    else:
        a, b = lo, hi
        while b - a > tol:
            m = 0.5 * (a + b)
            if supply.value_at(m) - demand.value_at(m) < 0.0:
                a = m
            else:
                b = m
        m = 0.5 * (a + b)
        volume = min(demand.value_at(m), supply.value_at(m))
    x_left = supply.inverse(min(volume, supply.max_rate))
    x_right = demand.inverse(min(volume, demand.max_rate))
    plateau_tol = 1e-9 * (hi - lo)
    return WalrasPoint(x_left, volume, (x_right - x_left) <= plateau_tol, x_right)


def require_core_assumptions(pair: DemandSupplyPair) -> None:
    """Raise unless (A1)-(A4) hold.  (A1)-(A3) are construction invariants;
    (A4) can fail for pairs built with check_positive=False."""
    bad = _a4_violation(pair.demand, pair.supply)
    if bad is not None:
        raise AssumptionError("(A4)", f"curve not positive on the open interval near x={bad}")


_require_a1_a4 = require_core_assumptions


@dataclass(frozen=True)
class AssumptionReport:
    """Which structural assumptions a curve pair satisfies.

    a1: monotone directions; a2: continuity; a3: supply minus demand
    strictly increasing; a4: positivity on the open interval; a5: walrasian
    volume below the volume ceiling min(demand(lo), supply(hi)); a6: strict
    monotonicity of each curve on every segment.
    """

    a1: bool
    a2: bool
    a3: bool
    a4: bool
    a5: bool
    a6: bool
    failures: Tuple[str, ...]
    v_w: float
    v_max: float

    @property
    def core(self) -> bool:
        """(A1) through (A4), required by every consumer."""
        return self.a1 and self.a2 and self.a3 and self.a4


def check_assumptions(pair: DemandSupplyPair) -> AssumptionReport:
    """Evaluate assumptions (A1)-(A6) on the pair and report the failures."""
    demand, supply = pair.demand, pair.supply
    failures = []
    a1 = (
        demand.direction is Direction.DECREASING
        and supply.direction is Direction.INCREASING
    )
    if not a1:
        failures.append("(A1) monotone directions")
    a2 = True  # piecewise-linear interpolation is continuous by construction
    a3 = _a3_violation(demand, supply) is None
    if not a3:
        failures.append("(A3) supply minus demand strictly increasing")
    a4 = _a4_violation(demand, supply) is None
    if not a4:
        failures.append("(A4) positivity on the open interval")
    v_max = min(demand.value_at(demand.lo), supply.value_at(supply.hi))
    if a1 and a3 and a4:
        v_w = walras(pair).volume
        a5 = v_w < v_max
    else:
        v_w = math.nan
        a5 = False
    if not a5:
        failures.append("(A5) walrasian volume below the volume ceiling")
    a6 = _strictly_monotone(demand) and _strictly_monotone(supply)
    if not a6:
        failures.append("(A6) strict monotonicity")
    return AssumptionReport(a1, a2, a3, a4, a5, a6, tuple(failures), v_w, v_max)


def _strictly_monotone(curve: MonotoneCurve) -> bool:
    return all(b != a for a, b in zip(curve.rates, curve.rates[1:]))
