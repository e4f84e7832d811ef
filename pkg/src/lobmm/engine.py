"""Event-driven simulation of the order book model.

Events arrive in one merged Poisson stream whose component rates never
depend on the book state: market buys and sells at the curve values at the
far endpoints, limit orders at the total curve increment masses with
prices drawn from the normalized increments, and market makers at a flat
rate.  Consequently a run is a deterministic function of the seed: waits
and uniforms are consumed in a fixed order from one counter-based
generator (Philox), block-buffered for speed.

The run loop inlines the book transitions and the limit-price sampler.
Both have slow-path twins (:meth:`OrderBook.apply`,
:meth:`MonotoneCurve.sample_limit_price`, :func:`next_event`,
:func:`restrict_event`) and the test-suite pins the two paths to each
other event by event; change them in lockstep.
"""

from __future__ import annotations

import math
import os
from array import array
from bisect import bisect_left
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from heapq import heappop, heappush
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .book import BookSnapshot, Event, EventKind, OrderBook
from .curves import (
    DemandSupplyPair,
    PriceInterval,
    require_core_assumptions,
)

__all__ = [
    "DROPPED",
    "BlockRng",
    "DiscreteMap",
    "FreezeReport",
    "InsufficientDataError",
    "InvalidMapError",
    "RateTable",
    "ReplicaStats",
    "SimConfig",
    "Trajectory",
    "TrajectorySummary",
    "WindowEstimate",
    "detect_freeze",
    "estimate_window",
    "generator_for",
    "image_book",
    "next_event",
    "restrict_event",
    "run",
    "run_ensemble",
]

# kind code recorded when the restriction policy swallows a limit order
DROPPED = 5

_BLOCK = 1 << 16


class InsufficientDataError(RuntimeError):
    """A post-burn-in estimate was requested from an empty sample."""


class InvalidMapError(ValueError):
    """A discrete map broke monotonicity or the non-crossing property."""


def generator_for(seed: int, replica: int = 0) -> np.random.Generator:
    """Counter-based generator for one replica; streams never collide."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replica,)))
    )


class BlockRng:
    """Block-buffered exponential and uniform draws from one generator.

    Values are identical to drawing one block at a time from the wrapped
    generator, so any two consumers making the same sequence of calls see
    the same stream.
    """

    __slots__ = ("generator", "_exp", "_exp_i", "_uni", "_uni_i")

    def __init__(self, generator: np.random.Generator):
        self.generator = generator
        self._exp = generator.standard_exponential(_BLOCK).tolist()
        self._exp_i = 0
        self._uni = generator.random(_BLOCK).tolist()
        self._uni_i = 0

    def next_exp(self) -> float:
        i = self._exp_i
        if i == _BLOCK:
            self._exp = self.generator.standard_exponential(_BLOCK).tolist()
            i = 0
        self._exp_i = i + 1
        return self._exp[i]

    def next_uniform(self) -> float:
        i = self._uni_i
        if i == _BLOCK:
            self._uni = self.generator.random(_BLOCK).tolist()
            i = 0
        self._uni_i = i + 1
        return self._uni[i]


@dataclass(frozen=True)
class RateTable:
    """Arrival rates of the five event kinds; constant over a run."""

    buy_market: float
    sell_market: float
    buy_limit: float
    sell_limit: float
    market_maker: float
    total: float
    inv_total: float
    # cumulative kind-selection thresholds on a uniform draw
    thresholds: Tuple[float, float, float, float]

    @classmethod
    def from_pair(cls, pair: DemandSupplyPair, rho: float = 0.0) -> "RateTable":
        if rho < 0.0 or not math.isfinite(rho):
            raise ValueError("market maker rate must be finite and nonnegative")
        bm = pair.demand.rates[-1]
        sm = pair.supply.rates[0]
        bl = pair.demand.total_mass
        sl = pair.supply.total_mass
        total = bm + sm + bl + sl + rho
        if not total > 0.0:
            raise ValueError("total event rate must be positive")
        inv = 1.0 / total
        thresholds = (
            bm * inv,
            (bm + sm) * inv,
            (bm + sm + bl) * inv,
            (bm + sm + bl + sl) * inv,
        )
        return cls(bm, sm, bl, sl, rho, total, inv, thresholds)


@dataclass(frozen=True)
class SimConfig:
    """One run: model, horizon, seed, and measurement settings.

    Exactly one of ``events`` (event-count horizon) and ``duration``
    (model-time horizon) must be set.  ``restriction`` converts limit
    orders outside the window into market orders or no-ops.  ``replica``
    selects an independent stream under the same seed.
    """

    pair: DemandSupplyPair
    rho: float = 0.0
    events: Optional[int] = None
    duration: Optional[float] = None
    seed: int = 0
    replica: int = 0
    restriction: Optional[PriceInterval] = None
    burn_in: float = 0.5
    snapshot_at: Tuple[int, ...] = ()
    initial_buys: Tuple[float, ...] = ()
    initial_sells: Tuple[float, ...] = ()
    cdf_grid_size: int = 1024

    def __post_init__(self):
        if (self.events is None) == (self.duration is None):
            raise ValueError("set exactly one of events= and duration=")
        if self.events is not None and self.events < 0:
            raise ValueError("events horizon must be nonnegative")
        if self.duration is not None and not self.duration > 0.0:
            raise ValueError("duration horizon must be positive")
        if not 0.0 <= self.burn_in < 1.0:
            raise ValueError("burn_in must lie in [0, 1)")
        if self.rho < 0.0 or not math.isfinite(self.rho):
            raise ValueError("rho must be finite and nonnegative")
        if self.cdf_grid_size < 2:
            raise ValueError("cdf_grid_size must be at least 2")
        iv = self.pair.interval
        if self.restriction is not None:
            r = self.restriction
            if not (iv.lo <= r.lo < r.hi <= iv.hi):
                raise ValueError("restriction window must sit inside the price interval")
        object.__setattr__(self, "snapshot_at", tuple(sorted(set(int(k) for k in self.snapshot_at))))
        if self.snapshot_at and self.snapshot_at[0] < 0:
            raise ValueError("snapshot indices must be nonnegative")
        object.__setattr__(self, "initial_buys", tuple(float(p) for p in self.initial_buys))
        object.__setattr__(self, "initial_sells", tuple(float(p) for p in self.initial_sells))


@dataclass(frozen=True)
class TrajectorySummary:
    trade_count: int
    final_buys: int
    final_sells: int
    empty_book_transitions: int
    empty_buy_prob: float
    empty_sell_prob: float
    cdf_grid: np.ndarray
    bid_cdf: np.ndarray
    ask_survival: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Per-event series of one run plus post-burn-in summaries.

    ``kinds`` holds :class:`EventKind` values, or 5 for a limit order the
    restriction policy dropped.  ``trade_prices`` is NaN for non-trades.
    State ``i`` (``bids[i]``, ``asks[i]``) holds on ``[times[i],
    times[i+1])``; summaries weight it accordingly.
    """

    config: SimConfig
    n_events: int
    end_time: float
    times: np.ndarray
    kinds: np.ndarray
    trade_prices: np.ndarray
    bids: np.ndarray
    asks: np.ndarray
    summary: TrajectorySummary
    final_book: OrderBook
    snapshots: Dict[int, BookSnapshot]

    @property
    def burn_index(self) -> int:
        return int(self.config.burn_in * self.n_events)


def next_event(rates: RateTable, pair: DemandSupplyPair, rng: BlockRng) -> Tuple[float, Optional[Event]]:
    """Draw the next waiting time and event.

    Consumes one exponential, one uniform, and one more uniform for limit
    kinds, in that order; the run loop consumes identically.
    """
    wait = rng.next_exp() * rates.inv_total
    u = rng.next_uniform()
    c_bm, c_sm, c_bl, c_sl = rates.thresholds
    if u < c_bm:
        return wait, Event(EventKind.BUY_MARKET)
    if u < c_sm:
        return wait, Event(EventKind.SELL_MARKET)
    if u < c_bl:
        price = _draw_price(pair.demand, rng.next_uniform(), pair.interval)
        return wait, Event(EventKind.BUY_LIMIT, price)
    if u < c_sl:
        price = _draw_price(pair.supply, rng.next_uniform(), pair.interval)
        return wait, Event(EventKind.SELL_LIMIT, price)
    return wait, Event(EventKind.MARKET_MAKER)


def _draw_price(curve, u: float, interval: PriceInterval) -> float:
    # boundary draws (probability ~2**-53) are nudged strictly inside
    x = curve.sample_from_target(u * curve._cum_list[-1])
    if x <= interval.lo:
        return math.nextafter(interval.lo, interval.hi)
    if x >= interval.hi:
        return math.nextafter(interval.hi, interval.lo)
    return x


def restrict_event(event: Event, window: PriceInterval) -> Optional[Event]:
    """Map a full-interval event to the window-restricted model.

    Limit orders at or beyond the far edge become market orders; at or
    behind the near edge they vanish (None).  Everything else passes
    through unchanged.
    """
    kind = event.kind
    if kind is EventKind.BUY_LIMIT:
        if event.price >= window.hi:
            return Event(EventKind.BUY_MARKET)
        if event.price <= window.lo:
            return None
        return event
    if kind is EventKind.SELL_LIMIT:
        if event.price <= window.lo:
            return Event(EventKind.SELL_MARKET)
        if event.price >= window.hi:
            return None
        return event
    return event


def run(config: SimConfig) -> Trajectory:
    """Simulate one trajectory; deterministic in (seed, replica).

    The loop below mirrors next_event + restrict_event + OrderBook.apply
    exactly (same draws, same comparisons, same arithmetic) with the
    object layers peeled off.
    """
    pair = config.pair
    require_core_assumptions(pair)
    rates = RateTable.from_pair(pair, config.rho)
    c_bm, c_sm, c_bl, c_sl = rates.thresholds
    inv_total = rates.inv_total

    demand, supply = pair.demand, pair.supply
    dprices, dcum, dseg = demand._price_list, demand._cum_list, demand._seg_per_mass
    sprices, scum, sseg = supply._price_list, supply._cum_list, supply._seg_per_mass
    d_total = dcum[-1]
    s_total = scum[-1]

    iv = pair.interval
    lo, hi = iv.lo, iv.hi
    lo_in = math.nextafter(lo, hi)
    hi_in = math.nextafter(hi, lo)
    restricted = config.restriction is not None
    j_lo = config.restriction.lo if restricted else 0.0
    j_hi = config.restriction.hi if restricted else 0.0

    book = OrderBook(iv, config.initial_buys, config.initial_sells)
    buys, sells = book.buy_counts, book.sell_counts
    bh, sh = book.buy_heap, book.sell_heap
    nb, ns = book.n_buys, book.n_sells

    rng = BlockRng(generator_for(config.seed, config.replica))
    gen_exp = rng.generator.standard_exponential
    gen_uni = rng.generator.random
    exp_buf, exp_i = rng._exp, rng._exp_i
    uni_buf, uni_i = rng._uni, rng._uni_i
    push, pop = heappush, heappop

    times_a = array("d")
    kinds_a = array("B")
    tp_a = array("d")
    bids_a = array("d")
    asks_a = array("d")
    t_ap, k_ap, tp_ap = times_a.append, kinds_a.append, tp_a.append
    b_ap, a_ap = bids_a.append, asks_a.append

    snapshots: Dict[int, BookSnapshot] = {}
    snap_queue = list(config.snapshot_at)
    if snap_queue and snap_queue[0] == 0:
        snapshots[0] = book.snapshot()
        snap_queue.pop(0)
    next_snap = snap_queue[0] if snap_queue else -1
    snap_pos = 0

    n_target = config.events if config.events is not None else -1
    t_limit = config.duration if config.duration is not None else math.inf

    t = 0.0
    trades = 0
    empties = 0
    was_empty = nb == 0 and ns == 0
    nan = math.nan
    i = 0
    while True:
        if i == n_target:
            break
        if exp_i == _BLOCK:
            exp_buf = gen_exp(_BLOCK).tolist()
            exp_i = 0
        wait = exp_buf[exp_i] * inv_total
        exp_i += 1
        if t + wait > t_limit:
            break
        t += wait
        if uni_i == _BLOCK:
            uni_buf = gen_uni(_BLOCK).tolist()
            uni_i = 0
        u = uni_buf[uni_i]
        uni_i += 1
        tp = nan
        if u < c_bl:
            if u < c_sm:
                if u < c_bm:
                    kind = 0  # market buy lifts the ask
                    if sh:
                        p = sh[0]
                        c = sells[p]
                        if c == 1:
                            del sells[p]
                            pop(sh)
                        else:
                            sells[p] = c - 1
                        ns -= 1
                        trades += 1
                        tp = p
                else:
                    kind = 1  # market sell hits the bid
                    if bh:
                        p = -bh[0]
                        c = buys[p]
                        if c == 1:
                            del buys[p]
                            pop(bh)
                        else:
                            buys[p] = c - 1
                        nb -= 1
                        trades += 1
                        tp = p
            else:
                kind = 2  # buy limit
                if uni_i == _BLOCK:
                    uni_buf = gen_uni(_BLOCK).tolist()
                    uni_i = 0
                u2 = uni_buf[uni_i]
                uni_i += 1
                target = u2 * d_total
                j = bisect_left(dcum, target)
                if j == 0:
                    x = dprices[0]
                else:
                    jm = j - 1
                    x = dprices[jm] + (target - dcum[jm]) * dseg[jm]
                if x <= lo:
                    x = lo_in
                elif x >= hi:
                    x = hi_in
                if restricted and x >= j_hi:
                    kind = 0  # rewritten to a market buy
                    if sh:
                        p = sh[0]
                        c = sells[p]
                        if c == 1:
                            del sells[p]
                            pop(sh)
                        else:
                            sells[p] = c - 1
                        ns -= 1
                        trades += 1
                        tp = p
                elif restricted and x <= j_lo:
                    kind = DROPPED
                elif sh and x >= sh[0]:
                    p = sh[0]
                    c = sells[p]
                    if c == 1:
                        del sells[p]
                        pop(sh)
                    else:
                        sells[p] = c - 1
                    ns -= 1
                    trades += 1
                    tp = p
                else:
                    c = buys.get(x)
                    if c is None:
                        buys[x] = 1
                        push(bh, -x)
                    else:
                        buys[x] = c + 1
                    nb += 1
        elif u < c_sl:
            kind = 3  # sell limit
            if uni_i == _BLOCK:
                uni_buf = gen_uni(_BLOCK).tolist()
                uni_i = 0
            u2 = uni_buf[uni_i]
            uni_i += 1
            target = u2 * s_total
            j = bisect_left(scum, target)
            if j == 0:
                x = sprices[0]
            else:
                jm = j - 1
                x = sprices[jm] + (target - scum[jm]) * sseg[jm]
            if x <= lo:
                x = lo_in
            elif x >= hi:
                x = hi_in
            if restricted and x <= j_lo:
                kind = 1  # rewritten to a market sell
                if bh:
                    p = -bh[0]
                    c = buys[p]
                    if c == 1:
                        del buys[p]
                        pop(bh)
                    else:
                        buys[p] = c - 1
                    nb -= 1
                    trades += 1
                    tp = p
            elif restricted and x >= j_hi:
                kind = DROPPED
            elif bh and x <= -bh[0]:
                p = -bh[0]
                c = buys[p]
                if c == 1:
                    del buys[p]
                    pop(bh)
                else:
                    buys[p] = c - 1
                nb -= 1
                trades += 1
                tp = p
            else:
                c = sells.get(x)
                if c is None:
                    sells[x] = 1
                    push(sh, x)
                else:
                    sells[x] = c + 1
                ns += 1
        else:
            kind = 4  # market maker reinforces both quotes
            if bh:
                p = -bh[0]
                buys[p] += 1
                nb += 1
            if sh:
                p = sh[0]
                sells[p] += 1
                ns += 1
        bid = -bh[0] if bh else lo
        ask = sh[0] if sh else hi
        t_ap(t)
        k_ap(kind)
        tp_ap(tp)
        b_ap(bid)
        a_ap(ask)
        if nb == 0 and ns == 0:
            if not was_empty:
                empties += 1
                was_empty = True
        else:
            was_empty = False
        i += 1
        if i == next_snap:
            book.n_buys, book.n_sells = nb, ns
            snapshots[i] = book.snapshot()
            snap_pos += 1
            next_snap = snap_queue[snap_pos] if snap_pos < len(snap_queue) else -1

    book.n_buys, book.n_sells = nb, ns
    n = i
    times = np.frombuffer(times_a, dtype=np.float64) if n else np.empty(0)
    kinds = np.frombuffer(kinds_a, dtype=np.uint8) if n else np.empty(0, dtype=np.uint8)
    tps = np.frombuffer(tp_a, dtype=np.float64) if n else np.empty(0)
    bids = np.frombuffer(bids_a, dtype=np.float64) if n else np.empty(0)
    asks = np.frombuffer(asks_a, dtype=np.float64) if n else np.empty(0)
    for arr in (times, kinds, tps, bids, asks):
        arr.flags.writeable = False

    end_time = t if config.duration is None else config.duration
    summary = _summarize(config, n, end_time, times, bids, asks, trades, book, empties)
    return Trajectory(
        config, n, end_time, times, kinds, tps, bids, asks, summary, book, snapshots
    )


def _state_weights(times: np.ndarray, end_time: float, lo_idx: int) -> np.ndarray:
    """Occupation time of each post-event state from ``lo_idx`` on."""
    tail = times[lo_idx:]
    if len(tail) == 0:
        return np.empty(0)
    w = np.empty(len(tail))
    w[:-1] = np.diff(tail)
    w[-1] = max(end_time - tail[-1], 0.0)
    return w


def _weighted_cdf(values: np.ndarray, weights: np.ndarray, grid: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    sv = values[order]
    cw = np.cumsum(weights[order])
    total = cw[-1]
    idx = np.searchsorted(sv, grid, side="right")
    out = np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0)
    return out / total


def _weighted_survival(values: np.ndarray, weights: np.ndarray, grid: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    sv = values[order]
    cw = np.cumsum(weights[order])
    total = cw[-1]
    idx = np.searchsorted(sv, grid, side="left")  # count strictly below
    below = np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0)
    return (total - below) / total


def _summarize(config, n, end_time, times, bids, asks, trades, book, empties) -> TrajectorySummary:
    iv = config.restriction if config.restriction is not None else config.pair.interval
    grid = np.linspace(iv.lo, iv.hi, config.cdf_grid_size)
    lo, hi = config.pair.interval.lo, config.pair.interval.hi
    k0 = int(config.burn_in * n)
    if n == 0 or k0 >= n:
        empty = np.full(config.cdf_grid_size, math.nan)
        return TrajectorySummary(
            trades, book.n_buys, book.n_sells, empties, math.nan, math.nan, grid, empty, empty
        )
    w = _state_weights(times, end_time, k0)
    if not w.sum() > 0.0:
        w = np.ones(n - k0)  # zero-length occupation (single event), fall back to counts
    b = bids[k0:]
    a = asks[k0:]
    total = w.sum()
    empty_buy = float(w[b == lo].sum() / total)
    empty_sell = float(w[a == hi].sum() / total)
    b_eff = np.clip(b, iv.lo, iv.hi)
    a_eff = np.clip(a, iv.lo, iv.hi)
    bid_cdf = _weighted_cdf(b_eff, w, grid)
    ask_surv = _weighted_survival(a_eff, w, grid)
    return TrajectorySummary(
        trades, book.n_buys, book.n_sells, empties, empty_buy, empty_sell, grid, bid_cdf, ask_surv
    )


@dataclass(frozen=True)
class WindowEstimate:
    """Extreme quotes over the post-burn-in window (bid floor, ask cap)."""

    lo: float
    hi: float
    n_bid_samples: int
    n_ask_samples: int


def estimate_window(traj: Trajectory) -> WindowEstimate:
    """Smallest observed bid and largest observed ask, where the side rests.

    A finite run visits the window edges rarely, so the estimate sits
    inside the true window; treat it as an inner bound.
    """
    k0 = traj.burn_index
    lo = traj.config.pair.interval.lo
    hi = traj.config.pair.interval.hi
    b = traj.bids[k0:]
    a = traj.asks[k0:]
    rb = b[b > lo]
    ra = a[a < hi]
    if len(rb) == 0 or len(ra) == 0:
        raise InsufficientDataError("no resting quotes after burn-in")
    return WindowEstimate(float(rb.min()), float(ra.max()), len(rb), len(ra))


@dataclass(frozen=True)
class FreezeReport:
    t_freeze: float
    midpoint: float
    start_index: int
    eps: float
    window: int


def detect_freeze(
    traj: Trajectory, eps: Optional[float] = None, window: Optional[int] = None
) -> Optional[FreezeReport]:
    """Earliest time from which both quotes settle within ``eps``.

    The stable suffix must satisfy spread <= eps throughout, with bid and
    ask each moving at most eps, and span at least ``window`` events.
    Defaults: eps is 1% of the interval length, window 10% of the events.
    Returns None when no such suffix exists.
    """
    n = traj.n_events
    if n == 0:
        return None
    if eps is None:
        eps = 0.01 * traj.config.pair.interval.length
    if window is None:
        window = max(1, int(0.1 * n))
    bids, asks = traj.bids, traj.asks
    rev_spread = (asks - bids)[::-1]
    suffix_spread_ok = np.maximum.accumulate(rev_spread)[::-1] <= eps
    rb_max = np.maximum.accumulate(bids[::-1])[::-1]
    rb_min = np.minimum.accumulate(bids[::-1])[::-1]
    ra_max = np.maximum.accumulate(asks[::-1])[::-1]
    ra_min = np.minimum.accumulate(asks[::-1])[::-1]
    cond = suffix_spread_ok & (rb_max - rb_min <= eps) & (ra_max - ra_min <= eps)
    if not cond[-1]:
        return None
    k = int(np.argmax(cond))  # first index of the maximal stable suffix
    if n - k < window:
        return None
    midpoint = 0.5 * (bids[-1] + asks[-1])
    return FreezeReport(float(traj.times[k]), float(midpoint), k, float(eps), int(window))


@dataclass(frozen=True)
class DiscreteMap:
    """Nondecreasing step map from continuous prices to a discrete set."""

    fn: Callable[[float], float]
    name: str = "map"

    @staticmethod
    def ceil_div(divisor: float = 2.0) -> "DiscreteMap":
        if not divisor > 0.0:
            raise ValueError("divisor must be positive")
        return DiscreteMap(
            lambda x: float(math.ceil(x / divisor)), f"ceil_div_{divisor:g}"
        )


def image_book(book: OrderBook, dmap: DiscreteMap) -> OrderBook:
    """Aggregate the book through a discrete price map.

    Monotonicity is checked on the resting prices; the image must still be
    non-crossing (guaranteed when buys and sells arrive on alternating
    cells of the map, checked here regardless).
    """
    fn = dmap.fn
    prices = sorted(list(book.buy_counts) + list(book.sell_counts))
    mapped = [fn(p) for p in prices]
    if any(b < a for a, b in zip(mapped, mapped[1:])):
        raise InvalidMapError(f"map {dmap.name} is not nondecreasing on the book prices")
    ibuys: Dict[float, int] = {}
    for p, c in book.buy_counts.items():
        q = fn(p)
        ibuys[q] = ibuys.get(q, 0) + c
    isells: Dict[float, int] = {}
    for p, c in book.sell_counts.items():
        q = fn(p)
        isells[q] = isells.get(q, 0) + c
    try:
        return OrderBook(book.interval, buys=ibuys, sells=isells)
    except ValueError as exc:
        raise InvalidMapError(f"image under {dmap.name} is invalid: {exc}") from exc


@dataclass(frozen=True)
class ReplicaStats:
    """Small per-replica summary, cheap to ship across worker processes."""

    replica: int
    n_events: int
    trade_count: int
    min_bid: float
    max_bid: float
    min_ask: float
    max_ask: float
    empty_book_transitions: int
    final_buys: int
    final_sells: int
    frozen: bool
    freeze_time: Optional[float]
    freeze_midpoint: Optional[float]
    window_lo: Optional[float]
    window_hi: Optional[float]
    empty_buy_prob: float
    empty_sell_prob: float


def _replica_stats(
    config: SimConfig, eps: Optional[float], window: Optional[int]
) -> ReplicaStats:
    traj = run(config)
    fz = detect_freeze(traj, eps, window)
    try:
        we = estimate_window(traj)
        wlo, whi = we.lo, we.hi
    except InsufficientDataError:
        wlo = whi = None
    s = traj.summary
    return ReplicaStats(
        replica=config.replica,
        n_events=traj.n_events,
        trade_count=s.trade_count,
        min_bid=float(traj.bids.min()) if traj.n_events else math.nan,
        max_bid=float(traj.bids.max()) if traj.n_events else math.nan,
        min_ask=float(traj.asks.min()) if traj.n_events else math.nan,
        max_ask=float(traj.asks.max()) if traj.n_events else math.nan,
        empty_book_transitions=s.empty_book_transitions,
        final_buys=s.final_buys,
        final_sells=s.final_sells,
        frozen=fz is not None,
        freeze_time=fz.t_freeze if fz else None,
        freeze_midpoint=fz.midpoint if fz else None,
        window_lo=wlo,
        window_hi=whi,
        empty_buy_prob=s.empty_buy_prob,
        empty_sell_prob=s.empty_sell_prob,
    )


def _ensemble_worker(args) -> ReplicaStats:
    base, r, eps, window = args
    return _replica_stats(replace(base, replica=r), eps, window)


def run_ensemble(
    base_config: SimConfig,
    replicas: int,
    workers: Optional[int] = None,
    eps: Optional[float] = None,
    freeze_window: Optional[int] = None,
) -> list:
    """Replica summaries for replicas 0..replicas-1 of ``base_config``.

    Results are ordered by replica index and independent of scheduling;
    replica r always consumes the stream (seed, spawn_key=(r,)).
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    if workers is None or workers == 0:
        workers = os.cpu_count() or 1
    tasks = [(base_config, r, eps, freeze_window) for r in range(replicas)]
    if workers <= 1 or replicas == 1:
        return [_ensemble_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, replicas)) as pool:
        return list(pool.map(_ensemble_worker, tasks, chunksize=max(1, replicas // (4 * workers))))
