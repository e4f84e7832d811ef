"""Analytic side of the model: window boundaries, recurrence, quote laws.

Everything here is a pure function of a demand/supply pair and the market
maker rate rho.  The central objects:

- The walrasian volume V_W (from the curves module) and the volume ceiling
  V_max = min(demand(lo), supply(hi)).
- The integral functional ``phi``: for V >= V_W,

      phi(V) = integral from V_W to V of
               { 1/(supply(demand_inv(W)) - rho)
               + 1/(demand(supply_inv(W)) - rho) } / W^2 dW,

  where the inverses are the unshifted left-continuous inverses.  The
  candidate window at volume V is J(V) = (demand_inv(V), supply_inv(V));
  the braces hold the shifted curve values at the far edges of J(W).
- The trade volume ``v_l``: the supremum of V with phi(V) < 1/V_W^2,
  capped at the effective ceiling where a shifted curve hits zero at a
  window edge.  J(v_l) is the competitive window.
- The stationary quote law on a window: f_minus(x) = P[bid <= x],
  f_plus(x) = P[ask >= x] solve the linear system

      d f_plus / dx = -f_minus * supply'(x) / (demand(x) - rho)
      d f_minus / dx = -f_plus * demand'(x) / (supply(x) - rho)

  with f_plus = 1 at the left edge and f_minus = 1 at the right edge.
- For rho >= V_W quotes converge instead; ``freeze_support`` gives the
  support of the limit and ``gambler_bound`` the hitting-probability
  bound used to test it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from .curves import (
    AssumptionError,
    DemandSupplyPair,
    DomainError,
    MonotoneCurve,
    PriceInterval,
    WalrasPoint,
    check_assumptions,
    walras,
)

__all__ = [
    "LuckockSolution",
    "PhiTable",
    "Recurrence",
    "SingularCoefficientError",
    "VacuousBoundError",
    "EmptySupportError",
    "FreezeSupport",
    "WindowReport",
    "classify_recurrence",
    "freeze_support",
    "gambler_bound",
    "phi",
    "solve_luckock",
    "v_l",
]

# truncation distance from the integrand's validity edge, volume units
_EDGE_MARGIN = 1e-9
_PHI_TOL = 1e-10
_ROOT_TOL = 1e-10


class SingularCoefficientError(ValueError):
    """A shifted curve is nonpositive on the requested window."""


class VacuousBoundError(ValueError):
    """The gambler's-ruin bound degenerates to a statement weaker than 0."""


class EmptySupportError(ValueError):
    """No price satisfies the freeze condition (rho below the walrasian volume)."""


class Recurrence(Enum):
    POSITIVE_RECURRENT = "positive-recurrent"
    CRITICAL = "critical"
    NOT_POSITIVE_RECURRENT = "not-positive-recurrent"


def _v_ceiling(pair: DemandSupplyPair) -> float:
    """Volume ceiling: both sides can sustain at most this trade rate."""
    return min(pair.demand.max_rate, pair.supply.max_rate)


def _check_rho(rho: float) -> float:
    if rho < 0.0 or not math.isfinite(rho):
        raise ValueError("rho must be finite and nonnegative")
    return float(rho)


def _require_a5(pair: DemandSupplyPair, wal: WalrasPoint) -> None:
    if not wal.volume < _v_ceiling(pair):
        raise AssumptionError(
            "(A5)", "walrasian volume must sit strictly below the volume ceiling"
        )


# -- the window functional phi -------------------------------------------


def _edge_gap(pair: DemandSupplyPair, rho: float, v: float) -> Tuple[float, float]:
    """Shifted curve values at the far edges of the candidate window J(v).

    Demand is smallest at the right edge, supply at the left edge, so these
    two numbers are the minima of the shifted curves over J(v); both must
    stay positive for the window to support trading and for the integrand
    of phi to stay finite up to v.  Both are nonincreasing in v.
    """
    x_lo = pair.demand.inverse(v)
    x_hi = pair.supply.inverse(v)
    return (
        float(pair.supply.value_at(x_lo)) - rho,
        float(pair.demand.value_at(x_hi)) - rho,
    )


def _effective_ceiling(pair: DemandSupplyPair, rho: float, v_w: float) -> float:
    """Largest volume with both shifted edge values positive, capped at the
    volume ceiling.  Bisection on the nonincreasing edge-gap function."""
    v_max = _v_ceiling(pair)
    if min(*_edge_gap(pair, rho, v_max)) > 0.0:
        return v_max
    a, b = v_w, v_max
    for _ in range(200):
        m = 0.5 * (a + b)
        if min(*_edge_gap(pair, rho, m)) > 0.0:
            a = m
        else:
            b = m
        if b - a <= 1e-15 * max(1.0, v_max):
            break
    return a


def _phi_knots(pair: DemandSupplyPair, lo: float, hi: float) -> list:
    """Volume levels where the integrand of phi loses smoothness.

    The window-edge paths kink where an inverse crosses a breakpoint of
    either curve, which happens at the curve values of the merged
    breakpoints; splitting there keeps every quadrature piece smooth.
    """
    levels = set()
    for p in set(pair.demand.prices) | set(pair.supply.prices):
        for lvl in (float(pair.demand.value_at(p)), float(pair.supply.value_at(p))):
            if lo < lvl < hi:
                levels.add(lvl)
    return sorted(levels)


def _simpson(fx: np.ndarray, h: float) -> float:
    return (h / 3.0) * (fx[0] + fx[-1] + 4.0 * fx[1:-1:2].sum() + 2.0 * fx[2:-1:2].sum())


def _integrate_piece(
    f: Callable[[np.ndarray], np.ndarray], a: float, b: float, tol: float
) -> Tuple[float, float]:
    """Composite quadrature on one smooth piece, grid doubling to ``tol``.

    Returns (value, last doubling difference).  The doubling count is
    capped; near-edge pieces where the integrand climbs steeply converge
    past any practical threshold-crossing question well before the cap.
    """
    if b <= a:
        return 0.0, 0.0
    n = 8
    xs = np.linspace(a, b, n + 1)
    prev = _simpson(f(xs), (b - a) / n)
    for _ in range(16):
        n *= 2
        xs = np.linspace(a, b, n + 1)
        cur = _simpson(f(xs), (b - a) / n)
        if abs(cur - prev) <= tol:
            return cur, abs(cur - prev)
        prev = cur
    return prev, abs(cur - prev)


def _phi_integrand(pair: DemandSupplyPair, rho: float) -> Callable[[np.ndarray], np.ndarray]:
    demand, supply = pair.demand, pair.supply

    def f(w: np.ndarray) -> np.ndarray:
        x_lo = demand.inverse(w)
        x_hi = supply.inverse(w)
        a = supply.value_at(x_lo) - rho
        b = demand.value_at(x_hi) - rho
        return (1.0 / a + 1.0 / b) / (w * w)

    return f


def _phi_from(
    pair: DemandSupplyPair, rho: float, v_w: float, v: float, tol: float = _PHI_TOL
) -> Tuple[float, float]:
    """phi(v) given a precomputed walrasian volume; (value, error estimate)."""
    if v <= v_w:
        return 0.0, 0.0
    knots = [v_w] + _phi_knots(pair, v_w, v) + [v]
    f = _phi_integrand(pair, rho)
    piece_tol = tol / len(knots)
    total = 0.0
    err = 0.0
    for a, b in zip(knots, knots[1:]):
        val, e = _integrate_piece(f, a, b, piece_tol)
        total += val
        err += e
    return total, err


def phi(pair: DemandSupplyPair, rho: float, v: float, tol: float = _PHI_TOL) -> float:
    """The window functional at volume ``v`` (see the module docstring).

    Strictly increasing in ``v``; zero at the walrasian volume.  Raises
    :class:`~lobmm.curves.DomainError` when ``v`` lies beyond the validity
    edge (a shifted curve nonpositive at a window edge before ``v``), with
    the offending edge values in the message.
    """
    rho = _check_rho(rho)
    wal = walras(pair)
    v_w = wal.volume
    v_max = _v_ceiling(pair)
    span_tol = 1e-12 * max(1.0, v_max)
    if v < v_w - span_tol:
        raise DomainError(f"phi is defined from the walrasian volume {v_w} up; got {v}")
    if v > v_max + span_tol:
        raise DomainError(f"volume {v} exceeds the volume ceiling {v_max}")
    v = min(max(v, v_w), v_max)
    gap_lo, gap_hi = _edge_gap(pair, rho, v)
    if min(gap_lo, gap_hi) <= 0.0:
        raise DomainError(
            f"phi integrand blows up before V={v}: shifted supply at the left "
            f"window edge is {gap_lo}, shifted demand at the right edge is {gap_hi}"
        )
    return _phi_from(pair, rho, v_w, v, tol)[0]


@dataclass(frozen=True)
class PhiTable:
    """Samples of phi on an ascending volume grid, with error estimates."""

    rho: float
    v_w: float
    volumes: Tuple[float, ...]
    values: Tuple[float, ...]
    errors: Tuple[float, ...]

    @classmethod
    def build(
        cls,
        pair: DemandSupplyPair,
        rho: float,
        v_hi: Optional[float] = None,
        n: int = 64,
        tol: float = _PHI_TOL,
    ) -> "PhiTable":
        """Tabulate phi at ``n`` points from V_W to ``v_hi`` (default: just
        inside the effective ceiling).  Accumulates piecewise so the whole
        table costs one sweep."""
        rho = _check_rho(rho)
        if n < 2:
            raise ValueError("need at least two samples")
        wal = walras(pair)
        v_w = wal.volume
        if v_hi is None:
            v_hi = _effective_ceiling(pair, rho, v_w) - _EDGE_MARGIN
        if not v_w < v_hi:
            raise ValueError(f"empty tabulation range [{v_w}, {v_hi}]")
        gap_lo, gap_hi = _edge_gap(pair, rho, v_hi)
        if min(gap_lo, gap_hi) <= 0.0:
            raise DomainError(f"tabulation end {v_hi} lies beyond the validity edge")
        vols = np.linspace(v_w, v_hi, n)
        f = _phi_integrand(pair, rho)
        piece_tol = tol / n
        vals = [0.0]
        errs = [0.0]
        acc = 0.0
        eacc = 0.0
        for a, b in zip(vols[:-1], vols[1:]):
            for ka, kb in _split_at_knots(pair, float(a), float(b)):
                val, e = _integrate_piece(f, ka, kb, piece_tol)
                acc += val
                eacc += e
            vals.append(acc)
            errs.append(eacc)
        return cls(rho, v_w, tuple(float(v) for v in vols), tuple(vals), tuple(errs))


def _split_at_knots(pair: DemandSupplyPair, a: float, b: float) -> list:
    pts = [a] + _phi_knots(pair, a, b) + [b]
    return list(zip(pts, pts[1:]))


# -- trade volume and competitive window ----------------------------------


@dataclass(frozen=True)
class WindowReport:
    """Competitive-window summary at one market maker rate.

    ``degenerate`` marks rho >= V_W (the window closes and quotes freeze;
    see :func:`freeze_support`).  ``boundary`` marks the case where phi
    never reaches the recurrence threshold below the effective ceiling, so
    the trade volume sits at the ceiling itself.  ``window`` is None when
    degenerate.
    """

    rho: float
    v_w: float
    x_w: float
    walras_unique: bool
    v_max: float
    v_max_effective: float
    threshold: float
    v_l: float
    window: Optional[PriceInterval]
    boundary: bool
    degenerate: bool
    phi_at_cap: Optional[float]

    @property
    def window_length(self) -> float:
        return self.window.length if self.window is not None else 0.0


def v_l(pair: DemandSupplyPair, rho: float = 0.0) -> WindowReport:
    """Long-run trade volume and competitive window at rate ``rho``.

    Bisection solves phi(V) = 1/V_W^2; when no root exists below the
    effective ceiling, the volume is the ceiling itself and ``boundary``
    is set.  For rho >= V_W the report is degenerate rather than an error.
    """
    rho = _check_rho(rho)
    wal = walras(pair)
    _require_a5(pair, wal)
    v_w = wal.volume
    v_max = _v_ceiling(pair)
    threshold = 1.0 / (v_w * v_w)
    if rho >= v_w:
        return WindowReport(
            rho, v_w, wal.x, wal.unique, v_max, v_w, threshold,
            v_w, None, False, True, None,
        )
    v_eff = _effective_ceiling(pair, rho, v_w)
    v_cap = v_eff - _EDGE_MARGIN
    phi_cap, _ = _phi_from(pair, rho, v_w, v_cap)
    if phi_cap < threshold:
        x_lo = float(pair.demand.inverse(v_eff))
        x_hi = float(pair.supply.inverse(v_eff))
        window = PriceInterval(x_lo, x_hi) if x_lo < x_hi else None
        return WindowReport(
            rho, v_w, wal.x, wal.unique, v_max, v_eff, threshold,
            v_eff, window, True, False, phi_cap,
        )
    a, b = v_w, v_cap
    while b - a > _ROOT_TOL:
        m = 0.5 * (a + b)
        if _phi_from(pair, rho, v_w, m)[0] < threshold:
            a = m
        else:
            b = m
    vol = 0.5 * (a + b)
    window = PriceInterval(
        float(pair.demand.inverse(vol)), float(pair.supply.inverse(vol))
    )
    return WindowReport(
        rho, v_w, wal.x, wal.unique, v_max, v_eff, threshold,
        vol, window, False, False, phi_cap,
    )


def classify_recurrence(
    pair: DemandSupplyPair, rho: float, v: float, band_rel: float = 1e-6
) -> Recurrence:
    """Recurrence of the restricted model on J(v): phi(v) against 1/V_W^2.

    Values within ``band_rel`` (relative) of the threshold classify as
    CRITICAL; the comparison is meaningful for v strictly between V_W and
    the effective ceiling.
    """
    rho = _check_rho(rho)
    wal = walras(pair)
    _require_a5(pair, wal)
    v_w = wal.volume
    v_eff = _effective_ceiling(pair, rho, v_w)
    if not v_w < v < v_eff:
        raise DomainError(
            f"recurrence is classified for volumes in ({v_w}, {v_eff}); got {v}"
        )
    value = _phi_from(pair, rho, v_w, v)[0]
    threshold = 1.0 / (v_w * v_w)
    if abs(value - threshold) <= band_rel * threshold:
        return Recurrence.CRITICAL
    if value < threshold:
        return Recurrence.POSITIVE_RECURRENT
    return Recurrence.NOT_POSITIVE_RECURRENT


# -- stationary quote distributions on a window ----------------------------


@dataclass(frozen=True)
class LuckockSolution:
    """Gridded stationary law of the quotes on a window.

    ``f_minus[i]`` approximates P[bid <= grid[i]], ``f_plus[i]``
    approximates P[ask >= grid[i]] for the restricted model on the window.
    The edge values ``f_minus_lo`` = f_minus(J_lo) and ``f_plus_hi`` =
    f_plus(J_hi) are the equilibrium probabilities that the buy (sell)
    side of the restricted book is empty.  ``negative_edge`` flags a
    negative f_minus_lo, the solver's signal that the window lies beyond
    the positive-recurrent regime; values are not clamped.
    """

    window: PriceInterval
    rho: float
    grid: np.ndarray
    f_minus: np.ndarray
    f_plus: np.ndarray
    f_minus_lo: float
    f_plus_hi: float
    boundary_residual: float
    negative_edge: bool


def _segment_slopes(curve: MonotoneCurve, mids: np.ndarray) -> np.ndarray:
    """Exact curve slope on the segment containing each midpoint."""
    px, rx = curve._px, curve._rx
    seg = np.diff(rx) / np.diff(px)
    j = np.clip(np.searchsorted(px, mids, side="right") - 1, 0, len(seg) - 1)
    return seg[j]


def solve_luckock(
    pair: DemandSupplyPair,
    rho: float,
    window: PriceInterval,
    grid_size: int = 4096,
) -> LuckockSolution:
    """Solve the stationary quote equations on ``window``.

    The system is linear in the unknown left-edge value f_minus(J_lo) = c,
    so two fixed-grid fourth-order integrations (c = 0 and c = 1) pin c by
    one linear solve; no iterative shooting.  The grid is breakpoint
    aligned: no curve kink falls inside a step.  Both curves must stay
    strictly above rho on the closed window.
    """
    rho = _check_rho(rho)
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    iv = pair.interval
    if not (iv.lo <= window.lo < window.hi <= iv.hi):
        raise ValueError("window must sit inside the price interval")
    shifted = pair.shifted(rho)
    demand, supply = shifted.demand, shifted.supply
    # monotone curves attain their window minimum at an edge
    d_min = float(demand.value_at(window.hi))
    s_min = float(supply.value_at(window.lo))
    if d_min <= 0.0:
        raise SingularCoefficientError(
            f"shifted demand is {d_min} at x={window.hi}; need it positive on the window"
        )
    if s_min <= 0.0:
        raise SingularCoefficientError(
            f"shifted supply is {s_min} at x={window.lo}; need it positive on the window"
        )

    base = np.linspace(window.lo, window.hi, grid_size)
    inner = [p for p in set(demand.prices) | set(supply.prices) if window.lo < p < window.hi]
    grid = np.unique(np.concatenate([base, np.asarray(inner)])) if inner else base
    x0 = grid[:-1]
    x1 = grid[1:]
    h = x1 - x0
    xm = x0 + 0.5 * h
    # coefficient samples for the classic fourth-order step, vectorized
    dv0, dvm, dv1 = demand.value_at(x0), demand.value_at(xm), demand.value_at(x1)
    sv0, svm, sv1 = supply.value_at(x0), supply.value_at(xm), supply.value_at(x1)
    dsl = _segment_slopes(demand, xm)
    ssl = _segment_slopes(supply, xm)

    n_cells = len(h)
    fm = np.empty((2, n_cells + 1))
    fp = np.empty((2, n_cells + 1))
    fm[0, 0], fp[0, 0] = 0.0, 1.0
    fm[1, 0], fp[1, 0] = 1.0, 1.0

    hl = h.tolist()
    dv0l, dvml, dv1l = dv0.tolist(), dvm.tolist(), dv1.tolist()
    sv0l, svml, sv1l = sv0.tolist(), svm.tolist(), sv1.tolist()
    dsll, ssll = dsl.tolist(), ssl.tolist()
    for run_idx in range(2):
        m = fm[run_idx, 0]
        p = fp[run_idx, 0]
        fm_row = fm[run_idx]
        fp_row = fp[run_idx]
        for i in range(n_cells):
            hi_ = hl[i]
            ds = dsll[i]
            ss = ssll[i]
            ra0 = ds / sv0l[i]
            ram = ds / svml[i]
            ra1 = ds / sv1l[i]
            rb0 = ss / dv0l[i]
            rbm = ss / dvml[i]
            rb1 = ss / dv1l[i]
            # k = (dm, dp) at (x0, xm, xm, x1)
            k1m = -p * ra0
            k1p = -m * rb0
            m2 = m + 0.5 * hi_ * k1m
            p2 = p + 0.5 * hi_ * k1p
            k2m = -p2 * ram
            k2p = -m2 * rbm
            m3 = m + 0.5 * hi_ * k2m
            p3 = p + 0.5 * hi_ * k2p
            k3m = -p3 * ram
            k3p = -m3 * rbm
            m4 = m + hi_ * k3m
            p4 = p + hi_ * k3p
            k4m = -p4 * ra1
            k4p = -m4 * rb1
            m = m + hi_ / 6.0 * (k1m + 2.0 * (k2m + k3m) + k4m)
            p = p + hi_ / 6.0 * (k1p + 2.0 * (k2p + k3p) + k4p)
            fm_row[i + 1] = m
            fp_row[i + 1] = p

    a_end = fm[0, -1]
    b_end = fm[1, -1]
    denom = b_end - a_end
    if denom == 0.0 or not math.isfinite(denom):
        raise SingularCoefficientError(
            "the two fundamental integrations cannot pin the left edge value"
        )
    c = (1.0 - a_end) / denom
    f_minus = fm[0] + c * (fm[1] - fm[0])
    f_plus = fp[0] + c * (fp[1] - fp[0])
    residual = max(abs(f_minus[-1] - 1.0), abs(f_plus[0] - 1.0))
    return LuckockSolution(
        window=window,
        rho=rho,
        grid=grid,
        f_minus=f_minus,
        f_plus=f_plus,
        f_minus_lo=float(f_minus[0]),
        f_plus_hi=float(f_plus[-1]),
        boundary_residual=float(residual),
        negative_edge=bool(c < 0.0),
    )


# -- the frozen regime ------------------------------------------------------


@dataclass(frozen=True)
class FreezeSupport:
    """Support [lo, hi] of the limiting price when quotes converge.

    Degenerate (lo == hi == walrasian price) exactly at rho = V_W.
    """

    rho: float
    lo: float
    hi: float
    x_w: float
    degenerate: bool

    @property
    def length(self) -> float:
        return self.hi - self.lo


def freeze_support(pair: DemandSupplyPair, rho: float) -> FreezeSupport:
    """Prices x with max(demand(x), supply(x)) <= rho, as an interval.

    Quotes converge to a random limit supported on exactly this set when
    rho >= V_W.  Requires strictly monotone curves; for rho < V_W the set
    is empty and the window machinery (:func:`v_l`) applies instead.
    """
    rho = _check_rho(rho)
    report = check_assumptions(pair)
    if not report.a6:
        raise AssumptionError(
            "(A6)", "freeze support requires strictly monotone demand and supply"
        )
    wal = walras(pair)
    v_w = wal.volume
    if rho < v_w:
        raise EmptySupportError(
            f"no price freezes at rho={rho} < walrasian volume {v_w}; "
            "the window machinery (v_l) applies in this regime"
        )
    demand, supply = pair.demand, pair.supply
    lo = demand.lo if rho >= demand.max_rate else float(demand.inverse(rho))
    hi = supply.hi if rho >= supply.max_rate else float(supply.inverse(rho))
    span_tol = 1e-12 * (demand.hi - demand.lo)
    degenerate = hi - lo <= span_tol
    return FreezeSupport(rho, lo, hi, wal.x, degenerate)


def gambler_bound(pair: DemandSupplyPair, rho: float, y: float) -> float:
    """Lower bound on P[the bid never drops below y] with a buy resting at y.

    Equals 1 - supply(y)/rho; requires supply(y) < rho, else the bound
    says nothing and :class:`VacuousBoundError` is raised.
    """
    rho = _check_rho(rho)
    if not pair.interval.contains_open(y):
        raise DomainError(f"level {y} must lie strictly inside the price interval")
    lam = float(pair.supply.value_at(y))
    if rho <= 0.0 or lam >= rho:
        raise VacuousBoundError(
            f"supply rate {lam} at y={y} must be strictly below rho={rho}"
        )
    return 1.0 - lam / rho
