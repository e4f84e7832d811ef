"""Limit order book model with market makers: simulation and theory.

The model: buyers and sellers arrive as Poisson streams over a price
interval, post limit orders or trade at the quotes, and a market maker
reinforces both best quotes at a flat rate.  This package simulates the
resulting Markov chain exactly and computes the matching steady-state
quantities (Walras equilibrium, the competitive window that supports
recurrent trading, stationary quote distributions, freeze behaviour)
from the demand and supply curves alone, so each side can be checked
against the other.

Layout:

- ``curves``: piecewise-linear demand/supply curves, inverses, measures
- ``book``: the two-sided order book and its event transitions
- ``engine``: the event loop, trajectories, ensembles
- ``theory``: window boundaries, stationary profiles, freeze criteria
- ``cli``: command line front end (``lobmm``)
"""

from __future__ import annotations

from .book import (
    BidAsk,
    BookSnapshot,
    Event,
    EventKind,
    Fill,
    OrderBook,
    Side,
)
from .curves import (
    AssumptionError,
    AssumptionReport,
    DegenerateMeasureError,
    DemandSupplyPair,
    Direction,
    DomainError,
    MonotoneCurve,
    PriceInterval,
    WalrasPoint,
    check_assumptions,
    walras,
)
from .engine import (
    BlockRng,
    DiscreteMap,
    FreezeReport,
    InsufficientDataError,
    InvalidMapError,
    RateTable,
    ReplicaStats,
    SimConfig,
    Trajectory,
    TrajectorySummary,
    WindowEstimate,
    detect_freeze,
    estimate_window,
    generator_for,
    image_book,
    next_event,
    restrict_event,
    run,
    run_ensemble,
)
from .theory import (
    EmptySupportError,
    FreezeSupport,
    LuckockSolution,
    PhiTable,
    Recurrence,
    SingularCoefficientError,
    VacuousBoundError,
    WindowReport,
    classify_recurrence,
    freeze_support,
    gambler_bound,
    phi,
    solve_luckock,
    v_l,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionError",
    "AssumptionReport",
    "BidAsk",
    "BlockRng",
    "BookSnapshot",
    "DegenerateMeasureError",
    "DemandSupplyPair",
    "Direction",
    "DiscreteMap",
    "DomainError",
    "EmptySupportError",
    "Event",
    "EventKind",
    "Fill",
    "FreezeReport",
    "FreezeSupport",
    "InsufficientDataError",
    "InvalidMapError",
    "LuckockSolution",
    "MonotoneCurve",
    "OrderBook",
    "PhiTable",
    "PriceInterval",
    "RateTable",
    "Recurrence",
    "ReplicaStats",
    "Side",
    "SimConfig",
    "SingularCoefficientError",
    "Trajectory",
    "TrajectorySummary",
    "VacuousBoundError",
    "WalrasPoint",
    "WindowEstimate",
    "WindowReport",
    "check_assumptions",
    "classify_recurrence",
    "detect_freeze",
    "estimate_window",
    "freeze_support",
    "gambler_bound",
    "generator_for",
    "image_book",
    "next_event",
    "phi",
    "restrict_event",
    "run",
    "run_ensemble",
    "solve_luckock",
    "v_l",
    "walras",
    "__version__",
]
