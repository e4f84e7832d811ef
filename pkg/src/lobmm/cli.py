"""Command line front end: config-driven experiments with file artifacts.

Subcommands: ``theory`` (analytic window report), ``simulate``
(trajectories and book histograms), ``compare`` (simulation against the
stationary quote law on a restricted window), ``freeze`` (replica
ensembles in the high maker-rate regime), ``sweep`` (window geometry
across maker rates, or recurrence across volumes).

One JSON config document drives everything; unknown keys anywhere in it
are rejected.  Command line flags override config values, and every
command is a pure function of (config, flags): rerunning writes
byte-identical artifacts.

Exit codes: 0 success; 2 config or validation error; 3 a structural
assumption on the curves fails; 4 a compare run exceeded its tolerances.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .book import OrderBook
from .curves import (
    AssumptionError,
    DemandSupplyPair,
    Direction,
    MonotoneCurve,
    PriceInterval,
    walras,
)
from .engine import (
    DiscreteMap,
    SimConfig,
    Trajectory,
    image_book,
    InsufficientDataError,
    detect_freeze,
    estimate_window,
    run,
    run_ensemble,
)
from .theory import (
    PhiTable,
    Recurrence,
    SingularCoefficientError,
    classify_recurrence,
    freeze_support,
    gambler_bound,
    phi,
    solve_luckock,
    v_l,
)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_TOLERANCE = 4

KIND_TOKENS = ("buy_market", "sell_market", "buy_limit", "sell_limit", "maker", "dropped")


class ConfigError(ValueError):
    """The config document is malformed or inconsistent."""


# -- config parsing ----------------------------------------------------------

_TOP_KEYS = {"model", "run", "output", "sweep", "compare", "freeze"}
_MODEL_KEYS = {"interval", "demand", "supply", "rho"}
_RUN_KEYS = {
    "events",
    "duration",
    "seed",
    "replicas",
    "burn_in",
    "restriction",
    "map",
    "workers",
}
_OUTPUT_KEYS = {"directory", "histogram_bins", "snapshot_at", "formats"}
_SWEEP_KEYS = {"rho", "volume"}
_COMPARE_KEYS = {"tolerance_cdf", "tolerance_empty", "grid_size"}
_FREEZE_KEYS = {"eps", "min_events", "allow_subcritical", "gambler"}
_GAMBLER_KEYS = {"y"}
_MAP_KEYS = {"divisor"}


def _check_keys(block: Dict[str, Any], allowed: set, where: str) -> None:
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _require(block: Dict[str, Any], key: str, where: str) -> Any:
    if key not in block:
        raise ConfigError(f"missing required key '{key}' in {where}")
    return block[key]


def _as_number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def load_config(path: str) -> Dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "the top level")
    for key in doc:
        if not isinstance(doc[key], dict):
            raise ConfigError(f"config block '{key}' must be an object")
    return doc


def _parse_curve(spec: Any, direction: Direction, name: str) -> MonotoneCurve:
    if not isinstance(spec, list) or len(spec) < 2:
        raise ConfigError(f"model.{name} must be a list of at least two [price, rate] pairs")
    prices, rates = [], []
    for i, item in enumerate(spec):
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError(f"model.{name}[{i}] must be a [price, rate] pair")
        prices.append(_as_number(item[0], f"model.{name}[{i}] price"))
        rates.append(_as_number(item[1], f"model.{name}[{i}] rate"))
    return MonotoneCurve(prices=tuple(prices), rates=tuple(rates), direction=direction)


def parse_model(doc: Dict[str, Any]) -> Tuple[DemandSupplyPair, float]:
    block = _require(doc, "model", "the config")
    _check_keys(block, _MODEL_KEYS, "model")
    interval = _require(block, "interval", "model")
    if not isinstance(interval, list) or len(interval) != 2:
        raise ConfigError("model.interval must be [lo, hi]")
    lo = _as_number(interval[0], "model.interval lo")
    hi = _as_number(interval[1], "model.interval hi")
    demand = _parse_curve(_require(block, "demand", "model"), Direction.DECREASING, "demand")
    supply = _parse_curve(_require(block, "supply", "model"), Direction.INCREASING, "supply")
    if (demand.lo, demand.hi) != (lo, hi) or (supply.lo, supply.hi) != (lo, hi):
        raise ConfigError("model curves must span exactly model.interval")
    rho = _as_number(block.get("rho", 0.0), "model.rho")
    if rho < 0.0:
        raise ConfigError("model.rho must be nonnegative")
    return DemandSupplyPair(demand, supply), rho


def parse_restriction(value: Any, pair: DemandSupplyPair) -> Tuple[PriceInterval, Optional[float]]:
    """Window plus, when derivable, the volume it restricts to.

    A ``{"volume": v}`` spec maps through the curve inverses; an explicit
    ``[lo, hi]`` must name a level window (demand at lo matching supply
    at hi), since the analytic layer is parameterized by volume.
    """
    if isinstance(value, dict):
        _check_keys(value, {"volume"}, "run.restriction")
        v = _as_number(_require(value, "volume", "run.restriction"), "run.restriction.volume")
        lo = float(pair.demand.inverse(v))
        hi = float(pair.supply.inverse(v))
        if not lo < hi:
            raise ConfigError(
                f"restriction volume {v} gives an empty window [{lo}, {hi}]"
            )
        return PriceInterval(lo, hi), v
    if isinstance(value, list) and len(value) == 2:
        lo = _as_number(value[0], "run.restriction lo")
        hi = _as_number(value[1], "run.restriction hi")
        if not lo < hi:
            raise ConfigError("run.restriction must satisfy lo < hi")
        window = PriceInterval(lo, hi)
        v_lo = float(pair.demand.value_at(lo))
        v_hi = float(pair.supply.value_at(hi))
        if abs(v_lo - v_hi) <= 1e-9 * max(1.0, abs(v_lo), abs(v_hi)):
            return window, 0.5 * (v_lo + v_hi)
        return window, None
    raise ConfigError("run.restriction must be [lo, hi] or {\"volume\": v}")


class RunSettings:
    """The run block with flag overrides folded in."""

    def __init__(self, doc: Dict[str, Any], pair: DemandSupplyPair, args) -> None:
        block = doc.get("run", {})
        _check_keys(block, _RUN_KEYS, "run")
        self.events: Optional[int] = None
        self.duration: Optional[float] = None
        if "events" in block:
            self.events = _as_int(block["events"], "run.events")
        if "duration" in block:
            self.duration = _as_number(block["duration"], "run.duration")
        if self.events is not None and self.duration is not None:
            raise ConfigError("run block sets both events and duration")
        self.seed: Optional[int] = None
        if "seed" in block:
            self.seed = _as_int(block["seed"], "run.seed")
        if getattr(args, "seed", None) is not None:
            self.seed = args.seed
        self.replicas = _as_int(block.get("replicas", 1), "run.replicas")
        if self.replicas < 1:
            raise ConfigError("run.replicas must be at least 1")
        self.burn_in = _as_number(block.get("burn_in", 0.5), "run.burn_in")
        self.workers = _as_int(block.get("workers", 1), "run.workers")
        if getattr(args, "workers", None) is not None:
            self.workers = args.workers
        self.window: Optional[PriceInterval] = None
        self.volume: Optional[float] = None
        if block.get("restriction") is not None:
            self.window, self.volume = parse_restriction(block["restriction"], pair)
        self.map: Optional[DiscreteMap] = None
        if block.get("map") is not None:
            mblock = block["map"]
            if not isinstance(mblock, dict):
                raise ConfigError("run.map must be an object")
            _check_keys(mblock, _MAP_KEYS, "run.map")
            divisor = _as_number(_require(mblock, "divisor", "run.map"), "run.map.divisor")
            self.map = DiscreteMap.ceil_div(divisor)

    def require_horizon(self) -> None:
        if self.events is None and self.duration is None:
            raise ConfigError("run block must set events or duration")

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("a seed is required: set run.seed or pass --seed")
        return self.seed


class OutputSettings:
    def __init__(self, doc: Dict[str, Any], args) -> None:
        block = doc.get("output", {})
        _check_keys(block, _OUTPUT_KEYS, "output")
        directory = block.get("directory", "out")
        if not isinstance(directory, str):
            raise ConfigError("output.directory must be a string")
        if getattr(args, "out", None) is not None:
            directory = args.out
        self.directory = Path(directory)
        self.histogram_bins = _as_int(block.get("histogram_bins", 100), "output.histogram_bins")
        if self.histogram_bins < 1:
            raise ConfigError("output.histogram_bins must be positive")
        snap = block.get("snapshot_at", [])
        if not isinstance(snap, list):
            raise ConfigError("output.snapshot_at must be a list of event indices")
        self.snapshot_at = tuple(_as_int(k, "output.snapshot_at entry") for k in snap)
        formats = block.get("formats", ["csv", "json"])
        if (
            not isinstance(formats, list)
            or not formats
            or any(f not in ("csv", "json") for f in formats)
        ):
            raise ConfigError('output.formats must be a nonempty subset of ["csv", "json"]')
        self.formats = frozenset(formats)

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats


# -- deterministic artifact writers ------------------------------------------


def _jsonable(value: Any) -> Any:
    """Replace non-finite floats (not valid JSON) by null, recursively."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(float(value))
    return value


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(payload)
    path.write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        value = float(value)
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return value


def _book_rows(book: OrderBook) -> List[Tuple[str, float, int]]:
    return book.snapshot().rows()


def _histogram_rows(book: OrderBook, interval: PriceInterval, bins: int):
    edges = np.linspace(interval.lo, interval.hi, bins + 1)
    bp = np.fromiter(book.buy_counts.keys(), dtype=float, count=len(book.buy_counts))
    bw = np.fromiter(book.buy_counts.values(), dtype=float, count=len(book.buy_counts))
    sp = np.fromiter(book.sell_counts.keys(), dtype=float, count=len(book.sell_counts))
    sw = np.fromiter(book.sell_counts.values(), dtype=float, count=len(book.sell_counts))
    buys, _ = np.histogram(bp, bins=edges, weights=bw)
    sells, _ = np.histogram(sp, bins=edges, weights=sw)
    for k in range(bins):
        yield edges[k], edges[k + 1], int(buys[k]), int(sells[k])


# -- subcommands -------------------------------------------------------------


def _window_payload(rep) -> Dict[str, Any]:
    return {
        "rho": rep.rho,
        "v_w": rep.v_w,
        "x_w": rep.x_w,
        "walras_unique": rep.walras_unique,
        "v_max": rep.v_max,
        "v_max_effective": rep.v_max_effective,
        "threshold": rep.threshold,
        "v_l": rep.v_l,
        "window": [rep.window.lo, rep.window.hi] if rep.window is not None else None,
        "window_length": rep.window_length,
        "boundary": rep.boundary,
        "degenerate": rep.degenerate,
        "phi_at_cap": rep.phi_at_cap,
    }


def cmd_theory(doc: Dict[str, Any], args) -> int:
    pair, rho = parse_model(doc)
    out = OutputSettings(doc, args)
    out.directory.mkdir(parents=True, exist_ok=True)
    rep = v_l(pair, rho)
    payload = {"command": "theory"}
    payload.update(_window_payload(rep))
    notes: List[str] = []

    if rep.degenerate:
        try:
            fs = freeze_support(pair, rho)
            payload["freeze_support"] = {
                "lo": fs.lo,
                "hi": fs.hi,
                "length": fs.length,
                "degenerate": fs.degenerate,
            }
        except AssumptionError as exc:
            payload["freeze_support"] = None
            notes.append(str(exc))
    else:
        if out.wants("csv"):
            table = PhiTable.build(pair, rho)
            write_csv(
                out.directory / "phi.csv",
                ("volume", "phi", "error_estimate"),
                zip(table.volumes, table.values, table.errors),
            )
        if rep.window is not None and out.wants("csv"):
            try:
                sol = solve_luckock(pair, rho, rep.window)
                write_csv(
                    out.directory / "quotes.csv",
                    ("price", "bid_cdf", "ask_survival"),
                    zip(sol.grid, sol.f_minus, sol.f_plus),
                )
                payload["quote_law"] = {
                    "empty_buy_prob": sol.f_minus_lo,
                    "empty_sell_prob": sol.f_plus_hi,
                    "grid_size": int(len(sol.grid)),
                }
            except SingularCoefficientError as exc:
                payload["quote_law"] = None
                notes.append(str(exc))
    if notes:
        payload["notes"] = notes
    if out.wants("json"):
        write_json(out.directory / "window.json", payload)
    return EXIT_OK


def _trajectory_rows(traj: Trajectory):
    for i in range(traj.n_events):
        yield (
            i,
            traj.times[i],
            KIND_TOKENS[traj.kinds[i]],
            traj.trade_prices[i],
            traj.bids[i],
            traj.asks[i],
        )


def _summary_payload(traj: Trajectory, seed: int) -> Dict[str, Any]:
    s = traj.summary
    try:
        est = estimate_window(traj)
        window_est = {"lo": est.lo, "hi": est.hi}
    except InsufficientDataError:
        window_est = None
    fz = detect_freeze(traj)
    return {
        "command": "simulate",
        "seed": seed,
        "replica": traj.config.replica,
        "rho": traj.config.rho,
        "n_events": traj.n_events,
        "end_time": traj.end_time,
        "burn_in": traj.config.burn_in,
        "restriction": (
            [traj.config.restriction.lo, traj.config.restriction.hi]
            if traj.config.restriction is not None
            else None
        ),
        "trade_count": s.trade_count,
        "final_buys": s.final_buys,
        "final_sells": s.final_sells,
        "empty_book_transitions": s.empty_book_transitions,
        "empty_buy_prob": s.empty_buy_prob,
        "empty_sell_prob": s.empty_sell_prob,
        "window_estimate": window_est,
        "freeze": (
            {"t": fz.t_freeze, "midpoint": fz.midpoint, "start_index": fz.start_index}
            if fz is not None
            else None
        ),
    }


def cmd_simulate(doc: Dict[str, Any], args) -> int:
    pair, rho = parse_model(doc)
    settings = RunSettings(doc, pair, args)
    settings.require_horizon()
    seed = settings.require_seed()
    out = OutputSettings(doc, args)

    for r in range(settings.replicas):
        cfg = SimConfig(
            pair=pair,
            rho=rho,
            events=settings.events,
            duration=settings.duration,
            seed=seed,
            replica=r,
            restriction=settings.window,
            burn_in=settings.burn_in,
            snapshot_at=out.snapshot_at,
        )
        traj = run(cfg)
        rdir = out.directory / f"replica-{r:03d}" if settings.replicas > 1 else out.directory
        rdir.mkdir(parents=True, exist_ok=True)
        if out.wants("csv"):
            write_csv(
                rdir / "trajectory.csv",
                ("event_index", "time", "kind", "trade_price", "bid", "ask"),
                _trajectory_rows(traj),
            )
            write_csv(
                rdir / "final-book.csv",
                ("side", "price", "count"),
                _book_rows(traj.final_book),
            )
            write_csv(
                rdir / "histogram.csv",
                ("bin_lo", "bin_hi", "buy_count", "sell_count"),
                _histogram_rows(traj.final_book, pair.interval, out.histogram_bins),
            )
            for idx, snap in sorted(traj.snapshots.items()):
                write_csv(
                    rdir / f"snapshot-{idx}.csv",
                    ("side", "price", "count"),
                    snap.rows(),
                )
            if settings.map is not None:
                write_csv(
                    rdir / "image-book.csv",
                    ("side", "price", "count"),
                    _book_rows(image_book(traj.final_book, settings.map)),
                )
        if out.wants("json"):
            write_json(rdir / "summary.json", _summary_payload(traj, seed))
    return EXIT_OK


def cmd_compare(doc: Dict[str, Any], args) -> int:
    pair, rho = parse_model(doc)
    settings = RunSettings(doc, pair, args)
    settings.require_horizon()
    seed = settings.require_seed()
    out = OutputSettings(doc, args)
    block = doc.get("compare", {})
    _check_keys(block, _COMPARE_KEYS, "compare")
    tol_cdf = _as_number(block.get("tolerance_cdf", 0.05), "compare.tolerance_cdf")
    tol_empty = _as_number(block.get("tolerance_empty", 0.02), "compare.tolerance_empty")
    grid_size = _as_int(block.get("grid_size", 4096), "compare.grid_size")

    if settings.window is None:
        raise ConfigError("compare requires run.restriction")
    if settings.volume is None:
        raise ConfigError(
            "compare requires a level window: demand at the left edge must "
            "match supply at the right edge (or use {\"volume\": v})"
        )
    klass = classify_recurrence(pair, rho, settings.volume)
    if klass is not Recurrence.POSITIVE_RECURRENT:
        value = phi(pair, rho, settings.volume)
        thr = 1.0 / walras(pair).volume ** 2
        print(
            "compare refused: the restricted model on "
            f"[{settings.window.lo}, {settings.window.hi}] is {klass.value}; "
            f"a stationary law needs the window functional {value:.6g} to stay "
            f"below the recurrence threshold {thr:.6g}",
            file=sys.stderr,
        )
        return EXIT_CONFIG

    sol = solve_luckock(pair, rho, settings.window, grid_size=grid_size)
    cfg = SimConfig(
        pair=pair,
        rho=rho,
        events=settings.events,
        duration=settings.duration,
        seed=seed,
        restriction=settings.window,
        burn_in=settings.burn_in,
    )
    traj = run(cfg)
    s = traj.summary
    grid = s.cdf_grid
    theory_bid = np.interp(grid, sol.grid, sol.f_minus)
    theory_ask = np.interp(grid, sol.grid, sol.f_plus)
    sup_bid = float(np.abs(s.bid_cdf - theory_bid).max())
    sup_ask = float(np.abs(s.ask_survival - theory_ask).max())
    empty_buy_diff = abs(s.empty_buy_prob - sol.f_minus_lo)
    empty_sell_diff = abs(s.empty_sell_prob - sol.f_plus_hi)
    passed = (
        sup_bid <= tol_cdf
        and sup_ask <= tol_cdf
        and empty_buy_diff <= tol_empty
        and empty_sell_diff <= tol_empty
    )

    out.directory.mkdir(parents=True, exist_ok=True)
    if out.wants("csv"):
        write_csv(
            out.directory / "curves.csv",
            (
                "price",
                "bid_cdf_sim",
                "bid_cdf_theory",
                "ask_survival_sim",
                "ask_survival_theory",
            ),
            zip(grid, s.bid_cdf, theory_bid, s.ask_survival, theory_ask),
        )
    if out.wants("json"):
        write_json(
            out.directory / "report.json",
            {
                "command": "compare",
                "seed": seed,
                "rho": rho,
                "window": [settings.window.lo, settings.window.hi],
                "volume": settings.volume,
                "recurrence": klass.value,
                "n_events": traj.n_events,
                "burn_in": settings.burn_in,
                "sup_distance_bid": sup_bid,
                "sup_distance_ask": sup_ask,
                "empty_buy_sim": s.empty_buy_prob,
                "empty_buy_theory": sol.f_minus_lo,
                "empty_buy_diff": empty_buy_diff,
                "empty_sell_sim": s.empty_sell_prob,
                "empty_sell_theory": sol.f_plus_hi,
                "empty_sell_diff": empty_sell_diff,
                "tolerance_cdf": tol_cdf,
                "tolerance_empty": tol_empty,
                "passed": passed,
            },
        )
    if not passed:
        print(
            f"compare failed tolerances: sup bid {sup_bid:.4f}, sup ask "
            f"{sup_ask:.4f} (limit {tol_cdf}); empty-side diffs "
            f"{empty_buy_diff:.4f}/{empty_sell_diff:.4f} (limit {tol_empty})",
            file=sys.stderr,
        )
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_freeze(doc: Dict[str, Any], args) -> int:
    pair, rho = parse_model(doc)
    settings = RunSettings(doc, pair, args)
    settings.require_horizon()
    seed = settings.require_seed()
    out = OutputSettings(doc, args)
    block = doc.get("freeze", {})
    _check_keys(block, _FREEZE_KEYS, "freeze")
    eps = None
    if block.get("eps") is not None:
        eps = _as_number(block["eps"], "freeze.eps")
    min_events = None
    if block.get("min_events") is not None:
        min_events = _as_int(block["min_events"], "freeze.min_events")
    allow_subcritical = bool(block.get("allow_subcritical", False))

    v_w = walras(pair).volume
    if rho < v_w and not allow_subcritical:
        raise ConfigError(
            f"freeze expects rho >= the walrasian volume ({v_w:.6g}); got "
            f"rho={rho}. Set freeze.allow_subcritical for a contrast run."
        )

    base = SimConfig(
        pair=pair,
        rho=rho,
        events=settings.events,
        duration=settings.duration,
        seed=seed,
        burn_in=settings.burn_in,
    )
    stats = run_ensemble(
        base,
        replicas=settings.replicas,
        workers=settings.workers,
        eps=eps,
        freeze_window=min_events,
    )
    frozen = [s for s in stats if s.frozen]
    midpoints = np.array([s.freeze_midpoint for s in frozen])

    support = None
    try:
        fs = freeze_support(pair, rho)
        support = {"lo": fs.lo, "hi": fs.hi, "degenerate": fs.degenerate}
    except (AssumptionError, ValueError):
        pass  # subcritical contrast run, or flat curve segments

    out.directory.mkdir(parents=True, exist_ok=True)
    if out.wants("csv"):
        write_csv(
            out.directory / "replicas.csv",
            (
                "replica",
                "n_events",
                "frozen",
                "freeze_time",
                "freeze_midpoint",
                "trade_count",
                "min_bid",
                "max_ask",
                "final_buys",
                "final_sells",
            ),
            (
                (
                    s.replica,
                    s.n_events,
                    int(s.frozen),
                    s.freeze_time if s.freeze_time is not None else math.nan,
                    s.freeze_midpoint if s.freeze_midpoint is not None else math.nan,
                    s.trade_count,
                    s.min_bid,
                    s.max_ask,
                    s.final_buys,
                    s.final_sells,
                )
                for s in stats
            ),
        )
        edges = np.linspace(pair.interval.lo, pair.interval.hi, out.histogram_bins + 1)
        counts, _ = np.histogram(midpoints, bins=edges)
        write_csv(
            out.directory / "midpoint-histogram.csv",
            ("bin_lo", "bin_hi", "count"),
            ((edges[k], edges[k + 1], int(counts[k])) for k in range(out.histogram_bins)),
        )
    payload = {
        "command": "freeze",
        "seed": seed,
        "rho": rho,
        "replicas": settings.replicas,
        "fraction_frozen": len(frozen) / len(stats),
        "midpoint_mean": float(midpoints.mean()) if len(frozen) else None,
        "midpoint_std": float(midpoints.std()) if len(frozen) else None,
        "midpoint_min": float(midpoints.min()) if len(frozen) else None,
        "midpoint_max": float(midpoints.max()) if len(frozen) else None,
        "freeze_support": support,
    }

    gblock = block.get("gambler")
    if gblock is not None:
        if not isinstance(gblock, dict):
            raise ConfigError("freeze.gambler must be an object")
        _check_keys(gblock, _GAMBLER_KEYS, "freeze.gambler")
        y = _as_number(_require(gblock, "y", "freeze.gambler"), "freeze.gambler.y")
        bound = gambler_bound(pair, rho, y)
        gstats = run_ensemble(
            replace(base, initial_buys=(y,)),
            replicas=settings.replicas,
            workers=settings.workers,
        )
        held = sum(1 for s in gstats if s.min_bid >= y)
        payload["gambler"] = {
            "y": y,
            "bound": bound,
            "empirical_fraction": held / len(gstats),
            "replicas": len(gstats),
        }
    if out.wants("json"):
        write_json(out.directory / "ensemble.json", payload)
    return EXIT_OK


def cmd_sweep(doc: Dict[str, Any], args) -> int:
    pair, rho_model = parse_model(doc)
    settings = RunSettings(doc, pair, args)
    out = OutputSettings(doc, args)
    block = doc.get("sweep")
    if block is None:
        raise ConfigError("sweep requires a sweep block")
    _check_keys(block, _SWEEP_KEYS, "sweep")
    if ("rho" in block) == ("volume" in block):
        raise ConfigError("sweep block must set exactly one of rho and volume")

    out.directory.mkdir(parents=True, exist_ok=True)
    simulate = settings.events is not None and settings.seed is not None

    if "rho" in block:
        rhos = [_as_number(v, "sweep.rho entry") for v in block["rho"]]
        header = [
            "rho",
            "v_w",
            "v_l",
            "x_minus",
            "x_plus",
            "window_length",
            "degenerate",
            "boundary",
        ]
        if simulate:
            header += ["est_lo", "est_hi", "sim_frozen"]
        rows = []
        for r in rhos:
            rep = v_l(pair, r)
            row = [
                r,
                rep.v_w,
                rep.v_l,
                rep.window.lo if rep.window is not None else math.nan,
                rep.window.hi if rep.window is not None else math.nan,
                rep.window_length,
                int(rep.degenerate),
                int(rep.boundary),
            ]
            if simulate:
                traj = run(
                    SimConfig(
                        pair=pair,
                        rho=r,
                        events=settings.events,
                        seed=settings.seed,
                        burn_in=settings.burn_in,
                    )
                )
                try:
                    est = estimate_window(traj)
                    row += [est.lo, est.hi]
                except InsufficientDataError:
                    row += [math.nan, math.nan]
                row.append(int(detect_freeze(traj) is not None))
            rows.append(row)
        write_csv(out.directory / "sweep.csv", header, rows)
        return EXIT_OK

    volumes = [_as_number(v, "sweep.volume entry") for v in block["volume"]]
    rows = []
    for v in volumes:
        try:
            value = phi(pair, rho_model, v)
            klass = classify_recurrence(pair, rho_model, v).value
        except ValueError:
            value, klass = math.nan, "out_of_domain"
        rows.append([v, value, klass])
    write_csv(out.directory / "sweep.csv", ("volume", "phi", "recurrence"), rows)
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lobmm",
        description="Order book model with market makers: theory, simulation, cross-validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (
        ("theory", "analytic window report for the configured model", False),
        ("simulate", "run trajectories and emit book histograms", True),
        ("compare", "validate simulation against the stationary quote law", False),
        ("freeze", "replica ensemble in the high maker-rate regime", True),
        ("sweep", "tabulate window geometry or recurrence over a grid", False),
    )
    for name, help_text, seed_required in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the JSON config document")
        p.add_argument(
            "--seed",
            type=int,
            required=seed_required,
            help="master seed (overrides run.seed)"
            + ("; required" if seed_required else ""),
        )
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--workers", type=int, help="worker processes (overrides run.workers)")
    return parser


_COMMANDS = {
    "theory": cmd_theory,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "freeze": cmd_freeze,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_config(args.config)
        return _COMMANDS[args.command](doc, args)
    except AssumptionError as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
