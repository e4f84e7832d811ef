"""End-to-end checks of the command line front end.

Everything goes through ``main(argv)`` with tiny event budgets; one test
exercises the installed console script. Artifacts land in tmp_path.
"""

import csv
import json
import subprocess
import sys

import pytest

from lobmm.cli import main

UNIFORM_MODEL = {
    "interval": [0.0, 1.0],
    "demand": [[0.0, 1.0], [1.0, 0.0]],
    "supply": [[0.0, 0.0], [1.0, 1.0]],
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_json(path):
    return json.loads(path.read_text())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@pytest.fixture
def outdir(tmp_path):
    return tmp_path / "out"


# -- config validation --------------------------------------------------------


class TestConfigValidation:
    def test_unknown_top_level_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": UNIFORM_MODEL, "plotting": {}})
        assert main(["theory", cfg]) == 2
        assert "plotting" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "block,key",
        [
            ("model", "slippage"),
            ("run", "thinning"),
            ("output", "dpi"),
            ("compare", "alpha"),
            ("freeze", "reheat"),
        ],
    )
    def test_unknown_nested_key(self, tmp_path, capsys, block, key):
        doc = {"model": dict(UNIFORM_MODEL), "run": {"events": 10, "seed": 1}}
        doc.setdefault(block, {})[key] = 1
        cfg = write_config(tmp_path, doc)
        command = {"compare": "compare", "freeze": "freeze"}.get(block, "simulate")
        assert main([command, cfg, "--seed", "1"]) == 2
        assert key in capsys.readouterr().err

    def test_missing_model(self, tmp_path):
        cfg = write_config(tmp_path, {"run": {"events": 10}})
        assert main(["theory", cfg]) == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["theory", str(path)]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["theory", str(tmp_path / "absent.json")]) == 2

    def test_curve_must_span_interval(self, tmp_path):
        model = dict(UNIFORM_MODEL, demand=[[0.0, 1.0], [0.9, 0.0]])
        cfg = write_config(tmp_path, {"model": model})
        assert main(["theory", cfg]) == 2

    def test_bad_breakpoint_shape(self, tmp_path):
        model = dict(UNIFORM_MODEL, demand=[[0.0, 1.0, 9.0], [1.0, 0.0]])
        cfg = write_config(tmp_path, {"model": model})
        assert main(["theory", cfg]) == 2

    def test_events_and_duration_conflict(self, tmp_path):
        doc = {"model": UNIFORM_MODEL, "run": {"events": 10, "duration": 1.0, "seed": 1}}
        cfg = write_config(tmp_path, doc)
        assert main(["simulate", cfg, "--seed", "1"]) == 2

    def test_negative_rho(self, tmp_path):
        model = dict(UNIFORM_MODEL, rho=-0.1)
        cfg = write_config(tmp_path, {"model": model})
        assert main(["theory", cfg]) == 2

    def test_restriction_bad_shape(self, tmp_path, outdir):
        doc = {
            "model": UNIFORM_MODEL,
            "run": {"events": 10, "restriction": [0.1, 0.5, 0.9]},
        }
        cfg = write_config(tmp_path, doc)
        assert main(["simulate", cfg, "--seed", "1", "--out", str(outdir)]) == 2

    def test_non_monotone_curve_is_assumption_error(self, tmp_path, capsys):
        model = dict(UNIFORM_MODEL, demand=[[0.0, 1.0], [0.5, 1.2], [1.0, 0.0]])
        cfg = write_config(tmp_path, {"model": model})
        assert main(["theory", cfg]) == 3
        assert "(A1)" in capsys.readouterr().err

    def test_seed_required_for_simulate(self, tmp_path):
        cfg = write_config(tmp_path, {"model": UNIFORM_MODEL, "run": {"events": 10}})
        with pytest.raises(SystemExit) as exc_info:
            main(["simulate", cfg])
        assert exc_info.value.code == 2

    def test_seed_required_for_freeze(self, tmp_path):
        cfg = write_config(tmp_path, {"model": UNIFORM_MODEL, "run": {"events": 10}})
        with pytest.raises(SystemExit) as exc_info:
            main(["freeze", cfg])
        assert exc_info.value.code == 2

    def test_config_seed_alone_is_enough_for_compare(self, tmp_path, outdir):
        doc = {
            "model": UNIFORM_MODEL,
            "run": {"events": 200, "seed": 5, "restriction": {"volume": 0.6}},
        }
        cfg = write_config(tmp_path, doc)
        code = main(["compare", cfg, "--out", str(outdir)])
        assert code in (0, 4)  # tiny run may miss tolerance; must not be 2

    def test_compare_without_seed_anywhere(self, tmp_path, outdir):
        doc = {
            "model": UNIFORM_MODEL,
            "run": {"events": 200, "restriction": {"volume": 0.6}},
        }
        cfg = write_config(tmp_path, doc)
        assert main(["compare", cfg, "--out", str(outdir)]) == 2


# -- theory -------------------------------------------------------------------


class TestTheory:
    def test_uniform_report(self, tmp_path, outdir):
        cfg = write_config(tmp_path, {"model": UNIFORM_MODEL})
        assert main(["theory", cfg, "--out", str(outdir)]) == 0
        doc = read_json(outdir / "window.json")
        assert doc["schema_version"] == 1
        assert doc["v_w"] == pytest.approx(0.5, abs=1e-9)
        assert doc["v_l"] == pytest.approx(0.78218, abs=1e-4)
        lo, hi = doc["window"]
        assert lo == pytest.approx(0.21781, abs=1e-4)
        assert hi == pytest.approx(0.78218, abs=1e-4)
        assert not doc["degenerate"] and not doc["boundary"]

        header, rows = read_csv(outdir / "phi.csv")
        assert header == ["volume", "phi", "error_estimate"]
        phis = [float(r[1]) for r in rows]
        assert phis == sorted(phis)

        header, rows = read_csv(outdir / "quotes.csv")
        assert header == ["price", "bid_cdf", "ask_survival"]
        assert len(rows) >= 64

    def test_degenerate_report_embeds_freeze_support(self, tmp_path, outdir):
        cfg = write_config(tmp_path, {"model": dict(UNIFORM_MODEL, rho=0.5)})
        assert main(["theory", cfg, "--out", str(outdir)]) == 0
        doc = read_json(outdir / "window.json")
        assert doc["degenerate"] is True
        assert doc["window"] is None
        fs = doc["freeze_support"]
        assert fs["lo"] == pytest.approx(0.5, abs=1e-9)
        assert fs["hi"] == pytest.approx(0.5, abs=1e-9)
        assert not (outdir / "phi.csv").exists()
        assert not (outdir / "quotes.csv").exists()

    def test_json_only_format(self, tmp_path, outdir):
        doc = {"model": UNIFORM_MODEL, "output": {"formats": ["json"]}}
        cfg = write_config(tmp_path, doc)
        assert main(["theory", cfg, "--out", str(outdir)]) == 0
        assert (outdir / "window.json").exists()
        assert not (outdir / "phi.csv").exists()


# -- simulate -----------------------------------------------------------------


class TestSimulate:
    def base(self, events=500, **run):
        return {
            "model": UNIFORM_MODEL,
            "run": dict({"events": events}, **run),
            "output": {"histogram_bins": 25},
        }

    def test_artifacts(self, tmp_path, outdir):
        doc = self.base(snapshot := 200)
        doc["output"]["snapshot_at"] = [snapshot]
        cfg = write_config(tmp_path, doc)
        assert main(["simulate", cfg, "--seed", "9", "--out", str(outdir)]) == 0

        header, rows = read_csv(outdir / "trajectory.csv")
        assert header == ["event_index", "time", "kind", "trade_price", "bid", "ask"]
        assert len(rows) == 200
        assert [r[0] for r in rows[:3]] == ["0", "1", "2"]

        summary = read_json(outdir / "summary.json")
        assert summary["seed"] == 9 and summary["replica"] == 0
        assert summary["n_events"] == 200

        header, rows = read_csv(outdir / "histogram.csv")
        assert header == ["bin_lo", "bin_hi", "buy_count", "sell_count"]
        assert len(rows) == 25
        booked = sum(int(r[2]) + int(r[3]) for r in rows)
        assert booked == summary["final_buys"] + summary["final_sells"]

        header, rows = read_csv(outdir / "final-book.csv")
        assert header == ["side", "price", "count"]
        assert len(rows) == booked  # uniform pair: all resting counts are 1

    def test_trajectory_row_count_honors_events(self, tmp_path, outdir):
        cfg = write_config(tmp_path, self.base(events=500))
        assert main(["simulate", cfg, "--seed", "9", "--out", str(outdir)]) == 0
        _, rows = read_csv(outdir / "trajectory.csv")
        assert len(rows) == 500

    def test_snapshot_file(self, tmp_path, outdir):
        doc = self.base(events=300)
        doc["output"]["snapshot_at"] = [100]
        cfg = write_config(tmp_path, doc)
        assert main(["simulate", cfg, "--seed", "2", "--out", str(outdir)]) == 0
        header, rows = read_csv(outdir / "snapshot-100.csv")
        assert header == ["side", "price", "count"]
        prices = [float(r[1]) for r in rows]
        assert prices == sorted(prices)

    def test_replica_directories(self, tmp_path, outdir):
        cfg = write_config(tmp_path, self.base(events=100, replicas=3))
        assert main(["simulate", cfg, "--seed", "4", "--out", str(outdir)]) == 0
        for r in range(3):
            assert (outdir / f"replica-{r:03d}" / "summary.json").exists()
        s0 = read_json(outdir / "replica-000" / "summary.json")
        s1 = read_json(outdir / "replica-001" / "summary.json")
        assert s0["replica"] == 0 and s1["replica"] == 1
        assert s0["trade_count"] != s1["trade_count"]  # independent streams

    def test_image_book_artifact(self, tmp_path, outdir):
        # integer-tick model: ceil(x/2) sends (0,6) into {1, 2, 3}
        doc = {
            "model": {
                "interval": [0.0, 6.0],
                "demand": [[0, 3], [1, 3], [2, 2], [3, 2], [4, 1], [5, 1], [6, 0]],
                "supply": [[0, 0], [1, 1], [2, 1], [3, 2], [4, 2], [5, 3], [6, 3]],
            },
            "run": {"events": 400, "map": {"divisor": 2.0}},
        }
        cfg = write_config(tmp_path, doc)
        assert main(["simulate", cfg, "--seed", "6", "--out", str(outdir)]) == 0
        header, rows = read_csv(outdir / "image-book.csv")
        assert header == ["side", "price", "count"]
        for row in rows:
            assert float(row[1]) in (1.0, 2.0, 3.0)

    def test_restriction_by_volume(self, tmp_path, outdir):
        doc = self.base(events=2000)
        doc["run"]["restriction"] = {"volume": 0.6}
        cfg = write_config(tmp_path, doc)
        assert main(["simulate", cfg, "--seed", "8", "--out", str(outdir)]) == 0
        summary = read_json(outdir / "summary.json")
        assert summary["restriction"][0] == pytest.approx(0.4, abs=1e-12)
        assert summary["restriction"][1] == pytest.approx(0.6, abs=1e-12)
        _, rows = read_csv(outdir / "final-book.csv")
        for row in rows:
            assert 0.4 <= float(row[1]) <= 0.6

    def test_rerun_is_byte_identical(self, tmp_path):
        doc = self.base(events=400)
        doc["output"]["snapshot_at"] = [150]
        cfg = write_config(tmp_path, doc)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", cfg, "--seed", "3", "--out", str(a)]) == 0
        assert main(["simulate", cfg, "--seed", "3", "--out", str(b)]) == 0
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b and files_a
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_different_seed_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, self.base(events=400))
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", cfg, "--seed", "3", "--out", str(a)]) == 0
        assert main(["simulate", cfg, "--seed", "4", "--out", str(b)]) == 0
        assert (a / "trajectory.csv").read_bytes() != (b / "trajectory.csv").read_bytes()


# -- compare ------------------------------------------------------------------


class TestCompare:
    def config(self, events, volume=0.6, **extra):
        return {
            "model": UNIFORM_MODEL,
            "run": {"events": events, "seed": 7, "restriction": {"volume": volume}},
            **extra,
        }

    def test_passes_with_enough_events(self, tmp_path, outdir):
        cfg = write_config(tmp_path, self.config(200_000))
        assert main(["compare", cfg, "--out", str(outdir)]) == 0
        report = read_json(outdir / "report.json")
        assert report["passed"] is True
        assert report["sup_distance_bid"] <= report["tolerance_cdf"]
        assert report["recurrence"] == "positive-recurrent"

        header, rows = read_csv(outdir / "curves.csv")
        assert header == [
            "price",
            "bid_cdf_sim",
            "bid_cdf_theory",
            "ask_survival_sim",
            "ask_survival_theory",
        ]
        # both laws live on the window and agree to tolerance everywhere
        for row in rows[:: len(rows) // 7]:
            assert abs(float(row[1]) - float(row[2])) <= report["tolerance_cdf"]

    def test_tolerance_failure_exits_4_and_writes_report(self, tmp_path, outdir, capsys):
        doc = self.config(800, compare={"tolerance_cdf": 0.001, "tolerance_empty": 0.001})
        cfg = write_config(tmp_path, doc)
        assert main(["compare", cfg, "--out", str(outdir)]) == 4
        assert "tolerances" in capsys.readouterr().err
        assert read_json(outdir / "report.json")["passed"] is False

    def test_refuses_critical_window(self, tmp_path, outdir, capsys):
        # restriction at the long-run volume: null recurrent, no stationary law
        doc = self.config(10_000)
        doc["run"]["restriction"] = {"volume": 0.7821882942691838}
        cfg = write_config(tmp_path, doc)
        assert main(["compare", cfg, "--out", str(outdir)]) == 2
        err = capsys.readouterr().err
        assert "refused" in err and "critical" in err
        assert not (outdir / "report.json").exists()

    def test_refuses_transient_window(self, tmp_path, outdir, capsys):
        doc = self.config(10_000)
        doc["run"]["restriction"] = {"volume": 0.9}
        cfg = write_config(tmp_path, doc)
        assert main(["compare", cfg, "--out", str(outdir)]) == 2
        assert "not-positive-recurrent" in capsys.readouterr().err

    def test_requires_restriction(self, tmp_path, outdir):
        doc = {"model": UNIFORM_MODEL, "run": {"events": 100, "seed": 1}}
        cfg = write_config(tmp_path, doc)
        assert main(["compare", cfg, "--out", str(outdir)]) == 2

    def test_explicit_window_must_be_level(self, tmp_path, outdir, capsys):
        doc = self.config(1000)
        doc["run"]["restriction"] = [0.4, 0.7]  # demand(0.4)=0.6 != supply(0.7)=0.7
        cfg = write_config(tmp_path, doc)
        assert main(["compare", cfg, "--out", str(outdir)]) == 2
        assert "level window" in capsys.readouterr().err

    def test_explicit_level_window_accepted(self, tmp_path, outdir):
        doc = self.config(50_000)
        doc["run"]["restriction"] = [0.4, 0.6]
        cfg = write_config(tmp_path, doc)
        assert main(["compare", cfg, "--out", str(outdir)]) == 0


# -- freeze -------------------------------------------------------------------


class TestFreeze:
    def config(self, rho=0.6, replicas=6, events=4000, **freeze):
        return {
            "model": dict(UNIFORM_MODEL, rho=rho),
            "run": {"events": events, "replicas": replicas, "workers": 1},
            "freeze": freeze,
        }

    def test_ensemble_artifacts(self, tmp_path, outdir):
        cfg = write_config(tmp_path, self.config())
        assert main(["freeze", cfg, "--seed", "13", "--out", str(outdir)]) == 0
        doc = read_json(outdir / "ensemble.json")
        assert 0.0 <= doc["fraction_frozen"] <= 1.0
        assert doc["freeze_support"]["lo"] == pytest.approx(0.4, abs=1e-9)
        assert doc["freeze_support"]["hi"] == pytest.approx(0.6, abs=1e-9)

        header, rows = read_csv(outdir / "replicas.csv")
        assert len(rows) == 6
        assert header[0] == "replica" and "freeze_midpoint" in header

        _, hrows = read_csv(outdir / "midpoint-histogram.csv")
        total = sum(int(r[2]) for r in hrows)
        assert total == round(doc["fraction_frozen"] * 6)

    def test_subcritical_refused(self, tmp_path, outdir):
        cfg = write_config(tmp_path, self.config(rho=0.2))
        assert main(["freeze", cfg, "--seed", "1", "--out", str(outdir)]) == 2

    def test_subcritical_allowed_when_asked(self, tmp_path, outdir):
        cfg = write_config(tmp_path, self.config(rho=0.2, allow_subcritical=True))
        assert main(["freeze", cfg, "--seed", "1", "--out", str(outdir)]) == 0
        doc = read_json(outdir / "ensemble.json")
        assert doc["fraction_frozen"] == 0.0

    def test_gambler_scenario(self, tmp_path, outdir):
        cfg = write_config(tmp_path, self.config(gambler={"y": 0.3}))
        assert main(["freeze", cfg, "--seed", "21", "--out", str(outdir)]) == 0
        g = read_json(outdir / "ensemble.json")["gambler"]
        assert g["bound"] == pytest.approx(0.5)
        assert 0.0 <= g["empirical_fraction"] <= 1.0

    def test_gambler_vacuous_bound_is_config_error(self, tmp_path, outdir):
        cfg = write_config(tmp_path, self.config(gambler={"y": 0.7}))
        assert main(["freeze", cfg, "--seed", "1", "--out", str(outdir)]) == 2


# -- sweep --------------------------------------------------------------------


class TestSweep:
    def test_rho_sweep_columns(self, tmp_path, outdir):
        doc = {
            "model": UNIFORM_MODEL,
            "sweep": {"rho": [0.0, 0.2, 0.45, 0.6]},
        }
        cfg = write_config(tmp_path, doc)
        assert main(["sweep", cfg, "--out", str(outdir)]) == 0
        header, rows = read_csv(outdir / "sweep.csv")
        assert header[:3] == ["rho", "v_w", "v_l"]
        assert len(rows) == 4
        lengths = [float(r[5]) for r in rows[:3]]
        assert lengths == sorted(lengths, reverse=True)
        assert rows[3][6] == "1"  # rho=0.6 degenerate

    def test_rho_sweep_with_simulation_columns(self, tmp_path, outdir):
        doc = {
            "model": UNIFORM_MODEL,
            "run": {"events": 3000, "seed": 5},
            "sweep": {"rho": [0.0, 0.6]},
        }
        cfg = write_config(tmp_path, doc)
        assert main(["sweep", cfg, "--out", str(outdir)]) == 0
        header, rows = read_csv(outdir / "sweep.csv")
        assert header[-3:] == ["est_lo", "est_hi", "sim_frozen"]
        assert rows[0][-1] == "0"

    def test_volume_sweep(self, tmp_path, outdir):
        doc = {
            "model": UNIFORM_MODEL,
            "sweep": {"volume": [0.6, 0.7821882942691838, 0.9, 0.3]},
        }
        cfg = write_config(tmp_path, doc)
        assert main(["sweep", cfg, "--out", str(outdir)]) == 0
        header, rows = read_csv(outdir / "sweep.csv")
        assert header == ["volume", "phi", "recurrence"]
        assert rows[0][2] == "positive-recurrent"
        assert rows[1][2] == "critical"
        assert rows[2][2] == "not-positive-recurrent"
        assert rows[3][2] == "out_of_domain" and rows[3][1] == ""

    def test_rho_and_volume_together_rejected(self, tmp_path, outdir):
        doc = {"model": UNIFORM_MODEL, "sweep": {"rho": [0.1], "volume": [0.6]}}
        cfg = write_config(tmp_path, doc)
        assert main(["sweep", cfg, "--out", str(outdir)]) == 2

    def test_missing_sweep_block(self, tmp_path, outdir):
        cfg = write_config(tmp_path, {"model": UNIFORM_MODEL})
        assert main(["sweep", cfg, "--out", str(outdir)]) == 2


# -- console script -----------------------------------------------------------


def test_console_script_roundtrip(tmp_path):
    doc = {"model": UNIFORM_MODEL, "run": {"events": 100}}
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "lobmm.cli", "simulate", str(cfg), "--seed", "1", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "summary.json").exists()
