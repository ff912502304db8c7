"""CLI tests: outputs, column contract, exit codes, determinism."""

import csv

import pytest

from commuteq.cli import EXIT_INPUT, EXIT_IO, EXIT_OK, EXIT_SOLVER, PROFILE_COLUMNS, main

GOLDEN_MAX_DELAY_EV = 0.3983845685044753  # bundled scenario has mpr = 1
GOLDEN_MAX_DELAY_GV = 0.2614128645575636


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _read_summary(path):
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


class TestSolve:
    def test_writes_profile_and_summary(self, tmp_path):
        out = tmp_path / "run"
        assert main(["solve", "--out", str(out), "--quiet"]) == EXIT_OK
        header, rows = _read_csv(out / "profile.csv")
        assert header == list(PROFILE_COLUMNS)
        assert len(rows) > 50
        summary = _read_summary(out / "summary.txt")
        assert summary["command"] == "solve"
        assert float(summary["count_ev"]) == pytest.approx(3000.0, rel=1e-6)

    def test_profile_max_delay_matches_golden(self, tmp_path):
        out = tmp_path / "run"
        main(["solve", "--out", str(out), "--quiet"])
        _, rows = _read_csv(out / "profile.csv")
        max_delay = max(float(r[1]) for r in rows)
        assert max_delay == pytest.approx(GOLDEN_MAX_DELAY_EV, rel=1e-6)

    def test_profile_max_delay_matches_golden_all_gv(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CEQ_DEMAND_MPR", "0.0")
        out = tmp_path / "run"
        main(["solve", "--out", str(out), "--quiet"])
        _, rows = _read_csv(out / "profile.csv")
        max_delay = max(float(r[1]) for r in rows)
        assert max_delay == pytest.approx(GOLDEN_MAX_DELAY_GV, rel=1e-6)
        assert all(float(r[4]) == 0.0 for r in rows)  # no EV flow at mpr = 0

    def test_dt_flag_controls_grid(self, tmp_path):
        out = tmp_path / "run"
        main(["solve", "--out", str(out), "--dt", "2.0", "--quiet"])
        _, rows = _read_csv(out / "profile.csv")
        ts = [float(r[0]) for r in rows[:3]]
        # CSV carries 10 significant digits, so compare at that precision
        assert ts[1] - ts[0] == pytest.approx(2.0 / 60.0, abs=1e-8)


class TestSweep:
    def test_default_eleven_rows_sorted_with_monotone_ecp(self, tmp_path):
        out = tmp_path / "run"
        assert main(["sweep", "--out", str(out), "--quiet"]) == EXIT_OK
        header, rows = _read_csv(out / "sweep.csv")
        assert header[0] == "mpr"
        assert len(rows) == 11
        mprs = [float(r[0]) for r in rows]
        assert mprs == sorted(mprs)
        ecp = [float(r[header.index("ecp_hours")]) for r in rows]
        assert ecp[0] == 0.0
        assert all(b >= a - 1e-12 for a, b in zip(ecp, ecp[1:]))

    def test_explicit_list(self, tmp_path):
        out = tmp_path / "run"
        assert main(["sweep", "--out", str(out), "--mpr", "0,0.5,1", "--quiet"]) == EXIT_OK
        _, rows = _read_csv(out / "sweep.csv")
        assert [float(r[0]) for r in rows] == [0.0, 0.5, 1.0]

    def test_bad_list_is_input_error(self, tmp_path):
        out = tmp_path / "run"
        assert main(["sweep", "--out", str(out), "--mpr", "0,junk", "--quiet"]) == EXIT_INPUT

    def test_out_of_range_value_is_input_error(self, tmp_path):
        out = tmp_path / "run"
        assert main(["sweep", "--out", str(out), "--mpr", "0,1.2", "--quiet"]) == EXIT_INPUT


class TestToll:
    def test_writes_schedule_and_residual(self, tmp_path):
        out = tmp_path / "run"
        assert main(["toll", "--out", str(out), "--quiet"]) == EXIT_OK
        header, rows = _read_csv(out / "toll.csv")
        assert header == ["t_hours", "toll"]
        summary = _read_summary(out / "summary.txt")
        lam = float(summary["multiplier"])
        assert float(summary["tolled_equilibrium_residual"]) <= 1e-6 * lam
        assert float(summary["so_social_cost"]) < float(summary["ue_social_cost"])
        tolls = [float(r[1]) for r in rows]
        assert min(tolls) >= 0.0

    def test_incentive_column(self, tmp_path):
        out = tmp_path / "run"
        assert main(["toll", "--out", str(out), "--incentive", "--quiet"]) == EXIT_OK
        header, rows = _read_csv(out / "toll.csv")
        assert header == ["t_hours", "toll", "incentive"]
        assert all(float(r[2]) <= 1e-12 for r in rows)


class TestExitCodes:
    def test_missing_scenario_file(self, tmp_path):
        code = main(
            ["solve", "--scenario", str(tmp_path / "absent.toml"), "--out", str(tmp_path / "o"), "--quiet"]
        )
        assert code == EXIT_INPUT

    def test_validation_error(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CEQ_DEMAND_MPR", "1.7")
        code = main(["solve", "--out", str(tmp_path / "o"), "--quiet"])
        assert code == EXIT_INPUT

    def test_solver_failure_is_distinct(self, tmp_path, monkeypatch):
        # an oracle capped at zero days cannot converge
        monkeypatch.setenv("CEQ_NUMERICS_MAX_DAYS", "0")
        code = main(["oracle", "--out", str(tmp_path / "o"), "--quiet"])
        assert code == EXIT_SOLVER
        assert code != EXIT_INPUT

    def test_io_failure_is_distinct(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        code = main(["solve", "--out", str(blocker / "out"), "--quiet"])
        assert code == EXIT_IO

    def test_nonpositive_dt_rejected(self, tmp_path):
        code = main(["solve", "--out", str(tmp_path / "o"), "--dt", "0", "--quiet"])
        assert code == EXIT_INPUT


class TestDeterminism:
    def test_solve_outputs_are_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["solve", "--out", str(out1), "--quiet"])
        main(["solve", "--out", str(out2), "--quiet"])
        for name in ("profile.csv", "summary.txt"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_numbers_use_ten_significant_digits(self, tmp_path):
        out = tmp_path / "run"
        main(["solve", "--out", str(out), "--quiet"])
        _, rows = _read_csv(out / "profile.csv")
        cell = rows[len(rows) // 2][1]
        mantissa = cell.replace("-", "").replace(".", "").split("e")[0].lstrip("0")
        assert len(mantissa) <= 10
