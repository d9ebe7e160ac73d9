#!/usr/bin/env python3
"""Unit tests for the experiment runner and CLI."""

import csv
import json

import pytest
from click.testing import CliRunner

from curvature_ph.config import parse_config
from curvature_ph.criterion import QFormParams, criterion_check, gap_functions
from curvature_ph.runner import (
    CSV_HEADERS,
    EXIT_ERROR,
    EXIT_FAIL,
    EXIT_PASS,
    Logger,
    emit_csv,
    main,
    run_experiment,
)

RANK_ONE = "model = rank_one\na = 1\nn = 4\nr = 2\nc = 1.5\nseed = 7\ncount = 200\n"


def _config(task, extra=""):
    return parse_config(RANK_ONE + f"task = {task}\n" + extra)


def _report(out):
    return json.loads((out / "report.json").read_text())


def _rows(out):
    with open(out / "samples.csv", newline="") as f:
        return list(csv.reader(f))


class TestEmitCsv:
    """Test per-task CSV schemas."""

    @pytest.mark.parametrize("task, header", [
        ("lyapunov", "index,exponent,residual"),
        ("criterion", "sample_id,t,cone_class,q_value,form_value"),
        ("badset", "t,min_form,in_bad_set"),
    ])
    def test_documented_headers(self, task, header):
        assert ",".join(CSV_HEADERS[task]) == header

    def test_criterion_rows(self, rank_one):
        report = criterion_check(rank_one, 2, QFormParams(1.5), 5, 0, refine=False)
        rows = emit_csv("criterion", report)
        assert rows[0] == CSV_HEADERS["criterion"]
        assert len(rows) == 11
        assert [row[2] for row in rows[1:]] == ["C0"] * 5 + ["C+"] * 5
        assert float(rows[1][4]) == report.samples.form_value[0]

    def test_gap_booleans(self, rank_one):
        rows = emit_csv("gap", gap_functions(rank_one, [0.0], 2))
        assert rows[1] == ["0", "2", "1", "3", "true"]

    def test_unknown_task(self):
        with pytest.raises(ValueError, match="Unknown task"):
            emit_csv("plot", None)


class TestRunExperiment:
    """Test report files and the exit-code contract."""

    def test_criterion_pass(self, tmp_path):
        code = run_experiment(_config("criterion"), tmp_path)
        assert code == EXIT_PASS
        report = _report(tmp_path)
        assert report["task"] == "criterion"
        assert report["exit_code"] == 0
        assert report["result"]["verdict"] == "pass"
        assert report["result"]["min_form_boundary"] == pytest.approx(4.0 - 1.5 - 1.0 / 1.5, abs=1e-7)
        assert report["config"]["step"] == 1e-3
        rows = _rows(tmp_path)
        assert rows[0] == CSV_HEADERS["criterion"]
        assert len(rows) == 401

    def test_criterion_fail(self, tmp_path):
        config = parse_config(RANK_ONE.replace("c = 1.5", "c = 4.0") + "task = criterion\n")
        assert run_experiment(config, tmp_path) == EXIT_FAIL
        assert _report(tmp_path)["result"]["verdict"] == "fail"

    def test_execution_error(self, tmp_path, capsys):
        code = run_experiment(_config("lyapunov", "T = 2\n"), tmp_path)
        assert code == EXIT_ERROR
        assert "T must be at least" in capsys.readouterr().err
        assert not (tmp_path / "report.json").exists()

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "results"
        blocker.write_text("not a directory")
        assert run_experiment(_config("gap"), blocker) == EXIT_ERROR
        assert "Cannot write results" in capsys.readouterr().err

    def test_failed_precondition(self, tmp_path):
        config = parse_config(RANK_ONE.replace("c = 1.5", "c = 4.0") + "task = epsilon\n")
        assert run_experiment(config, tmp_path) == EXIT_FAIL

    def test_gap_task(self, tmp_path):
        assert run_experiment(_config("gap"), tmp_path) == EXIT_PASS
        result = _report(tmp_path)["result"]
        assert result["alpha_inf"] == 2.0
        assert result["beta_sup"] == 1.0
        assert result["suggested_e"] == 1.5

    def test_higher_rank_gap_reports_crossing(self, tmp_path):
        config = parse_config("model = higher_rank\nroots = 1, 0; 0, 1\ntask = gap\nr = 1\ngrid = 101\n")
        assert run_experiment(config, tmp_path) == EXIT_FAIL
        result = _report(tmp_path)["result"]
        assert result["uniform_gap"] is False
        assert result["crossings"] == [pytest.approx(0.7853981633974483, abs=1e-9)]
        assert len(_rows(tmp_path)) == 102

    def test_lyapunov_task(self, tmp_path):
        config = _config("lyapunov", "T = 20\nstep = 0.01\n")
        assert run_experiment(config, tmp_path) == EXIT_PASS
        splitting = _report(tmp_path)["result"]["splitting"]
        assert [splitting["stable"], splitting["center"], splitting["unstable"]] == [2, 2, 2]
        assert splitting["matches_rank"] is True
        assert _rows(tmp_path)[0] == ["index", "exponent", "residual"]

    def test_cones_task(self, tmp_path):
        config = parse_config(RANK_ONE.replace("count = 200", "count = 20") + "task = cones\nT = 2\nstep = 0.01\n")
        assert run_experiment(config, tmp_path) == EXIT_PASS
        assert _report(tmp_path)["result"]["fraction_retained"] == 1.0

    def test_badset_task(self, tmp_path):
        config = _config("badset", "T = 1\ndt = 0.1\n")
        assert run_experiment(config, tmp_path) == EXIT_PASS
        rows = _rows(tmp_path)
        assert rows[0] == ["t", "min_form", "in_bad_set"]
        assert {row[2] for row in rows[1:]} == {"false"}

    def test_identical_runs_are_byte_identical(self, tmp_path):
        config = _config("criterion")
        run_experiment(config, tmp_path / "first")
        run_experiment(config, tmp_path / "second")
        for name in ("report.json", "samples.csv"):
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()

    def test_messages_go_to_log(self, tmp_path):
        log_file = tmp_path / "run.log"
        with Logger(log_file) as logger:
            run_experiment(_config("gap"), tmp_path / "out", logger=logger)
        content = log_file.read_text()
        assert "Task 'gap' on model 'rank_one'" in content
        assert "Verdict: pass" in content


class TestCli:
    """Test the click command group."""

    @pytest.fixture
    def config_file(self, tmp_path):
        path = tmp_path / "experiment.conf"
        path.write_text(RANK_ONE + "task = gap\n")
        return path

    def test_subcommand_overrides_task_and_seed(self, tmp_path, config_file):
        runner = CliRunner()
        out = tmp_path / "out"
        result = runner.invoke(main, ["criterion", "--config", str(config_file), "--out", str(out), "--seed", "3"])
        assert result.exit_code == EXIT_PASS
        report = _report(out)
        assert report["task"] == "criterion"
        assert report["config"]["seed"] == 3
        assert "Verdict: pass" in result.output

    def test_all_subcommands_registered(self):
        result = CliRunner().invoke(main, ["--help"])
        assert result.exit_code == 0
        for task in ("criterion", "gap", "lyapunov", "cones", "badset", "epsilon"):
            assert task in result.output

    def test_missing_config_option(self):
        result = CliRunner().invoke(main, ["gap"])
        assert result.exit_code == 2
        assert "--config" in result.output

    def test_invalid_config_exits_with_error(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("model = rank_one\nwidth = 3\n")
        result = CliRunner().invoke(main, ["gap", "--config", str(path)])
        assert result.exit_code == EXIT_ERROR
        assert "line 2: unknown key 'width'" in result.output

    def test_log_file(self, tmp_path, config_file):
        log_file = tmp_path / "gap.log"
        result = CliRunner().invoke(main, [
            "gap", "-c", str(config_file), "-o", str(tmp_path / "out"), "--log", str(log_file), "-p", "none",
        ])
        assert result.exit_code == EXIT_PASS
        content = log_file.read_text()
        assert "Curvature-PH Run Log" in content
        assert "Config:" in content
        assert '"task": "gap"' in content
