#!/usr/bin/env python3
"""
curvature-ph - Config-driven runner for the partial-hyperbolicity criterion.
"""

import csv
import json
import sys
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np

from .config import TASKS, ExperimentConfig, load_config
from .criterion import (
    CriterionReport,
    EpsilonReport,
    GapReport,
    QFormParams,
    corollary_epsilon,
    criterion_check,
    gap_functions,
    negative_curvature_check,
    sample_times,
)
from .estimator import (
    BadSetReport,
    ConeInvarianceReport,
    LyapunovReport,
    cone_invariance_test,
    lyapunov_spectrum,
    splitting_dims,
    time_in_bad_set,
)
from .utils import format_float
from .validate import PreconditionError

CSV_HEADERS = {
    "criterion": ["sample_id", "t", "cone_class", "q_value", "form_value"],
    "gap": ["s", "alpha", "beta", "gap", "defined"],
    "lyapunov": ["index", "exponent", "residual"],
    "cones": ["sample_id", "retained", "exit_time", "final_ratio"],
    "badset": ["t", "min_form", "in_bad_set"],
    "epsilon": ["iteration", "s", "min_form"],
}

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


class Logger:
    """Handles output to both console and optional log file."""

    def __init__(self, log_file=None, append=False):
        self.log_file = log_file
        self.file_handle = None
        if log_file:
            mode = 'a' if append else 'w'
            self.file_handle = open(log_file, mode, encoding='utf-8')
            self._write_header()

    def _write_header(self):
        """Write header with timestamp to log file."""
        if self.file_handle:
            self.file_handle.write(f"\n{'='*60}\n")
            self.file_handle.write(f"Curvature-PH Run Log - {datetime.now().isoformat()}\n")
            self.file_handle.write(f"{'='*60}\n\n")
            self.file_handle.flush()

    def echo(self, message, err=False, to_console=True):
        """Write message to console and/or log file."""
        if to_console:
            click.echo(message, err=err)

        if self.file_handle:
            timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
            if err:
                self.file_handle.write(f"[{timestamp}] ERROR: {message}\n")
            else:
                self.file_handle.write(f"[{timestamp}] {message}\n")
            self.file_handle.flush()

    def write_json(self, data, label="Report"):
        """Write JSON data with proper formatting."""
        json_str = json.dumps(data, indent=2, sort_keys=True)
        self.echo(f"{label}: {json_str}")

    def close(self):
        """Close the log file."""
        if self.file_handle:
            self.file_handle.write(f"\n{'='*60}\n")
            self.file_handle.write(f"Log ended at {datetime.now().isoformat()}\n")
            self.file_handle.write(f"{'='*60}\n")
            self.file_handle.close()
            self.file_handle = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


@dataclass(frozen=True, eq=False)
class TaskResult:
    report: Any
    summary: Dict[str, Any]
    exit_code: int


def _bool(value) -> str:
    return "true" if value else "false"


def emit_csv(task: str, report) -> List[List[str]]:
    """
    Rows of samples.csv for a completed report, header first.

    Args:
        task: Task name, selects the header
        report: Report returned by the task

    Returns:
        List of rows; floats carry 17 significant digits
    """
    if task not in CSV_HEADERS:
        raise ValueError(f"Unknown task '{task}'")
    rows = [list(CSV_HEADERS[task])]
    if task == "criterion":
        for sample_id, t, cone_class, q, form in report.samples.rows():
            rows.append([str(sample_id), format_float(t), cone_class, format_float(q), format_float(form)])
    elif task == "gap":
        for row in report.rows:
            rows.append([format_float(row.sample), format_float(row.alpha), format_float(row.beta),
                         format_float(row.gap), _bool(row.defined)])
    elif task == "lyapunov":
        for index, exponent in enumerate(report.exponents):
            rows.append([str(index), format_float(exponent), format_float(report.residual)])
    elif task == "cones":
        for i in range(report.retained.size):
            rows.append([str(i), _bool(report.retained[i]), format_float(report.exit_times[i]),
                         format_float(report.final_ratios[i])])
    elif task == "badset":
        for t, min_form, bad in zip(report.times, report.min_forms, report.in_bad_set):
            rows.append([format_float(t), format_float(min_form), _bool(bad)])
    else:
        for iteration, s, min_form in report.trace:
            rows.append([str(iteration), format_float(s), format_float(min_form)])
    return rows


def _gap_samples(config: ExperimentConfig):
    spec = config.model
    if spec.name == "higher_rank":
        family = spec.family()
        return family, np.linspace(0.0, spec.direction_path().span, config.grid)
    model = spec.build()
    if model.period is not None and not model.constant:
        return model, np.linspace(0.0, model.period, config.grid, endpoint=False)
    return model, np.asarray(sample_times(model))


def _run_task(config: ExperimentConfig, logger: Logger, progress_mode: str) -> TaskResult:
    task = config.task
    r = config.model.r

    if task == "gap":
        family, samples = _gap_samples(config)
        report: GapReport = gap_functions(family, samples, r)
        summary = report.to_dict()
        if config.model.name == "higher_rank" and len(config.model.roots) > 1:
            summary["crossings"] = family.locate_crossings(samples, 0, 1)
        logger.echo(f"alpha_inf = {report.alpha_inf:.6g}, beta_sup = {report.beta_sup:.6g}, "
                    f"uniform gap: {report.uniform_gap}")
        return TaskResult(report, summary, EXIT_PASS if report.uniform_gap else EXIT_FAIL)

    model = config.model.build()

    if task == "lyapunov":
        report: LyapunovReport = lyapunov_spectrum(
            model, config.T, config.step, config.reorth_period, config.seed,
            progress_mode=progress_mode, logger=logger,
        )
        dims = splitting_dims(report, config.gap_threshold)
        summary = report.to_dict()
        summary["splitting"] = dims.to_dict()
        if r is not None:
            summary["splitting"]["matches_rank"] = dims.matches_rank(r)
        logger.echo(f"Splitting dims (s, c, u) = {dims.as_tuple()}: {dims.verdict}")
        return TaskResult(report, summary, EXIT_PASS)

    params = QFormParams(config.c)

    if task == "criterion":
        if r is None:
            report: CriterionReport = negative_curvature_check(model, config.count, config.seed, logger=logger)
        else:
            report = criterion_check(model, r, params, config.count, config.seed, beta=config.beta, logger=logger)
        return TaskResult(report, report.to_dict(), EXIT_PASS if report.passed else EXIT_FAIL)

    if task == "cones":
        report: ConeInvarianceReport = cone_invariance_test(
            model, r, params, config.T, config.count, config.seed,
            step=config.step, progress_mode=progress_mode, logger=logger,
        )
        return TaskResult(report, report.to_dict(), EXIT_PASS if report.fraction_retained == 1.0 else EXIT_FAIL)

    if task == "badset":
        report: BadSetReport = time_in_bad_set(
            model, r, params, config.T, config.dt, config.beta, config.seed,
            count=config.count, progress_mode=progress_mode, logger=logger,
        )
        return TaskResult(report, report.to_dict(), EXIT_PASS)

    if task == "epsilon":
        report: EpsilonReport = corollary_epsilon(
            model, r, params, config.seed, config.count, blocks=config.blocks, logger=logger,
        )
        return TaskResult(report, report.to_dict(), EXIT_PASS)

    raise ValueError(f"Unknown task '{task}'")


def run_experiment(
    config: ExperimentConfig,
    out_dir: Optional[Path] = None,
    logger: Optional[Logger] = None,
    progress_mode: str = "none",
) -> int:
    """
    Run one experiment and write report.json and samples.csv.

    Reports hold no timestamps or timings, so identical configs give
    byte-identical files.

    Args:
        config: Validated experiment configuration
        out_dir: Output directory (default: config.output)
        logger: Logger for console/log-file output
        progress_mode: 'auto', 'simple', 'bar' or 'none'

    Returns:
        0 on pass or completed task, 1 on a failed verdict, 2 on error
    """
    logger = logger or Logger()
    out = Path(out_dir if out_dir is not None else config.output)
    logger.echo(f"Task '{config.task}' on model '{config.model.name}'")

    try:
        out.mkdir(parents=True, exist_ok=True)
        result = _run_task(config, logger, progress_mode)
        payload = {
            "task": config.task,
            "config": config.to_dict(),
            "result": result.summary,
            "exit_code": result.exit_code,
        }
        with open(out / "report.json", "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        with open(out / "samples.csv", "w", encoding="utf-8", newline="") as f:
            csv.writer(f, lineterminator="\n").writerows(emit_csv(config.task, result.report))
    except PreconditionError as e:
        logger.echo(f"Precondition failed: {e}", err=True)
        return EXIT_FAIL
    except (ValueError, ArithmeticError) as e:
        logger.echo(f"Error: {e}", err=True)
        return EXIT_ERROR
    except OSError as e:
        logger.echo(f"Cannot write results to {out}: {e}", err=True)
        return EXIT_ERROR

    logger.echo(f"Wrote {out / 'report.json'} and {out / 'samples.csv'}")
    logger.echo("✓ Verdict: pass" if result.exit_code == EXIT_PASS else "✗ Verdict: fail")
    return result.exit_code


@click.group()
def main():
    """Quadratic-form criterion for partial hyperbolicity of geodesic flows."""


def _make_command(task: str) -> click.Command:
    @click.command(name=task, help=f"Run the '{task}' task from a config file.")
    @click.option('--config', '-c', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False),
                  help='Experiment config (flat key = value, YAML or JSON)')
    @click.option('--out', '-o', type=click.Path(), help='Output directory (default: config "output")')
    @click.option('--seed', type=int, help='Override the config seed')
    @click.option('--log', 'log_file', type=click.Path(), help='Save output to log file (default: no file output)')
    @click.option('--append', is_flag=True, help='Append to log file instead of overwriting')
    @click.option('--progress-mode', '-p',
                  type=click.Choice(['auto', 'simple', 'bar', 'none']),
                  default='auto',
                  help='Progress display mode (auto detects environment)')
    def command(config_path, out, seed, log_file, append, progress_mode):
        with Logger(log_file, append) as logger:
            try:
                logger.echo(f"Loading config '{config_path}'...")
                config = load_config(Path(config_path), overrides={"task": task, "seed": seed})
            except ValueError as e:
                logger.echo(f"Error: {e}", err=True)
                sys.exit(EXIT_ERROR)
            if logger.file_handle:
                logger.write_json(config.to_dict(), "Config")
            code = run_experiment(config, Path(out) if out else None, logger, progress_mode)
        sys.exit(code)

    return command


for _task in TASKS:
    main.add_command(_make_command(_task))


if __name__ == '__main__':
    main()
