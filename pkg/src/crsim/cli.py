"""Command-line front end.

Subcommands:
  simulate   run the scenario grid, write results.csv and manifest.json
  fit        fit the two models to a subject-level CSV (time, cause, arm)
  summarize  print a results CSV as an aligned table
  plot       render the estimate and bias figures from a results CSV

Configuration comes from an optional JSON file of flat key/value pairs
(unknown keys are rejected), overridden by environment variables with the
CRSIM_ prefix, overridden by command-line flags.

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or input
schema, 3 model non-convergence (fit only).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import TrialData
from .engine import Z_975, ScenarioGrid, run_grid
from .estimators import FitResult, fit_cox, fit_fine_gray
from .reporting import read_results_csv, render_bias_plot, render_estimate_plot, write_results_csv

ENV_PREFIX = "CRSIM_"

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3

# accepted top-level keys of the JSON config; everything else fails closed
CONFIG_KEYS = {
    "alphas", "lambda2s", "theta2s",
    "lambda1", "theta1", "n_subjects", "censor_lo", "censor_hi",
    "n_reps", "master_seed", "workers", "out_dir",
}

RESULTS_FILENAME = "results.csv"
MANIFEST_FILENAME = "manifest.json"


class CommandError(Exception):
    """Raised for anticipated failures; carries the process exit code."""

    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CommandError(EXIT_USAGE, f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise CommandError(EXIT_USAGE, f"config {path} must be a JSON object")
    unknown = sorted(set(raw) - CONFIG_KEYS)
    if unknown:
        raise CommandError(EXIT_USAGE,
                           f"config {path} has unknown keys: {', '.join(unknown)}")
    return raw


def _resolve_run_config(args) -> tuple[ScenarioGrid, Path, int]:
    """Merge config file, environment and flags into a validated run setup."""
    config_path = args.config or _env("CONFIG")
    cfg = _load_config_file(config_path) if config_path else {}

    def pick(flag_value, env_name: str, key: str, default, convert):
        if flag_value is not None:
            return flag_value
        env_value = _env(env_name)
        if env_value is not None:
            try:
                return convert(env_value)
            except ValueError as exc:
                raise CommandError(EXIT_USAGE,
                                   f"bad {ENV_PREFIX}{env_name} value {env_value!r}") from exc
        if key in cfg:
            return cfg[key]
        return default

    seed = pick(args.seed, "SEED", "master_seed", None, int)
    reps = pick(args.reps, "REPS", "n_reps", None, int)
    workers = pick(args.workers, "WORKERS", "workers", 1, int)
    out_dir = pick(args.out, "OUT", "out_dir", "crsim-out", str)

    grid_kwargs = {}
    for key in ("alphas", "lambda2s", "theta2s"):
        if key in cfg:
            grid_kwargs[key] = tuple(cfg[key])
    for key in ("lambda1", "theta1", "n_subjects", "censor_lo", "censor_hi"):
        if key in cfg:
            grid_kwargs[key] = cfg[key]
    if seed is not None:
        grid_kwargs["master_seed"] = seed
    if reps is not None:
        grid_kwargs["n_reps"] = reps
    try:
        grid = ScenarioGrid(**grid_kwargs)
    except (TypeError, ValueError) as exc:
        raise CommandError(EXIT_USAGE, f"invalid configuration: {exc}") from exc
    if not isinstance(workers, int) or workers < 1:
        raise CommandError(EXIT_USAGE, f"workers must be a positive integer (got {workers})")
    return grid, Path(out_dir), workers


def _write_manifest(path: Path, grid: ScenarioGrid) -> None:
    manifest = {
        "master_seed": grid.master_seed,
        "grid": {
            "alphas": list(grid.alphas),
            "lambda2s": list(grid.lambda2s),
            "theta2s": list(grid.theta2s),
            "lambda1": grid.lambda1,
            "theta1": grid.theta1,
            "n_subjects": grid.n_subjects,
            "censor_lo": grid.censor_lo,
            "censor_hi": grid.censor_hi,
            "n_reps": grid.n_reps,
        },
        "versions": {
            "crsim": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_simulate(args) -> int:
    grid, out_dir, workers = _resolve_run_config(args)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot create output directory {out_dir}: {exc}") from exc
    summaries = run_grid(grid, workers=workers)
    write_results_csv(summaries, out_dir / RESULTS_FILENAME)
    _write_manifest(out_dir / MANIFEST_FILENAME, grid)
    degraded = sum(s.degraded for s in summaries)
    print(f"simulated {grid.cell_count()} cells x {grid.n_reps} reps "
          f"(seed {grid.master_seed}, {workers} worker{'s' if workers != 1 else ''})")
    print(f"results: {out_dir / RESULTS_FILENAME}")
    if degraded:
        print(f"warning: {degraded} cells flagged degraded (>10% non-convergence)",
              file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _read_subject_csv(path: str) -> TrialData:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        required = {"time", "cause", "arm"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise CommandError(EXIT_USAGE,
                               f"{path}: header must contain columns time, cause, arm")
        times, causes, arms = [], [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                t = float(row["time"])
                c = int(row["cause"])
                a = int(row["arm"])
                if not (t > 0 and c in (0, 1, 2) and a in (0, 1)):
                    raise ValueError("out-of-range value")
            except (TypeError, ValueError) as exc:
                raise CommandError(
                    EXIT_USAGE,
                    f"{path}: line {lineno}: need time > 0, cause in {{0,1,2}}, "
                    f"arm in {{0,1}} (got {row!r})") from exc
            times.append(t)
            causes.append(c)
            arms.append(a)
    if not times:
        raise CommandError(EXIT_USAGE, f"{path}: no data rows")
    return TrialData(np.array(times), np.array(causes), np.array(arms))


def _fit_report(name: str, result: FitResult) -> dict:
    ci_lo = math.exp(result.log_hr - Z_975 * result.se_log_hr) if result.converged else math.nan
    ci_hi = math.exp(result.log_hr + Z_975 * result.se_log_hr) if result.converged else math.nan
    return {
        "model": name,
        "hr": result.hr if result.converged else math.nan,
        "log_hr": result.log_hr,
        "se_log_hr": result.se_log_hr,
        "ci95_lo": ci_lo,
        "ci95_hi": ci_hi,
        "n_primary_events": result.n_primary_events,
        "converged": result.converged,
        "iterations": result.iterations,
        "reason": result.reason,
    }


def cmd_fit(args) -> int:
    data = _read_subject_csv(args.dataset)
    n_primary, n_competing, n_censored = data.event_counts()
    reports = []
    if args.model in ("cox", "both"):
        reports.append(_fit_report("cox", fit_cox(data)))
    if args.model in ("finegray", "both"):
        reports.append(_fit_report("finegray", fit_fine_gray(data)))

    if args.json:
        payload = {
            "n_subjects": len(data),
            "n_primary": n_primary,
            "n_competing": n_competing,
            "n_censored": n_censored,
            "fits": reports,
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"subjects {len(data)}: {n_primary} primary, "
              f"{n_competing} competing, {n_censored} censored")
        print(f"{'model':<10}{'HR':>8}{'logHR':>9}{'SE':>8}{'95% CI':>18}{'events':>8}")
        for r in reports:
            ci = (f"[{r['ci95_lo']:.3f}, {r['ci95_hi']:.3f}]"
                  if r["converged"] else "[--, --]")
            hr = f"{r['hr']:.3f}" if r["converged"] else "--"
            log_hr = f"{r['log_hr']:.3f}" if r["converged"] else "--"
            se = f"{r['se_log_hr']:.3f}" if r["converged"] else "--"
            print(f"{r['model']:<10}{hr:>8}{log_hr:>9}{se:>8}{ci:>18}"
                  f"{r['n_primary_events']:>8}")

    failed = [r for r in reports if not r["converged"]]
    if failed:
        for r in failed:
            print(f"{r['model']}: did not converge: {r['reason']}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# summarize / plot
# ---------------------------------------------------------------------------

_SUMMARY_COLUMNS = (
    ("alpha", "{:g}"), ("lambda2", "{:g}"), ("theta2", "{:g}"),
    ("mean_hr_cox", "{:.4f}"), ("mean_hr_fg", "{:.4f}"), ("mean_gap", "{:.4f}"),
    ("bias_cox", "{:+.4f}"), ("bias_fg", "{:+.4f}"), ("coverage_cox", "{:.3f}"),
    ("n_converged_cox", "{:d}"), ("n_converged_fg", "{:d}"), ("degraded", "{:d}"),
)


def _read_results_or_die(path: str):
    try:
        return read_results_csv(path)
    except ValueError as exc:
        raise CommandError(EXIT_USAGE, str(exc)) from exc
    except OSError as exc:
        raise CommandError(EXIT_IO, str(exc)) from exc


def cmd_summarize(args) -> int:
    summaries = _read_results_or_die(args.results)
    widths = [max(len(name), 10) for name, _ in _SUMMARY_COLUMNS]
    print("  ".join(name.rjust(w) for (name, _), w in zip(_SUMMARY_COLUMNS, widths)))
    for s in summaries:
        cells = []
        for (name, fmt), w in zip(_SUMMARY_COLUMNS, widths):
            value = getattr(s, name)
            cells.append(fmt.format(int(value) if fmt == "{:d}" else value).rjust(w))
        print("  ".join(cells))
    degraded = sum(s.degraded for s in summaries)
    print(f"# {len(summaries)} cells, {degraded} degraded")
    return EXIT_OK


def cmd_plot(args) -> int:
    summaries = _read_results_or_die(args.results)
    out_dir = Path(args.out if args.out is not None else (_env("OUT") or "crsim-figures"))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot create output directory {out_dir}: {exc}") from exc
    alphas = sorted({s.alpha for s in summaries})
    written = []
    try:
        for a in alphas:
            target = out_dir / f"hr_alpha_{a:g}.svg"
            render_estimate_plot(summaries, a, target)
            written.append(target)
        for model in ("cox", "finegray"):
            target = out_dir / f"bias_{model}.svg"
            render_bias_plot(summaries, model, target)
            written.append(target)
    except ValueError as exc:
        raise CommandError(EXIT_USAGE, str(exc)) from exc
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crsim",
        description="Competing-risks trial simulator and model-fitting tool.",
        epilog=f"Environment overrides: {ENV_PREFIX}CONFIG, {ENV_PREFIX}SEED, "
               f"{ENV_PREFIX}REPS, {ENV_PREFIX}WORKERS, {ENV_PREFIX}OUT "
               "(flags win over environment, environment wins over the config file).",
    )
    parser.add_argument("--version", action="version", version=f"crsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the scenario grid and write results")
    sim.add_argument("--config", help="JSON config file with grid and run settings")
    sim.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
    sim.add_argument("--reps", type=int, help="replications per cell")
    sim.add_argument("--workers", type=int, help="parallel worker processes")
    sim.add_argument("--out", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit models to a subject-level CSV")
    fit.add_argument("dataset", help="CSV with columns time, cause (0/1/2), arm (0/1)")
    fit.add_argument("--model", choices=("cox", "finegray", "both"), default="both")
    fit.add_argument("--json", action="store_true", help="machine-readable output")
    fit.set_defaults(func=cmd_fit)

    summ = sub.add_parser("summarize", help="print a results CSV as a table")
    summ.add_argument("results", help="results CSV from simulate")
    summ.set_defaults(func=cmd_summarize)

    plot = sub.add_parser("plot", help="render figures from a results CSV")
    plot.add_argument("results", help="results CSV from simulate")
    plot.add_argument("--out", help="directory for the SVG files")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"crsim: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"crsim: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
