"""Experiment runner: parses a config, dispatches an estimator, writes artifacts.

Every subcommand writes into the output directory:

    <name>.csv        delimited results, columns quantity,level,mean,stderr,n,dt,h,seed
    summary.json      list of {quantity, value, stderr, threshold, pass}
    manifest.json     config echo, tool version, timestamp, seed, outputs, duration

Exit status: 0 all configured thresholds met, 1 a threshold failed (the
summary names the failing quantity), 2 config error, 3 solver failure.
CSV and summary contents are deterministic functions of the config (no
timestamps), so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, ExperimentConfig, build_config, config_echo,
                     load_config)
from .estimators import (cauchy_initial_check, contraction_check,
                         dissipation_profile, energy_profile, heat_convergence,
                         hz_coupling_diagnostic, ito_product_residual,
                         monotonicity_gap, renorm_residual, test_function)
from .initialdata import make_initial
from .plap_step import SolverFailure
from .sde import evolve, sample_brownian

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

_CSV_HEADER = ("quantity", "level", "mean", "stderr", "n", "dt", "h", "seed")


def _fmt_num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return repr(float(x))


def _write_csv(path: Path, rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt_num(v) if not isinstance(v, str) else v
                             for v in row])


def _row(cfg: ExperimentConfig, quantity: str, level, mean, stderr, n=None,
         dt=None) -> tuple:
    return (quantity, level, mean, stderr,
            cfg.n_paths if n is None else n,
            cfg.dt if dt is None else dt, cfg.grid.h, cfg.seed)


def _entry(quantity: str, value, stderr, threshold, passed) -> dict:
    return {"quantity": quantity,
            "value": None if value is None else float(value),
            "stderr": None if stderr is None else float(stderr),
            "threshold": None if threshold is None else float(threshold),
            "pass": bool(passed)}


# ---------------------------------------------------------------------------
# subcommand implementations: each returns (csv rows, summary entries)
# ---------------------------------------------------------------------------

def _run_simulate(cfg: ExperimentConfig):
    u0 = make_initial(cfg.initial, cfg.grid)
    path = sample_brownian(cfg.seed, cfg.simulate_path_index, cfg.n_steps, cfg.dt)
    traj = evolve(u0, cfg.noise, path, cfg.p, cfg.resolved_eps())
    rows = []
    for j in range(traj.n_steps + 1):
        t = j * cfg.dt
        for idx, val in enumerate(traj.values[j], start=1):
            rows.append(("state", t, val, 0.0, idx, cfg.dt, cfg.grid.h, cfg.seed))
    final_l1 = cfg.grid.h * float(np.sum(np.abs(traj.values[-1])))
    entries = [_entry("final_l1_norm", final_l1, 0.0, None, True)]
    return rows, entries


def _run_contraction(cfg: ExperimentConfig):
    rep = contraction_check(cfg)
    rows = []
    for t, r, se in zip(rep.times, rep.ratio, rep.ratio_stderr):
        rows.append(_row(cfg, "contraction_ratio", t, r, se))
    threshold = rep.threshold(cfg.contraction_slack_a, cfg.contraction_slack_b, cfg.dt)
    entries = [_entry("contraction_ratio_max", rep.ratio_max,
                      rep.rel_stderr_at_max * rep.ratio_max, threshold,
                      rep.ratio_max <= threshold)]
    for delta, worst, bound in rep.ito_corrections:
        rows.append(_row(cfg, "ito_correction_max", delta, worst, 0.0))
        entries.append(_entry(f"ito_correction_max_delta_{delta:g}", worst, 0.0,
                              bound, worst <= bound))
    return rows, entries


def _run_energy(cfg: ExperimentConfig):
    rep = energy_profile(cfg, cfg.k_levels)
    rows, entries = [], []
    for k, lhs, c_k in rep.levels:
        rows.append(_row(cfg, "truncated_energy", k, lhs.mean, lhs.stderr))
        rows.append(_row(cfg, "energy_bound", k, c_k, 0.0))
        threshold = c_k * (1.0 + cfg.energy_slack) \
            + cfg.energy_stderr_mult * lhs.stderr
        entries.append(_entry(f"truncated_energy_k_{k:g}", lhs.mean, lhs.stderr,
                              threshold, lhs.mean <= threshold))
    return rows, entries


def _run_dissipation(cfg: ExperimentConfig):
    rep = dissipation_profile(cfg, cfg.dissipation_levels)
    by_level = {k: r for k, r in rep.levels}
    rows = [_row(cfg, "band_energy", k, r.mean, r.stderr) for k, r in rep.levels]
    rows.append(_row(cfg, "observed_max", "", rep.observed_max, 0.0))
    d_lo = by_level[cfg.dissipation_lo]
    d_hi = by_level[cfg.dissipation_hi]
    threshold = cfg.dissipation_max_ratio * d_lo.mean
    entries = [_entry(f"band_energy_k_{cfg.dissipation_hi:g}", d_hi.mean,
                      d_hi.stderr, threshold, d_hi.mean <= threshold)]
    tail_ok = True
    for k, r in rep.levels:
        if k >= rep.observed_max and r.mean != 0.0:
            tail_ok = False
    entries.append(_entry("band_energy_tail_beyond_range", 0.0, 0.0, 0.0, tail_ok))
    return rows, entries


def _residual_sweep(cfg: ExperimentConfig, sweep, runner):
    dts = tuple(sweep) if sweep else (cfg.dt,)
    reports = []
    for dt in sorted(dts, reverse=True):
        reports.append(runner(cfg.with_overrides(dt=dt)))
    return reports


def _run_renorm(cfg: ExperimentConfig):
    S = cfg.S.build()
    psi = test_function(cfg.psi, cfg.grid)
    reports = _residual_sweep(cfg, cfg.renorm_dt_sweep,
                              lambda c: renorm_residual(c, S, psi))
    rows, entries = [], []
    for rep in reports:
        rows.append(_row(cfg, "renorm_residual_mean", rep.dt, rep.mean,
                         rep.stderr, dt=rep.dt))
        rows.append(_row(cfg, "renorm_residual_rms", rep.dt, rep.rms, 0.0,
                         dt=rep.dt))
    finest = reports[-1]
    bound = cfg.renorm_stderr_mult * finest.stderr
    entries.append(_entry("renorm_residual_mean", finest.mean, finest.stderr,
                          bound, abs(finest.mean) <= bound))
    if len(reports) >= 2:
        xs = np.log([r.dt for r in reports])
        ys = np.log([r.rms for r in reports])
        slope = float(np.polyfit(xs, ys, 1)[0])
        rows.append(_row(cfg, "renorm_rms_order", "", slope, 0.0))
        entries.append(_entry("renorm_rms_order", slope, 0.0,
                              cfg.renorm_min_order,
                              slope >= cfg.renorm_min_order))
    return rows, entries


def _run_ito_product(cfg: ExperimentConfig):
    H = cfg.H.build()
    Z = cfg.Z.build()
    reports = _residual_sweep(cfg, cfg.ito_dt_sweep,
                              lambda c: ito_product_residual(c, H, Z))
    rows, entries = [], []
    for rep in reports:
        rows.append(_row(cfg, "ito_product_residual_mean", rep.dt, rep.mean,
                         rep.stderr, dt=rep.dt))
        rows.append(_row(cfg, "ito_product_residual_rms", rep.dt, rep.rms, 0.0,
                         dt=rep.dt))
    finest = reports[-1]
    bound = cfg.ito_stderr_mult * finest.stderr
    entries.append(_entry("ito_product_residual_mean", finest.mean,
                          finest.stderr, bound, abs(finest.mean) <= bound))
    for prev, cur in zip(reports, reports[1:]):
        entries.append(_entry(f"ito_product_rms_decrease_dt_{cur.dt:g}",
                              cur.rms, 0.0, prev.rms, cur.rms <= prev.rms))
    return rows, entries


def _run_cauchy(cfg: ExperimentConfig):
    rows, entries = [], []
    gaps = []
    for n, m in cfg.cauchy_pairs:
        rep = cauchy_initial_check(cfg, n, m)
        rows.append(_row(cfg, "cauchy_lhs", f"{n:g}:{m:g}", rep.lhs.mean,
                         rep.lhs.stderr))
        rows.append(_row(cfg, "cauchy_rhs", f"{n:g}:{m:g}", rep.rhs, 0.0))
        threshold = rep.rhs * (1.0 + cfg.cauchy_slack) \
            + cfg.cauchy_stderr_mult * rep.lhs.stderr
        entries.append(_entry(f"cauchy_gap_{n:g}_{m:g}", rep.lhs.mean,
                              rep.lhs.stderr, threshold,
                              rep.lhs.mean <= threshold))
        gaps.append(rep)
    for prev, cur in zip(gaps, gaps[1:]):
        slack = cfg.cauchy_stderr_mult * (prev.lhs.stderr + cur.lhs.stderr)
        entries.append(_entry(
            f"cauchy_gap_monotone_{cur.level_n:g}_{cur.level_m:g}",
            cur.lhs.mean, cur.lhs.stderr, prev.lhs.mean + slack,
            cur.lhs.mean <= prev.lhs.mean + slack))
    return rows, entries


def _run_monotonicity(cfg: ExperimentConfig):
    rows, entries = [], []
    for n, m in cfg.mono_pairs:
        res = monotonicity_gap(cfg, n, m, cfg.mono_k)
        rows.append(_row(cfg, "monotonicity_gap", f"{n:g}:{m:g}", res.mean,
                         res.stderr))
        floor = -1e-12 * (1.0 + abs(res.mean))
        entries.append(_entry(f"monotonicity_gap_{n:g}_{m:g}", res.mean,
                              res.stderr, floor, res.mean >= floor))
    return rows, entries


def _run_hz(cfg: ExperimentConfig):
    H = cfg.H.build()
    Z = cfg.Z.build()
    rows, entries = [], []
    results = []
    for n, m in cfg.hz_pairs:
        res = hz_coupling_diagnostic(cfg, n, m, H, Z)
        rows.append(_row(cfg, "hz_coupling", f"{n:g}:{m:g}", res.mean, res.stderr))
        results.append(((n, m), res))
    for (pk, prev), (ck, cur) in zip(results, results[1:]):
        slack = 3.0 * (prev.stderr + cur.stderr)
        entries.append(_entry(f"hz_decreasing_{ck[0]:g}_{ck[1]:g}", cur.mean,
                              cur.stderr, prev.mean + slack,
                              cur.mean <= prev.mean + slack))
    if not entries:
        ((n, m), res) = results[0]
        entries.append(_entry(f"hz_coupling_{n:g}_{m:g}", res.mean, res.stderr,
                              None, True))
    return rows, entries


def _run_heat(cfg: ExperimentConfig):
    rep = heat_convergence(cfg)
    rows, entries = [], []
    for n_cells, dt, err in rep.levels:
        rows.append(("heat_rel_error", n_cells, err, 0.0, 1, dt,
                     cfg.grid.length / n_cells, cfg.seed))
    entries.append(_entry("heat_rel_error", rep.levels[0][2], 0.0,
                          cfg.heat_max_rel_err,
                          rep.levels[0][2] <= cfg.heat_max_rel_err))
    for idx, gain in enumerate(rep.gains):
        rows.append(("heat_refinement_gain", idx, gain, 0.0, 1, cfg.heat_dt,
                     cfg.grid.length / cfg.heat_n_cells, cfg.seed))
        entries.append(_entry(f"heat_refinement_gain_{idx}", gain, 0.0,
                              cfg.heat_min_gain, gain >= cfg.heat_min_gain))
    return rows, entries


_SUBCOMMANDS = {
    "simulate": _run_simulate,
    "verify-contraction": _run_contraction,
    "verify-energy": _run_energy,
    "verify-dissipation": _run_dissipation,
    "verify-renorm": _run_renorm,
    "verify-ito-product": _run_ito_product,
    "verify-cauchy": _run_cauchy,
    "diag-monotonicity": _run_monotonicity,
    "diag-hz": _run_hz,
    "convergence-heat": _run_heat,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plaplab",
        description="Stochastic p-Laplace laboratory: run verification experiments")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="path to a flat key=value config file")
        sp.add_argument("--seed", type=int, default=None,
                        help="override mc.seed")
        sp.add_argument("--paths", type=int, default=None,
                        help="override mc.n_paths")
        sp.add_argument("--dt", type=float, default=None,
                        help="override time.dt")
        sp.add_argument("--workers", type=int, default=None,
                        help="override mc.workers")
        sp.add_argument("--out-dir", type=str, default=None,
                        help="output directory (default results/<subcommand>)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    t_start = time.perf_counter()

    try:
        cfg, issues = load_config(args.config)
    except (OSError, ConfigError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.paths is not None:
        overrides["n_paths"] = args.paths
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        cfg = cfg.with_overrides(**overrides)
        _, issues = build_config(config_echo(cfg))

    if issues:
        for issue in issues:
            print(f"config error: {issue}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out_dir) if args.out_dir else Path("results") / args.subcommand
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        rows, entries = _SUBCOMMANDS[args.subcommand](cfg)
    except SolverFailure as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    csv_path = out_dir / f"{args.subcommand}.csv"
    _write_csv(csv_path, rows)
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(entries, fh, indent=2)
        fh.write("\n")

    manifest = {
        "tool": "plaplab",
        "version": __version__,
        "subcommand": args.subcommand,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": cfg.seed,
        "config": config_echo(cfg),
        "outputs": [csv_path.name, summary_path.name],
        "duration_seconds": time.perf_counter() - t_start,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    failed = [e["quantity"] for e in entries if not e["pass"]]
    for e in entries:
        status = "PASS" if e["pass"] else "FAIL"
        print(f"{status} {e['quantity']}: value={e['value']} "
              f"threshold={e['threshold']}")
    if failed:
        print(f"threshold failures: {', '.join(failed)}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
