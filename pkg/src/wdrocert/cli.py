"""Command-line front end: ``wdrocert <subcommand> --config c.json``.

Exit codes: 0 success, 1 usage error, 2 validation or solver error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .certificates import (
    certify,
    certify_reg,
    degeneracy_check,
    generalization_constants,
    lambda_low_numeric,
    rho_max_curve,
)
from .config import ExperimentConfig, parse_config
from .dual import TransportGeometry
from .errors import ConfigError, WdroError
from .losses import family_constants
from .regularized import RegProblem, solve_reg_problem
from .risk import solve_dual_problem

SUBCOMMANDS = ("risk", "reg-risk", "certify", "coverage", "sweep", "excess", "gap", "degeneracy")
DEFAULT_LAMBDA_GRID = [0.0] + [float(v) for v in np.logspace(-3, 3, 61)]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wdrocert", description="Wasserstein DRO solver and certificate toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=_u64, help="override master_seed")
        p.add_argument("--out", help="override output_dir")
        p.add_argument("--workers", type=_positive_int, help="worker threads (default $WDROCERT_WORKERS or 1)")
        p.add_argument("--quiet", action="store_true", help="suppress the summary")
    return parser


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _workers(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("WDROCERT_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"WDROCERT_WORKERS must be an integer, got {env!r}") from exc
    return 1


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _sample(cfg: ExperimentConfig):
    """The empirical distribution used by single-shot subcommands."""
    truth = cfg.build_truth()
    if truth.kind == "dataset" and cfg.n is None:
        return truth.table
    if cfg.n is None:
        raise ConfigError("n is required to sample the empirical distribution", "n")
    return truth.sample(cfg.n, ex.TrialSeed(cfg.master_seed, 0))


def _need_rhos(cfg: ExperimentConfig) -> list[float]:
    if not cfg.rho_values:
        raise ConfigError("rho or rhos is required", "rho")
    return cfg.rho_values


# ----------------------------------------------------------- subcommands


def cmd_risk(cfg, out: Path, workers: int):
    setup = cfg.build_setup()
    Q = _sample(cfg)
    geo = TransportGeometry(Q.atoms, setup.cost, setup.space)
    rows = []
    for theta, f in zip(setup.thetas, setup.members):
        prob = geo.problem(f)
        for rho in _need_rhos(cfg):
            if rho == 0:
                rows.append((theta, rho, float(Q.weights @ prob.f_self), 0.0, 0))
                continue
            r = solve_dual_problem(prob, Q.weights, rho, setup.tol)
            rows.append((theta, rho, r.value, r.lambda_star, r.evaluations))
    path = ex.write_csv(out / "risk.csv", ["theta", "rho", "value", "lambda_star", "evaluations"], rows)
    lines = []
    for rho in _need_rhos(cfg):
        best = min((r for r in rows if r[1] == rho), key=lambda r: r[2])
        lines.append(f"rho={rho:.6g}: min robust risk {best[2]:.6g} at theta={ex.fmt(best[0])}")
    return [path], lines


def cmd_reg_risk(cfg, out: Path, workers: int):
    setup = cfg.build_setup()
    if setup.reg is None:
        raise ConfigError("reg-risk needs a reg block", "reg")
    Q = _sample(cfg)
    m_c = setup.moments.m_c
    rows = []
    first = None
    for theta, f in zip(setup.thetas, setup.members):
        if first is None:
            prob = first = RegProblem(Q.atoms, f, setup.kernel, setup.cost, setup.space, setup.reg)
        else:
            prob = RegProblem(Q.atoms, f, setup.kernel, setup.cost, setup.space, setup.reg,
                              first.nodes, first.logw, first.costs)
        for rho in _need_rhos(cfg):
            r = solve_reg_problem(prob, Q.weights, rho, m_c, setup.tol)
            rows.append((theta, rho, r.value, r.lambda_star, r.evaluations))
    path = ex.write_csv(out / "reg_risk.csv", ["theta", "rho", "value", "lambda_star", "evaluations"], rows)
    return [path], [f"m_c = {m_c:.6g}; {len(rows)} regularized solves"]


def cmd_certify(cfg, out: Path, workers: int):
    setup = cfg.build_setup()
    P_ref = setup.truth.table
    bundle = certify(setup.family, P_ref, setup.cost, setup.space, cfg.delta, tie_tol=cfg.tie_tol)
    doc = {"standard": bundle.to_dict(), "grid": {"theta_grid_size": bundle.theta_grid_size,
                                                   "grid_resolution": bundle.grid_resolution}}
    lines = [
        f"rho_crit (estimate) = {bundle.rho_crit:.6g}",
        f"lambda_low = {bundle.lambda_low:.6g}",
        f"dudley I_F = {bundle.dudley:.6g}, sup_norm = {bundle.sup_norm:.6g} ({bundle.constants_method})",
        f"alpha = {bundle.alpha:.6g}, beta = {bundle.beta:.6g}, n_min = {bundle.n_min:.6g}",
    ]
    if setup.reg is not None:
        rho = cfg.rho if cfg.rho is not None else _need_rhos(cfg)[0]
        reg = certify_reg(setup.family, P_ref, setup.kernel, setup.cost, setup.space, setup.reg, rho, cfg.delta)
        doc["regularized"] = reg.to_dict()
        lines.append(f"regularized: rho_crit = {reg.rho_crit_reg:.6g}, m_c = {reg.m_c:.6g}, "
                     f"lambda_low = {reg.lambda_low_reg:.6g}, vacuous = {reg.vacuous}")
    cert = out / "certificate.json"
    out.mkdir(parents=True, exist_ok=True)
    cert.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    grid = cfg.lambda_grid or DEFAULT_LAMBDA_GRID
    curve = rho_max_curve(setup.family, P_ref, setup.cost, setup.space, grid, cfg.tie_tol)
    path = ex.write_csv(out / "rhomax.csv", ["lambda", "rho_max"], curve)
    return [cert, path], lines


def cmd_coverage(cfg, out: Path, workers: int):
    setup = cfg.build_setup()
    reports = []
    for n in cfg.n_values or [None]:
        if n is None:
            raise ConfigError("n or n_list is required", "n")
        if setup.reg is not None:
            reports += ex.run_coverage_reg(setup, n, _need_rhos(cfg), cfg.trials, cfg.master_seed, workers)
        else:
            reports += ex.run_coverage(setup, n, _need_rhos(cfg), cfg.trials, cfg.master_seed, workers)
    paths = ex.write_coverage(out, reports)
    lines = []
    for r in reports:
        line = f"n={r.n} rho={r.rho:.6g}: coverage {r.coverage:.4f} over {r.trials} trials"
        if r.failures:
            line += f" ({r.failures} solver failures)"
        if r.note:
            line += f" [{r.note}]"
        lines.append(line)
    return paths, lines


def cmd_sweep(cfg, out: Path, workers: int):
    setup = cfg.build_setup()
    if not cfg.n_values:
        raise ConfigError("n_list is required", "n_list")
    rows, _ = ex.sweep_radius_scaling(setup, cfg.n_values, cfg.trials, cfg.target, cfg.master_seed,
                                      cfg.rho_cap, workers=workers)
    path = ex.write_sweep(out, rows)
    lines = [f"n={r.n}: rho*={r.rho_star:.6g}, rho*sqrt(n)={r.rho_star_sqrt_n:.6g}"
             + (" [target unreachable below cap]" if r.flagged else "") for r in rows]
    return [path], lines


def _lambda_low(cfg, setup):
    if cfg.lambda_low is not None:
        return cfg.lambda_low
    return lambda_low_numeric(setup.family, setup.truth.table, setup.cost, setup.space, cfg.tie_tol)


def cmd_gap(cfg, out: Path, workers: int):
    setup = cfg.build_setup()
    if not cfg.n_values:
        raise ConfigError("n or n_list is required", "n")
    lam = _lambda_low(cfg, setup)
    consts = family_constants(setup.family, setup.space, setup.cost.p_norm)
    alpha, _ = generalization_constants(lam, consts.sup_norm, consts.dudley, cfg.delta)
    reports = [ex.measure_uniform_gap(setup, n, lam, cfg.trials, cfg.master_seed, cfg.mu_points, alpha, workers)
               for n in cfg.n_values]
    path = ex.write_gap(out, reports)
    lines = [f"n={g.n}: 95th percentile gap*sqrt(n) = {g.quantile_sqrt_n():.6g}; "
             f"alpha = {alpha:.6g}; fraction with gap <= alpha/sqrt(n) = {g.within_alpha:.4f}" for g in reports]
    return [path], lines


def cmd_excess(cfg, out: Path, workers: int):
    setup = cfg.build_setup()
    if cfg.n is None:
        raise ConfigError("n is required", "n")
    rho = cfg.rho if cfg.rho is not None else _need_rhos(cfg)[0]
    summary = ex.run_excess(setup, cfg.n, rho, cfg.trials, cfg.master_seed, cfg.lambda_low, cfg.mu_points,
                            workers)
    path = ex.write_excess(out, summary)
    return [path], [f"{summary.checks} checks, {summary.violations} violations, min slack {summary.min_slack:.6g}"]


def cmd_degeneracy(cfg, out: Path, workers: int):
    setup = cfg.build_setup()
    P_ref = setup.truth.table
    rows, lines = [], []
    rc = setup.rho_crit
    for rho in _need_rhos(cfg):
        rep = degeneracy_check(setup.family, P_ref, rho, setup.cost, setup.space)
        rows.append((rho, rep.min_gap, rep.theta, rep.degenerate))
        lines.append(f"rho={rho:.6g}: min gap {rep.min_gap:.6g} at theta={ex.fmt(rep.theta)}"
                     + (" [degenerate]" if rep.degenerate else ""))
    path = ex.write_csv(out / "degeneracy.csv", ["rho", "min_gap", "theta", "degenerate"], rows)
    return [path], [f"rho_crit (estimate) = {rc:.6g}"] + lines


COMMANDS = {
    "risk": cmd_risk,
    "reg-risk": cmd_reg_risk,
    "certify": cmd_certify,
    "coverage": cmd_coverage,
    "sweep": cmd_sweep,
    "excess": cmd_excess,
    "gap": cmd_gap,
    "degeneracy": cmd_degeneracy,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "wdrocert: error: a subcommand is required")
        workers = _workers(args.workers)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    try:
        cfg = parse_config(args.config)
        out = Path(args.out if args.out is not None else cfg.output_dir)
        if args.seed is not None:
            cfg = replace(cfg, master_seed=args.seed, _objects={})
        paths, lines = COMMANDS[args.command](cfg, out, workers)
    except (WdroError, ValueError, OSError) as exc:
        print(f"wdrocert {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wdrocert {args.command}")
        for line in lines:
            print(f"  {line}")
        for p in paths:
            print(f"  wrote {p}")
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
