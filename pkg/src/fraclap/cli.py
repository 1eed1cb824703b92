"""Command-line entry point: ``fraclap <subcommand> [flags]``.

Exit codes: 0 success (or all criteria pass), 1 a check failed, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import stable_kernel
from .dirichlet_solve import (EllipticProblem, ParabolicProblem, solve_elliptic, solve_parabolic,
                              write_trajectory_csv)
from .domain_geom import Interval, graded_grid
from .fraclap_op import GridFunction
from .killed_mc import MCConfig, mean_exit_time, simulate_killed_paths, survival_curve
from .verify_harness import CHECKS, ConfigError, SweepConfig, bump, emit_report, load_config, run_check
from .weighted_norms import WeightSpec, refinement_study, weighted_lp_norm

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--alpha", type=_floats, help="stability index (comma list for verify)")
    p.add_argument("--p", type=float, help="integrability exponent")
    p.add_argument("--theta", type=float, help="weight exponent")
    p.add_argument("--lambda", dest="lam", type=_floats, help="resolvent parameter(s)")
    p.add_argument("--grid", type=int, help="number of interior nodes")
    p.add_argument("--steps", type=int, help="time steps (per unit time for verify)")
    p.add_argument("--paths", type=int, help="Monte Carlo paths")
    p.add_argument("--dt", type=float, help="Monte Carlo time step")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--config", help="config file with [sweep] and [thresholds] sections")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default: both)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fraclap", description="Fractional Laplacian Dirichlet toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()
    sub.add_parser("kernel", parents=[common], help="tabulate the free stable density")
    sub.add_parser("mc", parents=[common], help="killed Monte Carlo exit statistics on (-1, 1)")
    sub.add_parser("solve-elliptic", parents=[common], help="solve (A - lambda) u = -1 on (-1, 1)")
    sub.add_parser("solve-parabolic", parents=[common], help="evolve a bump on (-1, 1) up to T = 1")
    sub.add_parser("norms", parents=[common], help="weighted norms of the elliptic solution")
    v = sub.add_parser("verify", parents=[common], help="run a verification sweep")
    v.add_argument("check_id", choices=sorted(CHECKS))
    sub.add_parser("report", parents=[common], help="summarise the JSON reports in --out")
    return parser


# -- helpers -----------------------------------------------------------------------

def _base_config(args) -> SweepConfig:
    cfg = load_config(args.config) if args.config else SweepConfig()
    return cfg


def _one(values, name: str, default: float) -> float:
    if values is None:
        return default
    if len(values) != 1:
        raise ConfigError(f"--{name} takes a single value for this subcommand")
    return values[0]


def _out_dir(args, cfg: SweepConfig) -> str:
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    return out


def _write_rows(out: str, stem: str, header: list, rows: list, fmt: str | None) -> None:
    if fmt in (None, "csv"):
        with open(os.path.join(out, f"{stem}.csv"), "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            wr.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
    if fmt in (None, "json"):
        with open(os.path.join(out, f"{stem}.json"), "w") as fh:
            json.dump([dict(zip(header, r)) for r in rows], fh, indent=2)
            fh.write("\n")


# -- subcommands -------------------------------------------------------------------

def cmd_kernel(args, cfg: SweepConfig) -> int:
    alpha = _one(args.alpha, "alpha", 1.0)
    radii = np.round(np.geomspace(1e-2, 1e2, 21), 12)
    rows = stable_kernel.tabulate(alpha, 1, cfg.t, radii)
    _write_rows(_out_dir(args, cfg), "kernel", ["t", "x", "density", "envelope_ratio"],
                [list(r) for r in rows], args.format)
    return EXIT_OK


def cmd_mc(args, cfg: SweepConfig) -> int:
    alpha = _one(args.alpha, "alpha", 1.0)
    run = MCConfig(cfg.seed if args.seed is None else args.seed,
                   cfg.paths if args.paths is None else args.paths,
                   cfg.dt if args.dt is None else args.dt, 60.0 / alpha, Interval(), alpha)
    s = simulate_killed_paths(run, 0.0, workers=cfg.workers)
    m, se = mean_exit_time(s)
    times = np.linspace(0.0, 2.0, 21)
    surv, err = survival_curve(s, times)
    rows = [["mean_exit_time", "", float(m), float(se)]]
    rows += [["survival", float(t), float(v), float(e)] for t, v, e in zip(times, surv, err)]
    _write_rows(_out_dir(args, cfg), "mc", ["quantity", "t", "value", "std_err"], rows, args.format)
    print(f"E_0 tau = {m:.6f} +- {se:.6f}")
    return EXIT_OK


def _elliptic(args, alpha: float, n: int):
    lam = _one(args.lam, "lambda", 0.0)
    g = graded_grid(Interval(), n)
    return solve_elliptic(EllipticProblem(alpha, lam, GridFunction(g, -np.ones(g.size))))


def cmd_solve_elliptic(args, cfg: SweepConfig) -> int:
    alpha = _one(args.alpha, "alpha", 1.0)
    u = _elliptic(args, alpha, args.grid or cfg.grid)
    rows = [[float(x), float(v)] for x, v in zip(u.grid.nodes, u.values)]
    _write_rows(_out_dir(args, cfg), "elliptic", ["x", "u"], rows, args.format)
    return EXIT_OK


def cmd_solve_parabolic(args, cfg: SweepConfig) -> int:
    alpha = _one(args.alpha, "alpha", 1.0)
    g = graded_grid(Interval(), args.grid or cfg.grid)
    u0 = GridFunction(g, bump(g.nodes, 0.0, 0.5))
    steps = args.steps or cfg.steps_per_unit
    tr = solve_parabolic(ParabolicProblem(alpha, 1.0, u0), steps, cfg.scheme,
                         record_every=max(1, steps // 10))
    out = _out_dir(args, cfg)
    if args.format in (None, "csv"):
        write_trajectory_csv(tr, os.path.join(out, "parabolic.csv"))
    if args.format in (None, "json"):
        with open(os.path.join(out, "parabolic.json"), "w") as fh:
            json.dump({"x": tr.grid.nodes.tolist(), "t": tr.times.tolist(),
                       "u": tr.values.tolist()}, fh)
            fh.write("\n")
    return EXIT_OK


def cmd_norms(args, cfg: SweepConfig) -> int:
    alpha = _one(args.alpha, "alpha", 1.0)
    p = 2.0 if args.p is None else args.p
    theta = 1.0 if args.theta is None else args.theta
    base = args.grid or cfg.grid
    sizes = (base, 2 * base, 4 * base)
    rows = []
    for kind, power in (("lp", 0.0), ("lp_psi_minus_half_alpha", -alpha / 2)):
        spec = WeightSpec(p, theta, power)
        res = refinement_study(lambda n: weighted_lp_norm(_elliptic(args, alpha, n), spec), sizes)
        rows.append([kind, p, theta, power, res.value, res.ratio, int(res.divergent)])
    _write_rows(_out_dir(args, cfg), "norms",
                ["norm_kind", "p", "theta", "psi_power", "value", "refinement_ratio",
                 "divergence_flag"], rows, args.format)
    return EXIT_OK


def _verify_config(args, cfg: SweepConfig) -> SweepConfig:
    upd: dict = {"check": args.check_id}
    if args.alpha is not None:
        upd["alpha"] = args.alpha
    if args.lam is not None:
        upd["lam"] = args.lam
    if args.p is not None or args.theta is not None:
        if args.p is None or args.theta is None:
            raise ConfigError("--p and --theta must be given together for verify")
        upd["p_theta"] = ((args.p, args.theta),)
    if args.grid is not None:
        upd["grid"] = args.grid
    if args.steps is not None:
        upd["steps_per_unit"] = args.steps
    for name in ("paths", "dt", "seed", "out"):
        if getattr(args, name) is not None:
            upd[name] = getattr(args, name)
    return replace(cfg, **upd)


def cmd_verify(args, cfg: SweepConfig) -> int:
    cfg = _verify_config(args, cfg)
    report = run_check(cfg)
    code = emit_report(report, cfg.out, args.format or "both")
    status = "PASS" if code == EXIT_OK else "FAIL"
    print(f"{report.check_id}: {status} ({len(report.cases)} cases)")
    for name, ok in report.criteria.items():
        print(f"  {'PASS' if ok else 'FAIL'} {name}")
    return code


def cmd_report(args, cfg: SweepConfig) -> int:
    out = args.out or cfg.out
    paths = sorted(glob.glob(os.path.join(out, "*.json")))
    summary = {}
    for path in paths:
        try:
            with open(path) as fh:
                body = json.load(fh)
        except (OSError, json.JSONDecodeError):
            continue
        if not isinstance(body, dict):
            continue
        for check_id, rep in body.items():
            if check_id in CHECKS and isinstance(rep, dict) and "passed" in rep:
                summary[check_id] = rep
    if not summary:
        print(f"no verification reports found in {out}", file=sys.stderr)
        return EXIT_USAGE
    rows = [[cid, int(rep["passed"]), rep["n_cases"], rep["provenance"].get("config_hash", ""),
             ";".join(k for k, ok in rep["criteria"].items() if not ok)]
            for cid, rep in sorted(summary.items())]
    for r in rows:
        print(f"{'PASS' if r[1] else 'FAIL'} {r[0]} ({r[2]} cases){'  failing: ' + r[4] if r[4] else ''}")
    _write_rows(out, "report", ["check_id", "passed", "n_cases", "config_hash", "failing_criteria"],
                rows, args.format)
    return EXIT_OK if all(r[1] for r in rows) else EXIT_FAIL


COMMANDS = {
    "kernel": cmd_kernel,
    "mc": cmd_mc,
    "solve-elliptic": cmd_solve_elliptic,
    "solve-parabolic": cmd_solve_parabolic,
    "norms": cmd_norms,
    "verify": cmd_verify,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _base_config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"fraclap: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"fraclap: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fraclap: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
