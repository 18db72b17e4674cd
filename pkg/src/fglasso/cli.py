"""Command-line front end: generate instances, build covariances, run the
solvers, score estimates, and benchmark the two methods side by side.

Subcommands: gen, cov, solve, metrics, bench. Values resolve in the order
defaults < command-line flags < config file (a config file is the final
word so saved runs replay exactly). Exit codes: 0 success, 2 when a solve
did not converge, 1 on usage or I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .admm import AdmmParams, admm_solve
from .data import edge_metrics, gen_nearest_neighbour, sample_covariance
from .io import (
    FormatError,
    parse_record,
    read_obs,
    read_smc,
    write_jsonl,
    write_obs,
    write_record,
    write_smc,
)
from .linalg import MatrixCollection
from .prox import ProblemData
from .rppa import RppaParams, rppa_solve

__all__ = [
    "RunConfig",
    "cmd_gen",
    "cmd_cov",
    "cmd_solve",
    "cmd_metrics",
    "cmd_bench",
    "build_parser",
    "main",
]


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for solve/bench runs."""

    input: str
    solver: str = "rppa"
    grid: tuple = ((0.1, 0.05),)
    tol: float = 1e-6
    sigma0: Optional[float] = None
    max_outer: Optional[int] = None
    max_iter: Optional[int] = None
    warm_start_iters: Optional[int] = None
    seeds: tuple = ()
    out: str = "."
    trace: Optional[str] = None

    def __post_init__(self):
        if not self.grid:
            raise ValueError("lambda grid must be non-empty")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.solver not in ("rppa", "admm"):
            raise ValueError(f"unknown solver {self.solver!r}")
        for pair in self.grid:
            if len(pair) != 2 or pair[0] < 0 or pair[1] < 0:
                raise ValueError("grid entries must be nonnegative (lambda1, lambda2) pairs")


def _hms(seconds: float) -> str:
    s = int(round(seconds))
    return f"{s // 3600}:{s % 3600 // 60:02d}:{s % 60:02d}"


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def cmd_gen(p: int, L: int, m: int, n_samples: int, seed: int, out_dir) -> dict:
    """Write a synthetic instance: truth.smc, one classK.obs per class, and
    a manifest.txt record. Deterministic per seed (byte-identical re-runs)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inst = gen_nearest_neighbour(p, L, m, seed, n_samples=n_samples)
    truth_path = out / "truth.smc"
    write_smc(truth_path, inst.true_precisions)
    obs_paths = []
    for l, obs in enumerate(inst.samples, start=1):
        path = out / f"class{l}.obs"
        write_obs(path, obs)
        obs_paths.append(path)
    manifest = out / "manifest.txt"
    write_record(
        manifest,
        {
            "p": p,
            "L": L,
            "m": m,
            "n_samples": n_samples,
            "seed": seed,
            "n_edges_true": inst.n_edges_true,
        },
    )
    return {"truth": truth_path, "obs": obs_paths, "manifest": manifest}


def cmd_cov(inputs: Sequence, out) -> Path:
    """Read one OBS file per class and write their sample covariances as a
    single SMC collection."""
    if not inputs:
        raise ValueError("need at least one observation file")
    covs = []
    for path in inputs:
        obs = read_obs(path)
        covs.append(sample_covariance(obs))
    p = covs[0].shape[0]
    for path, c in zip(inputs, covs):
        if c.shape[0] != p:
            raise FormatError(f"{path}: variable count {c.shape[0]} != {p}")
    out = Path(out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_smc(out, MatrixCollection(np.stack(covs)))
    return out


def _solve_one(data: ProblemData, cfg: RunConfig, solver: str):
    if solver == "rppa":
        kw = {"tol": cfg.tol}
        if cfg.sigma0 is not None:
            kw["sigma0"] = cfg.sigma0
        if cfg.max_outer is not None:
            kw["max_outer"] = cfg.max_outer
        if cfg.warm_start_iters is not None:
            kw["warm_start_iters"] = cfg.warm_start_iters
        return rppa_solve(data, RppaParams(**kw))
    kw = {"tol": cfg.tol}
    if cfg.sigma0 is not None:
        kw["sigma0"] = cfg.sigma0
    if cfg.max_iter is not None:
        kw["max_iter"] = cfg.max_iter
    return admm_solve(data, AdmmParams(**kw))


def _trace_rows(run_idx, lam1, lam2, report):
    return [
        {
            "run": run_idx,
            "lambda1": lam1,
            "lambda2": lam2,
            "k": row.k,
            "sigma": row.sigma,
            "eta": row.eta,
            "newton": row.newton,
            "cg": row.cg,
            "objective": row.objective,
        }
        for row in report.trace
    ]


def _write_trace(path, rows):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".jsonl":
        write_jsonl(path, rows)
        return
    lines = ["# run lambda1 lambda2 k sigma eta newton cg objective"]
    for r in rows:
        lines.append(
            f"{r['run']} {r['lambda1']:.17g} {r['lambda2']:.17g} {r['k']} "
            f"{r['sigma']:.17g} {r['eta']:.17g} {r['newton']} {r['cg']} {r['objective']:.17g}"
        )
    path.write_text("\n".join(lines) + "\n")


def cmd_solve(config: RunConfig) -> list:
    """Run the configured solver on every grid point.

    Writes theta_K.smc and result_K.txt per grid point (1-based K) into
    config.out, plus a combined trace file when config.trace is set
    (JSON-lines when the path ends in .jsonl, whitespace columns otherwise).
    Returns the list of SolverReports.
    """
    S = read_smc(config.input)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    all_rows = []
    for idx, (lam1, lam2) in enumerate(config.grid, start=1):
        data = ProblemData(S=S, lambda1=lam1, lambda2=lam2)
        report = _solve_one(data, config, config.solver)
        reports.append(report)
        write_smc(out / f"theta_{idx}.smc", report.Theta)
        em = edge_metrics(report.Theta, report.Theta)
        write_record(
            out / f"result_{idx}.txt",
            {
                "solver": config.solver,
                "lambda1": lam1,
                "lambda2": lam2,
                "tol": config.tol,
                "converged": report.converged,
                "eta": report.eta_p,
                "objective": report.objective,
                "iterations": report.outer_iters,
                "total_newton": report.total_newton,
                "total_cg": report.total_cg,
                "seconds": report.seconds,
                "nnz": em.nnz,
                "density": em.density,
            },
        )
        all_rows.extend(_trace_rows(idx, lam1, lam2, report))
        print(
            f"[{idx}/{len(config.grid)}] {config.solver} lambda1={lam1:g} lambda2={lam2:g} "
            f"iters={report.outer_iters} eta={report.eta_p:.3e} "
            f"objective={report.objective:.9g} converged={report.converged}"
        )
        for w in report.warnings:
            print(f"  warning: {w}", file=sys.stderr)
    if config.trace:
        _write_trace(config.trace, all_rows)
    return reports


def cmd_metrics(est, truth, out=None):
    """Score an estimated SMC collection against a truth SMC collection and
    write/print the metrics as a key=value record."""
    est_c = read_smc(est)
    truth_c = read_smc(truth)
    em = edge_metrics(est_c, truth_c)
    record = {
        "tp_edges": em.tp_edges,
        "fp_edges": em.fp_edges,
        "sse": em.sse,
        "tp_diff": em.tp_diff,
        "fp_diff": em.fp_diff,
        "nnz": em.nnz,
        "density": em.density,
    }
    if out is not None:
        write_record(out, record)
    for k, v in record.items():
        print(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}")
    return em


def cmd_bench(config: RunConfig) -> list:
    """Run both solvers on every grid point and tabulate the comparison.

    Per (grid point, solver) the row holds iterations, Newton/CG counts,
    wall time, residual, objective, nnz, and density; each grid point also
    gets the cross-solver objective gap
    delta_obj = (obj_admm - obj_rppa) / (1 + |obj_admm| + |obj_rppa|).
    Failures are flagged on the row and the sweep continues. Rows are
    ordered by grid index. Written as JSON lines to config.out when it ends
    in .jsonl, else as blank-line-separated records; a table goes to stdout.
    """
    S = read_smc(config.input)
    rows = []
    for idx, (lam1, lam2) in enumerate(config.grid, start=1):
        data = ProblemData(S=S, lambda1=lam1, lambda2=lam2)
        objs = {}
        for solver in ("rppa", "admm"):
            row = {
                "run": idx,
                "solver": solver,
                "lambda1": lam1,
                "lambda2": lam2,
                "tol": config.tol,
            }
            try:
                report = _solve_one(data, config, solver)
                em = edge_metrics(report.Theta, report.Theta)
                row.update(
                    iterations=report.outer_iters,
                    total_newton=report.total_newton,
                    total_cg=report.total_cg,
                    seconds=report.seconds,
                    eta=report.eta_p,
                    objective=report.objective,
                    nnz=em.nnz,
                    density=em.density,
                    converged=report.converged,
                    error="",
                )
                objs[solver] = report.objective
            except (RuntimeError, np.linalg.LinAlgError) as e:
                row.update(
                    iterations=0,
                    total_newton=0,
                    total_cg=0,
                    seconds=0.0,
                    eta=float("inf"),
                    objective=float("nan"),
                    nnz=0,
                    density=0.0,
                    converged=False,
                    error=str(e),
                )
            rows.append(row)
        if len(objs) == 2:
            delta = (objs["admm"] - objs["rppa"]) / (1.0 + abs(objs["admm"]) + abs(objs["rppa"]))
        else:
            delta = float("nan")
        for row in rows[-2:]:
            row["delta_obj"] = delta

    header = (
        f"{'run':>3} {'solver':<5} {'lam1':>8} {'lam2':>8} {'iters':>6} {'newton':>6} "
        f"{'cg':>7} {'time':>9} {'eta':>10} {'objective':>16} {'nnz':>8} {'density':>8} ok"
    )
    print(header)
    print("-" * len(header))
    for r in rows:
        flag = "yes" if r["converged"] else ("ERR" if r["error"] else "no")
        print(
            f"{r['run']:>3} {r['solver']:<5} {r['lambda1']:>8.4g} {r['lambda2']:>8.4g} "
            f"{r['iterations']:>6} {r['total_newton']:>6} {r['total_cg']:>7} "
            f"{_hms(r['seconds']):>9} {r['eta']:>10.2e} {r['objective']:>16.9g} "
            f"{r['nnz']:>8} {r['density']:>8.4f} {flag}"
        )
    deltas = {r["run"]: r["delta_obj"] for r in rows}
    for idx in sorted(deltas):
        print(f"delta_obj[{idx}] = {deltas[idx]:.3e}")

    if config.out and config.out != ".":
        out = Path(config.out)
        if out.parent and not out.parent.exists():
            out.parent.mkdir(parents=True, exist_ok=True)
        if out.suffix == ".jsonl":
            write_jsonl(out, rows)
        else:
            chunks = []
            for r in rows:
                chunks.append("\n".join(f"{k}={v}" for k, v in r.items()))
            out.write_text("\n\n".join(chunks) + "\n")
    return rows


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 (not 2) on usage errors, reserving 2 for
    non-converged solves."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_grid(text: str) -> tuple:
    pairs = []
    for chunk in str(text).split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ValueError(f"bad grid entry {chunk!r}; expected lambda1:lambda2")
        pairs.append((float(parts[0]), float(parts[1])))
    if not pairs:
        raise ValueError("empty lambda grid")
    return tuple(pairs)


def _parse_seeds(value) -> tuple:
    if isinstance(value, int):
        return (value,)
    return tuple(int(s) for s in str(value).split(",") if s.strip())


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(input=args.input or "")
    # flags override defaults
    updates = {}
    if args.input is not None:
        updates["input"] = args.input
    if args.solver is not None:
        updates["solver"] = args.solver
    if args.lambda1 is not None or args.lambda2 is not None:
        lam1 = args.lambda1 if args.lambda1 is not None else cfg.grid[0][0]
        lam2 = args.lambda2 if args.lambda2 is not None else cfg.grid[0][1]
        updates["grid"] = ((lam1, lam2),)
    if getattr(args, "grid", None) is not None:
        updates["grid"] = _parse_grid(args.grid)
    if args.tol is not None:
        updates["tol"] = args.tol
    if args.sigma0 is not None:
        updates["sigma0"] = args.sigma0
    if getattr(args, "max_outer", None) is not None:
        updates["max_outer"] = args.max_outer
    if getattr(args, "max_iter", None) is not None:
        updates["max_iter"] = args.max_iter
    if getattr(args, "warm_start_iters", None) is not None:
        updates["warm_start_iters"] = args.warm_start_iters
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    if args.out is not None:
        updates["out"] = args.out
    if getattr(args, "trace", None) is not None:
        updates["trace"] = args.trace
    cfg = replace(cfg, **updates)
    # config file overrides flags
    if args.config is not None:
        rec = parse_record(Path(args.config).read_text())
        file_updates = {}
        if "input" in rec:
            file_updates["input"] = str(rec["input"])
        if "solver" in rec:
            file_updates["solver"] = str(rec["solver"])
        if "lambda_grid" in rec:
            file_updates["grid"] = _parse_grid(rec["lambda_grid"])
        elif "lambda1" in rec or "lambda2" in rec:
            base = file_updates.get("grid", cfg.grid)[0]
            file_updates["grid"] = (
                (float(rec.get("lambda1", base[0])), float(rec.get("lambda2", base[1]))),
            )
        if "tol" in rec:
            file_updates["tol"] = float(rec["tol"])
        if "sigma0" in rec:
            file_updates["sigma0"] = float(rec["sigma0"])
        if "max_outer" in rec:
            file_updates["max_outer"] = int(rec["max_outer"])
        if "max_iter" in rec:
            file_updates["max_iter"] = int(rec["max_iter"])
        if "warm_start_iters" in rec:
            file_updates["warm_start_iters"] = int(rec["warm_start_iters"])
        if "seeds" in rec:
            file_updates["seeds"] = _parse_seeds(rec["seeds"])
        if "out" in rec:
            file_updates["out"] = str(rec["out"])
        if "trace" in rec:
            file_updates["trace"] = str(rec["trace"])
        cfg = replace(cfg, **file_updates)
    if not cfg.input:
        raise ValueError("an input SMC file is required (--input or config input=)")
    return cfg


def _add_run_flags(sp, with_trace=True):
    sp.add_argument("--input", help="input covariance collection (SMC file)")
    sp.add_argument("--solver", choices=("rppa", "admm"), help="solver (default rppa)")
    sp.add_argument("--lambda1", type=float, help="element penalty weight (default 0.1)")
    sp.add_argument("--lambda2", type=float, help="fusion penalty weight (default 0.05)")
    sp.add_argument("--grid", help="lambda grid 'l1:l2,l1:l2,...' (overrides --lambda1/2)")
    sp.add_argument("--tol", type=float, help="target KKT residual (default 1e-6)")
    sp.add_argument("--sigma0", type=float, help="initial proximal/penalty parameter")
    sp.add_argument("--max-outer", type=int, dest="max_outer", help="outer iteration cap")
    sp.add_argument("--max-iter", type=int, dest="max_iter", help="splitting iteration cap")
    sp.add_argument(
        "--warm-start-iters", type=int, dest="warm_start_iters", help="warm-start iteration cap"
    )
    sp.add_argument("--seed", type=int, help="seed recorded with the run")
    sp.add_argument("--out", help="output directory or file")
    if with_trace:
        sp.add_argument("--trace", help="trace file (.jsonl for JSON lines)")
    sp.add_argument("--config", help="key=value config file; overrides flags")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fglasso", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic instance")
    g.add_argument("--p", type=int, required=True, help="number of variables")
    g.add_argument("--L", type=int, required=True, help="number of classes")
    g.add_argument("--m", type=int, required=True, help="neighbour count")
    g.add_argument("--n", type=int, default=0, help="samples per class (default 0)")
    g.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    g.add_argument("--out", default=".", help="output directory (default .)")
    g.set_defaults(func=_run_gen)

    c = sub.add_parser("cov", help="sample covariances from observation files")
    c.add_argument("inputs", nargs="+", help="OBS files, one per class, in class order")
    c.add_argument("--out", required=True, help="output SMC file")
    c.set_defaults(func=_run_cov)

    s = sub.add_parser("solve", help="estimate precision matrices")
    _add_run_flags(s)
    s.set_defaults(func=_run_solve)

    m = sub.add_parser("metrics", help="score an estimate against the truth")
    m.add_argument("--est", required=True, help="estimated SMC file")
    m.add_argument("--truth", required=True, help="ground-truth SMC file")
    m.add_argument("--out", help="record file to write")
    m.set_defaults(func=_run_metrics)

    b = sub.add_parser("bench", help="compare both solvers on a lambda grid")
    _add_run_flags(b, with_trace=False)
    b.set_defaults(func=_run_bench)
    return parser


def _run_gen(args) -> int:
    cmd_gen(args.p, args.L, args.m, args.n, args.seed, args.out)
    return 0


def _run_cov(args) -> int:
    cmd_cov(args.inputs, args.out)
    return 0


def _run_solve(args) -> int:
    reports = cmd_solve(_config_from_args(args))
    return 0 if all(r.converged for r in reports) else 2


def _run_metrics(args) -> int:
    cmd_metrics(args.est, args.truth, args.out)
    return 0


def _run_bench(args) -> int:
    rows = cmd_bench(_config_from_args(args))
    return 0 if all(r["converged"] for r in rows) else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        code = e.code
        return int(code) if code is not None else 0
    try:
        return args.func(args)
    except (FormatError, OSError, ValueError) as e:
        print(f"fglasso: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
