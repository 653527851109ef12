"""Benchmark harness and command line interface.

Subcommands: ``gen`` writes a random instance to JSON, ``qos`` and ``mmf``
solve seeded instances and emit one CSV row per (instance, seed), and
``sweep`` runs a grid of configurations from a JSON file.  Rows are ordered
by (n, k, seed); powers are reported as P_t / sigma^2 in dB to be directly
plot-ready.  Exit code is 0 on full success and 2 if any row failed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import MgbeamError
from .instance import ProblemInstance, generate_instance, load_instance, save_instance
from .mmf import mmf_bisection, min_weighted_sinr, scale_solution
from .pipeline import QosOptions, solve_qos

CSV_COLUMNS = ["mode", "engine", "init", "n", "g", "k", "seed",
               "sinr_target_db", "power_db", "t_s", "t_lower_bound",
               "outer_iters", "inner_iters_total", "init_ok", "wall_ms"]


@dataclass
class RunConfig:
    """One harness cell: what to solve, how, and for which seeds."""

    mode: str = "qos"                  # qos | mmf-scaling | mmf-bisection | gen
    instance_file: str | None = None   # takes precedence over generator params
    n: int = 64
    groups: int = 3
    users: int = 4
    sinr_db: float = 10.0
    sigma2: float = 1.0
    power_db: float = 10.0             # MMF budget as P/sigma^2 in dB
    engine: str = "asca"
    init: str = "aim"
    alpha: float = 0.1
    c: float = 0.8
    rho: float = 0.2
    inner_tol: float | None = None
    outer_tol: float = 1e-3
    max_inner: int = 5000
    max_outer: int = 200
    bis_tol: float = 1e-2
    seeds: list = field(default_factory=lambda: [0])
    out: str | None = None

    def __post_init__(self):
        if self.mode not in ("qos", "mmf-scaling", "mmf-bisection", "gen"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.engine not in ("esca", "asca"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.init not in ("eim", "aim"):
            raise ValueError(f"unknown initializer {self.init!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def options(self) -> QosOptions:
        return QosOptions(engine=self.engine, init=self.init, alpha=self.alpha,
                          c=self.c, rho=self.rho, inner_tol=self.inner_tol,
                          outer_tol=self.outer_tol, max_inner=self.max_inner,
                          max_outer=self.max_outer)

    def config_hash(self) -> str:
        doc = dataclasses.asdict(self)
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True).encode()).hexdigest()[:12]


@dataclass
class RunRecord:
    """One CSV row plus the config hash it came from."""

    mode: str
    engine: str
    init: str
    n: int
    g: int
    k: int
    seed: int
    sinr_target_db: float
    power_db: float = float("nan")
    t_s: float = float("nan")
    t_lower_bound: float = float("nan")
    outer_iters: int = 0
    inner_iters_total: int = 0
    init_ok: bool = False
    wall_ms: float = float("nan")
    config_hash: str = ""
    error: str | None = None

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def _instance_for(cfg: RunConfig, seed: int) -> ProblemInstance:
    if cfg.instance_file is not None:
        return load_instance(cfg.instance_file)
    return generate_instance(cfg.n, cfg.groups, cfg.users, cfg.sinr_db,
                             cfg.sigma2, seed)


def _solve_cell(cfg: RunConfig, seed: int) -> RunRecord:
    inst = _instance_for(cfg, seed)
    gam_db = 10.0 * np.log10(float(np.max(inst.gammas_flat())))
    rec = RunRecord(mode=cfg.mode, engine=cfg.engine, init=cfg.init,
                    n=inst.n, g=inst.num_groups,
                    k=max(inst.group_sizes), seed=seed, sinr_target_db=gam_db,
                    config_hash=cfg.config_hash())
    t0 = time.perf_counter()
    try:
        if cfg.mode == "qos":
            res = solve_qos(inst, cfg.options(), seed=seed)
            rep = res.report
            rec.power_db = 10.0 * np.log10(rep.power / inst.sigma2)
            rec.outer_iters = rep.outer_iters
            rec.inner_iters_total = int(sum(rep.inner_iters))
            rec.init_ok = res.init_ok
            if not rep.feasible:
                rec.error = "infeasible result"
        else:
            P = inst.sigma2 * 10.0 ** (cfg.power_db / 10.0)
            if cfg.mode == "mmf-scaling":
                res = solve_qos(inst, cfg.options(), seed=seed)
                cert = scale_solution(inst, res.report.w, P)
                rec.power_db = cfg.power_db
                rec.t_s = cert.t_s
                rec.t_lower_bound = cert.lower_bound
                rec.outer_iters = res.report.outer_iters
                rec.inner_iters_total = int(sum(res.report.inner_iters))
                rec.init_ok = res.init_ok
            else:  # mmf-bisection
                w, t = mmf_bisection(inst, P, cfg.options(),
                                     bis_tol=cfg.bis_tol, seed=seed)
                rec.power_db = cfg.power_db
                rec.t_s = min_weighted_sinr(inst, w)
                rec.init_ok = True
    except (MgbeamError, ValueError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_ms = 1e3 * (time.perf_counter() - t0)
    return rec


def run(config: RunConfig) -> list:
    """Execute one cell per seed; solver errors go into the row, not up."""
    records = [_solve_cell(config, seed) for seed in config.seeds]
    records.sort(key=lambda r: (r.n, r.k, r.seed))
    return records


def summarize(records: list) -> list:
    """Aggregate records per (mode, engine, init, n, g, k) configuration.

    Returns a list of dicts with mean/stddev of the dB power, t, iteration
    counts, and wall time over the seeds of each configuration.
    """
    if not records:
        raise ValueError("no records to summarize")
    groups = {}
    for r in records:
        groups.setdefault((r.mode, r.engine, r.init, r.n, r.g, r.k),
                          []).append(r)
    out = []
    for key, recs in sorted(groups.items()):
        ok = [r for r in recs if r.error is None]

        def stats(vals):
            vals = [v for v in vals if np.isfinite(v)]
            if not vals:
                return float("nan"), float("nan")
            return float(np.mean(vals)), float(np.std(vals))

        mean_p, std_p = stats([r.power_db for r in ok])
        mean_t, std_t = stats([r.t_s for r in ok])
        mean_it, _ = stats([float(r.inner_iters_total) for r in ok])
        mean_ms, _ = stats([r.wall_ms for r in ok])
        out.append({
            "mode": key[0], "engine": key[1], "init": key[2], "n": key[3],
            "g": key[4], "k": key[5], "runs": len(recs), "failures":
            len(recs) - len(ok), "power_db_mean": mean_p,
            "power_db_std": std_p, "t_mean": mean_t, "t_std": std_t,
            "inner_iters_mean": mean_it, "wall_ms_mean": mean_ms,
        })
    return out


def write_csv(records: list, stream) -> None:
    writer = csv.writer(stream)
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(r.row())


def _add_instance_args(p: argparse.ArgumentParser):
    p.add_argument("--instance", default=None, help="instance JSON file")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--groups", type=int, default=3)
    p.add_argument("--users", type=int, default=4,
                   help="users per group")
    p.add_argument("--sinr-db", type=float, default=10.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--seed", type=int, nargs="+", default=[0],
                   help="one run per seed")


def _add_solver_args(p: argparse.ArgumentParser):
    p.add_argument("--engine", choices=["esca", "asca"], default="asca")
    p.add_argument("--init", choices=["eim", "aim"], default="aim")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--c", type=float, default=0.8)
    p.add_argument("--rho", type=float, default=0.2)
    p.add_argument("--inner-tol", type=float, default=None)
    p.add_argument("--outer-tol", type=float, default=1e-3)
    p.add_argument("--max-inner", type=int, default=5000)
    p.add_argument("--max-outer", type=int, default=200)


def _config_from_args(args, mode: str) -> RunConfig:
    return RunConfig(
        mode=mode, instance_file=args.instance, n=args.n, groups=args.groups,
        users=args.users, sinr_db=args.sinr_db, sigma2=args.sigma2,
        power_db=getattr(args, "power_db", 10.0), engine=args.engine,
        init=args.init, alpha=args.alpha, c=args.c, rho=args.rho,
        inner_tol=args.inner_tol, outer_tol=args.outer_tol,
        max_inner=args.max_inner, max_outer=args.max_outer,
        bis_tol=getattr(args, "bis_tol", 1e-2), seeds=list(args.seed),
        out=args.out)


def _emit(records: list, out: str | None) -> int:
    if out is None:
        write_csv(records, sys.stdout)
    else:
        with open(out, "w", newline="") as fh:
            write_csv(records, fh)
    failures = [r for r in records if r.error is not None]
    for r in failures:
        print(f"row failed (seed {r.seed}): {r.error}", file=sys.stderr)
    return 2 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mgbeam", description="multi-group multicast beamforming bench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate an instance JSON file")
    p_gen.add_argument("--n", type=int, default=64)
    p_gen.add_argument("--groups", type=int, default=3)
    p_gen.add_argument("--users", type=int, default=4)
    p_gen.add_argument("--sinr-db", type=float, default=10.0)
    p_gen.add_argument("--sigma2", type=float, default=1.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_qos = sub.add_parser("qos", help="solve the power-minimization problem")
    _add_instance_args(p_qos)
    _add_solver_args(p_qos)
    p_qos.add_argument("--out", default=None, help="CSV path (default stdout)")

    p_mmf = sub.add_parser("mmf", help="solve the max-min-fair problem")
    _add_instance_args(p_mmf)
    _add_solver_args(p_mmf)
    p_mmf.add_argument("--mode", choices=["scaling", "bisection"],
                       default="scaling")
    p_mmf.add_argument("--power-db", type=float, default=10.0,
                       help="power budget P/sigma^2 in dB")
    p_mmf.add_argument("--bis-tol", type=float, default=1e-2)
    p_mmf.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="run a grid of configurations")
    p_sweep.add_argument("--grid", required=True,
                         help="JSON file: list of RunConfig field dicts")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--summary", action="store_true",
                         help="print the aggregate table to stderr")

    args = parser.parse_args(argv)

    if args.command == "gen":
        inst = generate_instance(args.n, args.groups, args.users,
                                 args.sinr_db, args.sigma2, args.seed)
        save_instance(inst, args.out)
        return 0

    if args.command == "qos":
        cfg = _config_from_args(args, "qos")
        return _emit(run(cfg), cfg.out)

    if args.command == "mmf":
        mode = "mmf-scaling" if args.mode == "scaling" else "mmf-bisection"
        cfg = _config_from_args(args, mode)
        return _emit(run(cfg), cfg.out)

    # sweep
    with open(args.grid) as fh:
        cells = json.load(fh)
    if not isinstance(cells, list):
        raise SystemExit("grid file must contain a JSON list of configs")
    records = []
    for cell in cells:
        records.extend(run(RunConfig(**cell)))
    records.sort(key=lambda r: (r.n, r.k, r.seed))
    code = _emit(records, args.out)
    if args.summary:
        for row in summarize(records):
            print(row, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
