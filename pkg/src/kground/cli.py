"""Command line interface: ``kground <subcommand> --config FILE [options]``.

Exit codes: 0 success, 1 configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import geometry, quadform, radial, solver2d
from .config import RunConfig, parse_config
from .errors import ConfigError, InvalidArgument, NoConvergence, SolverError
from .grid2d import Grid2D
from .report import config_hash, dump_json

log = logging.getLogger("kground")

SWEEP_COLUMNS = ("index", "R", "p", "R_star", "predicted_nonradial", "quadform_raw",
                 "radial_energy", "ground_energy", "symmetry_metric", "status")

SWEEP_HELP = """\
Runs every (R, p) pair from the config keys sweep.R and sweep.p (given as
start:stop:count or a comma list) and writes sweep.csv, one row per pair,
flushed as soon as the row is known.  Columns, in order:

  index                position of the pair in the sweep (R outer, p inner)
  R, p                 radius and exponent
  R_star               threshold radius for the pair
  predicted_nonradial  1 if the second variation at the radial solution is negative
  quadform_raw         value of that second variation
  radial_energy        energy of the radial solution
  ground_energy        energy of the cone-constrained ground state
  symmetry_metric      max |u - angular mean| / max |u| of the ground state
  status               ok, or the error class of a failed row
"""

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    name = os.environ.get("SOLVER_LOG", "quiet").strip().lower()
    level = _LOG_LEVELS.get(name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _parse_grid(text: str):
    try:
        M, J = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must read MxJ, got {text!r}") from None
    if M < 2 or J < 1:
        raise argparse.ArgumentTypeError("grid needs M >= 2 and J >= 1")
    return M, J


def _load(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    overrides = {"seed": args.seed, "solver.tol": args.tol, "output": args.out}
    if args.grid is not None:
        overrides["grid.M"], overrides["grid.J"] = args.grid
    cfg = parse_config(text, overrides)
    cfg.text = text + "\n#overrides " + json.dumps(overrides, sort_keys=True)
    return cfg


def _envelope(cfg: RunConfig) -> dict:
    out = {"config_hash": config_hash(cfg.text)}
    out.update(cfg.summary())
    return out


def _outdir(cfg: RunConfig) -> Path:
    d = Path(cfg.output)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _radial_grid(cfg: RunConfig):
    return radial.RadialGrid.for_spec(cfg.spec)


# ---------------------------------------------------------------------------
# subcommands


def cmd_radial(cfg: RunConfig, args) -> dict:
    prof, rep = radial.solve_radial(cfg.spec, _radial_grid(cfg))
    out = _outdir(cfg)
    radial.write_profile(prof, out / "radial_profile.txt")
    res = _envelope(cfg)
    res.update(radial_M=prof.grid.M, radial_tol=1e-10)
    res.update(rep.flat())
    dump_json(res, out / "radial_report.json")
    return res


def cmd_analyze(cfg: RunConfig, args) -> dict:
    spec = cfg.spec
    prof, rep = radial.solve_radial(spec, _radial_grid(cfg))
    qf = quadform.quadratic_form(prof, spec)
    table = geometry.conditions_report(spec.N, spec.p, spec.R)
    res = _envelope(cfg)
    res.update(radial_M=prof.grid.M, radial_energy=rep.energy)
    res.update(qf.as_dict())
    res["R_star"] = table.R_star
    res["two_star"] = {str(k): v for k, v in table.two_star.items()}
    dump_json(res, _outdir(cfg) / "analyze.json")
    return res


def _initial_field(cfg: RunConfig, grid: Grid2D):
    spec = cfg.spec
    if spec.weight.is_radial:
        prof, _ = radial.solve_radial(spec, grid.radial)
        env = prof.values
    else:
        env = solver2d.default_envelope(grid)
    if cfg.init_kind == "random-cone":
        rng = np.random.default_rng(cfg.seed)
        return solver2d.random_cone_init(grid, env, rng)
    return solver2d.perturbed_radial_init(grid, env, cfg.init_epsilon)


def cmd_solve2d(cfg: RunConfig, args) -> dict:
    spec = cfg.spec
    out = _outdir(cfg)
    res = _envelope(cfg)
    if spec.domain.kind == "double-revolution":
        from .ag import solve_on_Ag

        fld, rep = solve_on_Ag(spec, n=cfg.n_ag, tol=cfg.tol, max_iter=cfg.max_iter)
        g = fld.grid
        header = f"s-t grid n={g.n} L={g.L!r}; rows are s, columns t"
        np.savetxt(out / "ag_field.txt", fld.values, header=header, fmt="%.17g")
    else:
        grid = Grid2D.for_spec(spec, cfg.M, cfg.J)
        u, rep = solver2d.ground_state(spec, init=_initial_field(cfg, grid), grid=grid,
                                       tol=cfg.tol, max_iter=cfg.max_iter)
        solver2d.write_field(u, spec, out / "field.txt")
    res.update(rep.flat())
    dump_json(res, out / "solve2d.json")
    if not rep.converged:
        raise NoConvergence(f"no convergence within {cfg.max_iter} iterations")
    return res


def cmd_family(cfg: RunConfig, args) -> dict:
    from .multiplicity import run_family

    spec = cfg.spec
    m_list = cfg.family_m
    if not m_list:
        table = geometry.conditions_report(spec.N, spec.p, spec.R)
        m_list = list(table.admissible_m) or [spec.m]
    fam = run_family(spec, m_list, M=cfg.M, J=cfg.J, seed=cfg.seed, eps=cfg.init_epsilon,
                     tol=cfg.tol, max_iter=cfg.max_iter, jobs=args.jobs or 1)
    out = _outdir(cfg)
    res = _envelope(cfg)
    res.update(fam.as_dict())
    dump_json(res, out / "family.json")
    fam.write_csv(out / "family.csv")
    return res


def cmd_check_conditions(cfg: RunConfig, args) -> dict:
    spec = cfg.spec
    table = geometry.conditions_report(spec.N, spec.p, spec.R)
    res = _envelope(cfg)
    res.update(table.as_dict())
    dump_json(res, _outdir(cfg) / "conditions.json")
    print(f"N={table.N} p={table.p} R={table.R} R*={table.R_star:.6g} "
          f"solutions={table.multiplicity} m={list(table.admissible_m)}")
    return res


def _sweep_row(job):
    index, cfg, R, p = job
    spec = cfg.spec
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(index=index, R=R, p=p)
    try:
        row["R_star"] = geometry.r_star(spec.N, p)
        s = spec.replace(R=R, p=p, r_max=None)
        prof, rrep = radial.solve_radial(s)
        qf = quadform.quadratic_form(prof, s)
        row.update(predicted_nonradial=int(qf.predicted_nonradial), quadform_raw=qf.raw_value,
                   radial_energy=rrep.energy)
        s.require_subcritical()
        grid = Grid2D.for_spec(s, cfg.M, cfg.J)
        init = solver2d.perturbed_radial_init(grid, prof.values if grid.M == prof.grid.M
                                              else radial.solve_radial(s, grid.radial)[0].values,
                                              cfg.init_epsilon)
        u, rep = solver2d.ground_state(s, init=init, grid=grid, tol=cfg.tol, max_iter=cfg.max_iter)
        row.update(ground_energy=rep.energy, symmetry_metric=rep.symmetry_metric, status="ok")
    except (SolverError, InvalidArgument) as exc:
        row["status"] = type(exc).__name__
    return row


def cmd_sweep(cfg: RunConfig, args) -> dict:
    if not cfg.sweep_R or not cfg.sweep_p:
        raise ConfigError("sweep needs both sweep.R and sweep.p")
    jobs = [(k, cfg, R, p) for k, (R, p) in enumerate(itertools.product(cfg.sweep_R, cfg.sweep_p))]
    out = _outdir(cfg)
    n_jobs = args.jobs or os.cpu_count() or 1
    failed = 0
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        fh.flush()
        if n_jobs > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                for row in pool.map(_sweep_row, jobs):
                    writer.writerow(row)
                    fh.flush()
                    failed += row["status"] != "ok"
        else:
            for job in jobs:
                row = _sweep_row(job)
                writer.writerow(row)
                fh.flush()
                failed += row["status"] != "ok"
    res = _envelope(cfg)
    res.update(rows=len(jobs), failed=failed, jobs=n_jobs)
    dump_json(res, out / "sweep.json")
    return res


COMMANDS = {
    "radial": (cmd_radial, "solve for the positive radial solution"),
    "analyze": (cmd_analyze, "second variation at the radial solution, thresholds"),
    "solve2d": (cmd_solve2d, "cone-constrained ground state (or the A_g solver)"),
    "family": (cmd_family, "ground states for every admissible splitting m"),
    "check-conditions": (cmd_check_conditions, "exponent table and guaranteed solution count"),
    "sweep": (cmd_sweep, "grid of (R, p) runs written to CSV"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides 'output')")
    common.add_argument("--jobs", type=int, metavar="K", help="worker processes for sweep/family")
    common.add_argument("--seed", type=int, metavar="S", help="seed for random initial data")
    common.add_argument("--grid", type=_parse_grid, metavar="MxJ", help="2-D grid size, e.g. 512x64")
    common.add_argument("--tol", type=float, metavar="T", help="solver tolerance")
    parser = argparse.ArgumentParser(
        prog="kground",
        description="Ground states of -Delta u + u = a u^(p-1) on exterior domains.",
        epilog="Set SOLVER_LOG to quiet, info or debug for logging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        kw = {}
        if name == "sweep":
            kw = dict(description=SWEEP_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
        sub.add_parser(name, parents=[common], help=helptext, **kw)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = _load(args)
        res = func(cfg, args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    if args.command != "check-conditions":
        print(json.dumps({k: res[k] for k in ("config_hash",) if k in res}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
