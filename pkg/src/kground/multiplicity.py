"""Families of K-ground states over the admissible splittings m.

For each m the problem reduces to a different (r, theta_m) plane, so the
fields cannot be compared pointwise.  Distinctness is structural: two
solutions with different splittings can only be rotations of each other
when both are radial, so any nonradial pair is nonequivalent.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import quadform, radial, solver2d
from .errors import InvalidArgument, SolverError
from .geometry import ProblemSpec, conditions_report
from .grid2d import Field, Grid2D
from .report import SolveReport, dump_json

log = logging.getLogger(__name__)

THRESHOLD_FLOOR = 1e-4


@dataclass
class MRecord:
    m: int
    energy: float = math.nan
    symmetry_metric: float = math.nan
    predicted: Optional[bool] = None
    nonradial: bool = False
    start: str = ""
    error: str = ""
    report: Optional[SolveReport] = None
    field: Optional[Field] = None

    def as_dict(self) -> dict:
        out = {"m": self.m, "energy": self.energy, "symmetry_metric": self.symmetry_metric,
               "predicted": self.predicted, "nonradial": self.nonradial,
               "start": self.start, "error": self.error}
        if self.report is not None:
            out["report"] = self.report.flat()
        return out


@dataclass
class FamilyResult:
    N: int
    p: float
    R: float
    radial_energy: float
    threshold: float
    records: list
    labels: list                     # "radial", then "m=<m>" for each record
    distinct: np.ndarray             # pairwise nonequivalence over labels
    multiplicity: int
    guaranteed: int
    flags: list = field(default_factory=list)

    def record(self, m: int) -> MRecord:
        for rec in self.records:
            if rec.m == m:
                return rec
        raise KeyError(m)

    def as_dict(self) -> dict:
        return {
            "N": self.N, "p": self.p, "R": self.R,
            "radial_energy": self.radial_energy,
            "threshold": self.threshold,
            "records": [r.as_dict() for r in self.records],
            "labels": list(self.labels),
            "distinct": self.distinct.astype(int).tolist(),
            "multiplicity": self.multiplicity,
            "guaranteed": self.guaranteed,
            "flags": list(self.flags),
        }

    def write_json(self, path) -> None:
        dump_json(self.as_dict(), path)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "energy", "metric", "verdict"])
            w.writerow(["radial", repr(self.radial_energy), "0.0", "radial"])
            for r in self.records:
                verdict = r.error and "error" or ("nonradial" if r.nonradial else "radial")
                w.writerow([r.m, repr(r.energy), repr(r.symmetry_metric), verdict])


def nonequivalence_check(u_m: Field, u_mp: Field, threshold: float = 1e-2,
                         energies: Optional[tuple] = None, rtol: float = 1e-6) -> bool:
    """True when the two solutions cannot be rotations of one another.

    Both nonradial: true.  Both radial: false.  Mixed: true, with the
    energies (when given) used as a secondary witness.
    """
    if u_m.grid.N != u_mp.grid.N:
        raise InvalidArgument("fields live in different dimensions")
    if u_m.grid.m == u_mp.grid.m:
        raise InvalidArgument("nonequivalence_check needs different splittings")
    a = solver2d.symmetry_metric(u_m) > threshold
    b = solver2d.symmetry_metric(u_mp) > threshold
    if a and b:
        return True
    if not a and not b:
        return False
    if energies is not None:
        e1, e2 = energies
        if abs(e1 - e2) <= rtol * max(abs(e1), abs(e2)):
            log.warning("radial/nonradial pair with equal energies")
    return True


def radiality_threshold_calibration(spec: ProblemSpec, M: int = 512, J: int = 64,
                                    tol: float = 1e-7) -> float:
    """10x the symmetry metric of a theta-constant solve, floored at 1e-4."""
    grid = Grid2D.for_spec(spec, M, J)
    if spec.weight.is_radial:
        prof, _ = radial.solve_radial(spec, grid.radial)
        init = Field.radial_lift(grid, prof.values)
    else:
        init = Field.radial_lift(grid, solver2d.default_envelope(grid))
    try:
        u, _ = solver2d.ground_state(spec, init=init, grid=grid, tol=tol, max_iter=200)
    except SolverError as exc:
        u = exc.iterate
    return max(10.0 * solver2d.symmetry_metric(u), THRESHOLD_FLOOR)


def _solve_m(spec: ProblemSpec, M: int, J: int, prof_values, seed: int, eps: float, tol: float,
             max_iter: int) -> MRecord:
    rec = MRecord(m=spec.m)
    grid = Grid2D.for_spec(spec, M, J)
    starts = [("perturbed-radial", solver2d.perturbed_radial_init(grid, prof_values, eps))]
    rng = np.random.default_rng([seed, spec.m])
    starts.append(("random-cone", solver2d.random_cone_init(grid, prof_values, rng)))
    errors = []
    for name, init in starts:
        try:
            u, rep = solver2d.ground_state(spec, init=init, grid=grid, tol=tol, max_iter=max_iter)
        except SolverError as exc:
            errors.append(f"{name}: {exc}")
            continue
        if rec.report is None or rep.energy < rec.energy:
            rec.energy, rec.report, rec.field, rec.start = rep.energy, rep, u, name
            rec.symmetry_metric = rep.symmetry_metric
    if rec.report is None:
        rec.error = "; ".join(errors)
    return rec


def run_family(spec: ProblemSpec, m_list: Sequence[int], M: int = 512, J: int = 64,
               seed: int = 0, eps: float = 0.3, tol: float = 1e-7, max_iter: int = 5000,
               threshold: Optional[float] = None, jobs: int = 1) -> FamilyResult:
    """One radial solve, then a two-start ground-state solve per splitting m.

    ``spec.m`` is ignored; each entry of ``m_list`` is validated on its own
    and a bad entry is recorded as an error without stopping the family.
    """
    if not spec.weight.is_radial:
        raise InvalidArgument("families are defined for radial weights")
    N, p, R = spec.N, spec.p, spec.R
    rgrid = Grid2D(N, spec.m, R, spec.r_max, M, J).radial
    prof, rrep = radial.solve_radial(spec, rgrid)
    if threshold is None:
        threshold = radiality_threshold_calibration(spec, M, J, tol)

    specs = {}
    records = {}
    m_list = [int(m) for m in m_list]
    for m in m_list:
        try:
            sm = spec.replace(m=m)
            sm.require_subcritical()
            specs[m] = sm
        except InvalidArgument as exc:
            records[m] = MRecord(m=m, error=f"range: {exc}")

    args = [(specs[m], M, J, prof.values, seed, eps, tol, max_iter) for m in specs]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_solve_m_star, args))
    else:
        done = [_solve_m(*a) for a in args]
    for rec in done:
        records[rec.m] = rec

    flags = []
    recs = [records[m] for m in m_list]
    for rec in recs:
        if rec.error:
            continue
        rec.nonradial = rec.symmetry_metric > threshold
        qf = quadform.quadratic_form(prof, specs[rec.m])
        rec.predicted = qf.predicted_nonradial
        if not rec.energy > 0:
            flags.append(f"m={rec.m}: nonpositive energy")
        if rec.predicted and not rec.energy < rrep.energy:
            flags.append(f"m={rec.m}: predicted breaking not observed")

    labels = ["radial"] + [f"m={r.m}" for r in recs]
    n = len(labels)
    distinct = np.zeros((n, n), dtype=bool)
    ok = [True] + [not r.error for r in recs]
    nonrad = [False] + [r.nonradial for r in recs]
    for i in range(n):
        for j in range(i + 1, n):
            if not (ok[i] and ok[j]):
                continue
            # different splittings coincide only if both are radial
            d = nonrad[i] or nonrad[j]
            distinct[i, j] = distinct[j, i] = d
    # count classes: the radial solution plus every nonradial splitting
    multiplicity = 1 + sum(1 for k in range(1, n) if ok[k] and nonrad[k])
    table = conditions_report(N, p, R)
    if multiplicity > table.multiplicity:
        flags.append(f"claimed {multiplicity} exceeds guaranteed {table.multiplicity}")
    return FamilyResult(N=N, p=p, R=R, radial_energy=rrep.energy, threshold=threshold,
                        records=recs, labels=labels, distinct=distinct,
                        multiplicity=multiplicity, guaranteed=table.multiplicity, flags=flags)


def _solve_m_star(a):
    return _solve_m(*a)
