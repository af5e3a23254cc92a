"""Radial solutions of -u'' - (N-1)/r u' + u = a(r) u^(p-1) on [R, r_max].

The discretization is a vertex-centred finite-volume scheme: the
stiffness uses the exact mean of r^(N-1) over each cell [r_i, r_{i+1}]
and the mass uses r_i^(N-1) h, so that the residual below is the exact gradient of
`radial_energy` (up to the constant sphere area).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import InvalidArgument, NoConvergence
from .geometry import ProblemSpec, sphere_area
from .report import SolveReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadialGrid:
    R: float
    r_max: float
    M: int
    N: int

    def __post_init__(self):
        if self.M < 2:
            raise InvalidArgument("radial grid needs M >= 2")
        if not self.r_max > self.R > 0:
            raise InvalidArgument("need 0 < R < r_max")

    @classmethod
    def for_spec(cls, spec: ProblemSpec, M: int = 4096) -> "RadialGrid":
        return cls(spec.R, spec.r_max, M, spec.N)

    @property
    def h(self) -> float:
        return (self.r_max - self.R) / self.M

    @property
    def nodes(self) -> np.ndarray:
        return self.R + self.h * np.arange(self.M + 1)

    @property
    def faces(self) -> np.ndarray:
        return self.R + self.h * (np.arange(self.M) + 0.5)

    @property
    def weights(self) -> np.ndarray:
        w = self.nodes ** (self.N - 1) * self.h
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @property
    def face_weights(self) -> np.ndarray:
        """Mean of r^(N-1) over each face interval, divided by h.

        This is the coefficient of (u_{i+1} - u_i)^2 / 2 in the energy.
        """
        r = self.nodes
        n = self.N
        return (r[1:] ** n - r[:-1] ** n) / (n * self.h * self.h)


@dataclass(frozen=True)
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.M + 1,):
            raise InvalidArgument("profile length does not match the grid")
        if v[0] != 0 or v[-1] != 0:
            raise InvalidArgument("profile must vanish at both ends")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, fn) -> "RadialProfile":
        v = np.asarray(fn(grid.nodes), dtype=float).copy()
        v[0] = v[-1] = 0.0
        return cls(grid, v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes


# ---------------------------------------------------------------------------
# discrete integrals


def gradient_sq(u: RadialProfile) -> float:
    """sum over faces of r^(N-1) ((u_{i+1}-u_i)/h)^2 h."""
    du = np.diff(u.values)
    return float(np.sum(u.grid.face_weights * du * du))


def mass_sq(u: RadialProfile) -> float:
    return float(np.sum(u.grid.weights * u.values ** 2))


def h1_sq(u: RadialProfile) -> float:
    return gradient_sq(u) + mass_sq(u)


def _weight_values(spec: ProblemSpec, grid: RadialGrid) -> np.ndarray:
    return spec.weight(grid.nodes, 0.0)


def nonlinear_integral(u: RadialProfile, spec: ProblemSpec) -> float:
    a = _weight_values(spec, u.grid)
    return float(np.sum(u.grid.weights * a * np.abs(u.values) ** spec.p))


def radial_energy(u: RadialProfile, spec: ProblemSpec) -> float:
    """Energy of the radial lift, omega_{N-1} * (1/2 |u|_H1^2 - 1/p int a |u|^p)."""
    if not spec.weight.is_radial:
        raise InvalidArgument("radial energy needs a radial weight")
    val = 0.5 * h1_sq(u) - nonlinear_integral(u, spec) / spec.p
    return sphere_area(spec.N - 1) * val


def nehari_residual(u: RadialProfile, spec: ProblemSpec) -> float:
    h1 = h1_sq(u)
    return abs(h1 - nonlinear_integral(u, spec)) / h1


def hardy_check(u: RadialProfile, spec: ProblemSpec):
    """Both sides of the Hardy inequality int u^2/r^2 <= (2/(N-2))^2 int u'^2."""
    if u.values[0] != 0:
        raise InvalidArgument("Hardy's inequality needs u(R) = 0")
    g = u.grid
    lhs = float(np.sum(g.weights * u.values ** 2 / g.nodes ** 2))
    rhs = (2.0 / (spec.N - 2)) ** 2 * gradient_sq(u)
    ratio = lhs / rhs if rhs > 0 else 0.0
    return lhs, rhs, ratio


# ---------------------------------------------------------------------------
# tridiagonal operators on interior nodes 1..M-1


def _stiffness_bands(grid: RadialGrid):
    """Banded (3, M-1) form of the stiffness plus mass matrix K + W."""
    fw = grid.face_weights
    w = grid.weights[1:-1]
    diag = fw[:-1] + fw[1:] + w
    off = -fw[1:-1]
    ab = np.zeros((3, grid.M - 1))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return ab


def _apply_bands(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = ab[1] * x
    y[:-1] += ab[0, 1:] * x[1:]
    y[1:] += ab[2, :-1] * x[:-1]
    return y


class _RadialSystem:
    """Residual F(u) = (K + W) u - W a |u|^(p-2) u and its Jacobian."""

    def __init__(self, spec: ProblemSpec, grid: RadialGrid, p: Optional[float] = None):
        self.spec = spec
        self.grid = grid
        self.p = spec.p if p is None else p
        self.ab = _stiffness_bands(grid)
        self.w = grid.weights[1:-1]
        self.a = _weight_values(spec, grid)[1:-1]

    def residual(self, x: np.ndarray) -> np.ndarray:
        return _apply_bands(self.ab, x) - self.w * self.a * np.abs(x) ** (self.p - 2) * x

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        jb = self.ab.copy()
        jb[1] -= (self.p - 1) * self.w * self.a * np.abs(x) ** (self.p - 2)
        return jb

    def norm(self, f: np.ndarray) -> float:
        # dual norm of a residual against the mass weights
        return float(np.sqrt(np.sum(f * f / self.w)))

    def scale(self, x: np.ndarray) -> float:
        return self.norm(_apply_bands(self.ab, x))

    def invariance(self, x: np.ndarray) -> np.ndarray:
        rhs = self.w * self.a * np.abs(x) ** (self.p - 2) * x
        return solve_banded((1, 1), self.ab, rhs)

    def nehari_factor(self, x: np.ndarray) -> float:
        h1 = float(x @ _apply_bands(self.ab, x))
        nl = float(np.sum(self.w * self.a * np.abs(x) ** self.p))
        if nl <= 0:
            return math.nan
        return (h1 / nl) ** (1.0 / (self.p - 2))


def damped_newton(residual, jacobian_solve, x0, norm, tol=1e-12, max_iter=60,
                  min_step=1e-6, scale=None):
    """Damped Newton with backtracking on the residual norm.

    ``jacobian_solve(x, f)`` returns J(x)^{-1} f.  Stops when
    norm(F) <= tol * scale(x).  Returns (x, iterations, history); raises
    NoConvergence with the last iterate otherwise.
    """
    x = np.array(x0, dtype=float)
    f = residual(x)
    fn = norm(f)
    history = [fn]
    for it in range(1, max_iter + 1):
        ref = scale(x) if scale is not None else 1.0
        if fn <= tol * ref:
            return x, it - 1, history
        dx = jacobian_solve(x, f)
        lam = 1.0
        while True:
            xt = x - lam * dx
            ft = residual(xt)
            fnt = norm(ft)
            if np.all(np.isfinite(ft)) and fnt < (1 - 1e-4 * lam) * fn:
                break
            lam *= 0.5
            if lam < min_step:
                raise NoConvergence("Newton line search failed", iterate=x, history=history)
        x, f, fn = xt, ft, fnt
        history.append(fn)
    ref = scale(x) if scale is not None else 1.0
    if fn <= tol * ref:
        return x, max_iter, history
    raise NoConvergence("Newton iteration limit reached", iterate=x, history=history)


def default_guess(spec: ProblemSpec, grid: RadialGrid, p: Optional[float] = None) -> np.ndarray:
    """(r-R) exp(-(r-R)) scaled onto the Nehari set; interior nodes only."""
    r = grid.nodes[1:-1]
    x = (r - grid.R) * np.exp(-(r - grid.R))
    t = _RadialSystem(spec, grid, p).nehari_factor(x)
    return t * x


def _solve_at(system: _RadialSystem, x0: np.ndarray, tol: float, warm_iters: int):
    x = x0.copy()
    # normalized invariance steps: each decreases the Nehari energy, which
    # keeps the iterate in the basin of the positive solution
    for _ in range(warm_iters):
        v = system.invariance(x)
        v = system.nehari_factor(v) * v
        change = np.max(np.abs(v - x)) / np.max(np.abs(v))
        x = v
        if change < 1e-3:
            break

    def jsolve(xx, f):
        return solve_banded((1, 1), system.jacobian(xx), f)

    x, its, hist = damped_newton(system.residual, jsolve, x, system.norm, tol=tol,
                                 scale=system.scale)
    if np.max(x) <= 0 or np.min(x) < -1e-10 * np.max(x):
        raise NoConvergence("Newton converged to a non-positive state", iterate=x, history=hist)
    return x, its, hist


def solve_radial(spec: ProblemSpec, grid: Optional[RadialGrid] = None,
                 init: Optional[RadialProfile] = None, tol: float = 1e-10,
                 warm_iters: int = 200):
    """Positive radial solution on ``grid``; returns (profile, report).

    Damped Newton from a Nehari-scaled guess (after a few normalized
    invariance steps); if that fails, continuation in p from p = 2.5 in
    steps of 0.5.
    """
    if not spec.weight.is_radial:
        raise InvalidArgument("radial solve needs a radial weight")
    if grid is None:
        grid = RadialGrid.for_spec(spec)
    system = _RadialSystem(spec, grid)
    flags = []
    if init is not None:
        x0 = np.asarray(init.values[1:-1], dtype=float)
        x0 = system.nehari_factor(x0) * x0
    else:
        x0 = default_guess(spec, grid)
    try:
        x, its, hist = _solve_at(system, x0, tol, warm_iters)
    except NoConvergence as exc:
        log.info("cold start failed (%s); continuing in p", exc)
        flags.append("continuation")
        ps = list(np.arange(2.5, spec.p, 0.5)) + [spec.p]
        x = default_guess(spec, grid, ps[0])
        its = 0
        hist = []
        last = exc
        for pk in ps:
            sys_k = _RadialSystem(spec, grid, pk)
            x = sys_k.nehari_factor(x) * x
            try:
                x, k_its, k_hist = _solve_at(sys_k, x, tol, warm_iters)
            except NoConvergence as inner:
                last = inner
                raise NoConvergence(f"continuation failed at p={pk}", iterate=inner.iterate,
                                    history=hist + inner.history) from last
            its += k_its
            hist += k_hist
    x = np.maximum(x, 0.0)
    vals = np.concatenate([[0.0], x, [0.0]])
    prof = RadialProfile(grid, vals)
    res = system.norm(system.residual(x)) / system.scale(x)
    rep = SolveReport(
        energy=radial_energy(prof, spec),
        nehari_residual=nehari_residual(prof, spec),
        projected_grad_norm=res,
        symmetry_metric=0.0,
        iterations=its,
        converged=True,
        flags=flags,
        history=hist,
    )
    log.debug("radial solve: %d Newton steps, residual %.3e", its, res)
    return prof, rep


# ---------------------------------------------------------------------------
# persistence


def write_profile(u: RadialProfile, path, comments=()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        g = u.grid
        fh.write(f"# grid N={g.N} R={float(g.R)!r} r_max={float(g.r_max)!r} M={g.M}\n")
        for r, v in zip(u.r, u.values):
            fh.write(f"{float(r)!r} {float(v)!r}\n")


def read_profile(path, N: Optional[int] = None) -> RadialProfile:
    """Read a two-column (r, u) file; the grid comes from the '# grid' line if present."""
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# grid "):
                meta = dict(item.split("=") for item in line[7:].split())
                break
    data = np.loadtxt(path, comments="#", ndmin=2)
    r, v = data[:, 0], data[:, 1]
    if meta:
        grid = RadialGrid(float(meta["R"]), float(meta["r_max"]), int(meta["M"]), int(meta["N"]))
        if grid.M != len(r) - 1:
            raise InvalidArgument("profile length disagrees with its grid line")
    else:
        if N is None:
            raise InvalidArgument("profile without a grid line needs N")
        grid = RadialGrid(float(r[0]), float(r[-1]), len(r) - 1, N)
    return RadialProfile(grid, v)
