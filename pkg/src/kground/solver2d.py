"""K-ground states of the reduced two-dimensional problem.

The energy

    I(u) = omega_{N,m} [ 1/2 (|u_r|^2 + |u_theta|^2 / r^2 + u^2) - a |u|^p / p ]

is discretized on a `Grid2D` so that its exact gradient is
omega (A u - M a |u|^(p-2) u).  The map B(u) = A^{-1} M a |u|^(p-2) u
(solve -Delta v + v = a u^(p-1)) sends discrete cone fields to cone
fields, and u - B(u) is the H^1 Riesz representative of I'(u).  The
ground-state iteration applies B, projects onto the cone, and rescales
onto the Nehari set; every accepted step lowers the energy.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from .cg import pcg
from .errors import DegenerateDirection, InvalidArgument, Stagnation
from .geometry import ProblemSpec
from .grid2d import ConeField, Field, Grid2D, cone_violation, mu_integral
from .isotonic import project_rows
from .report import SolveReport

log = logging.getLogger(__name__)

TAIL_KS = (4, 8, 16)


def _check(u: Field, spec: ProblemSpec) -> None:
    g = u.grid
    if (g.N, g.m, g.R, g.r_max) != (spec.N, spec.m, spec.R, spec.r_max):
        raise InvalidArgument(f"{g!r} does not match the problem {spec}")


def weight_values(grid: Grid2D, spec: ProblemSpec) -> np.ndarray:
    rr, tt = np.meshgrid(grid.r, grid.theta, indexing="ij")
    return spec.weight(rr, tt)


# ---------------------------------------------------------------------------
# energy and its pieces


def h1_norm_sq(u: Field) -> float:
    return u.grid.omega * u.grid.h1_sq(u.values)


def nonlinear_integral(u: Field, spec: ProblemSpec) -> float:
    a = weight_values(u.grid, spec)
    return u.grid.omega * u.grid.integrate(a * np.abs(u.values) ** spec.p)


def energy(u: Field, spec: ProblemSpec) -> float:
    _check(u, spec)
    return 0.5 * h1_norm_sq(u) - nonlinear_integral(u, spec) / spec.p


def gradient(u: Field, spec: ProblemSpec) -> np.ndarray:
    """Exact gradient of `energy` with respect to the interior nodal values."""
    g = u.grid
    x = g.interior_values(u.values)
    a = g.interior_values(weight_values(g, spec))
    return g.omega * (g.stiffness @ x - g.mass_vector * a * np.abs(x) ** (spec.p - 2) * x)


def nehari_residual(u: Field, spec: ProblemSpec) -> float:
    h1 = h1_norm_sq(u)
    return abs(h1 - nonlinear_integral(u, spec)) / h1


def nehari_scale(u: Field, spec: ProblemSpec) -> float:
    """t > 0 with t u on the Nehari set: t = (|u|^2 / int a |u|^p)^(1/(p-2))."""
    nl = nonlinear_integral(u, spec)
    if not nl > 0:
        raise DegenerateDirection("int a |u|^p vanishes; the ray misses the Nehari set")
    return (h1_norm_sq(u) / nl) ** (1.0 / (spec.p - 2))


def nehari_rescale(u: Field, spec: ProblemSpec) -> Field:
    return u.scaled(nehari_scale(u, spec))


# ---------------------------------------------------------------------------
# linear solve and invariance map


def linear_solve(rhs: Field, method: str = "direct", rtol: float = 1e-10,
                 max_iter: Optional[int] = None) -> Field:
    """Solve A v = M rhs, the weak form of -Delta v + v = rhs with v = 0 at r = R, r_max.

    ``method="direct"`` uses the cached sparse LU factor of A;
    ``method="cg"`` runs Jacobi-preconditioned conjugate gradients and
    raises LinearSolveFailure (with the residual history) on stagnation.
    """
    g = rhs.grid
    b = g.mass_vector * g.interior_values(rhs.values)
    if not np.any(b):
        return Field(g, np.zeros_like(rhs.values))
    A = g.stiffness
    if method == "direct":
        x = g.factor.solve(b)
        res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
        if res > rtol:
            # one step of iterative refinement
            x += g.factor.solve(b - A @ x)
    elif method == "cg":
        dinv = 1.0 / A.diagonal()
        x, _ = pcg(lambda y: A @ y, b, precond=lambda y: dinv * y, rtol=rtol, max_iter=max_iter)
    else:
        raise InvalidArgument(f"unknown linear solver {method!r}")
    return Field(g, g.full_values(x))


def invariance_map(u: Field, spec: ProblemSpec, method: str = "direct") -> Field:
    """B(u): solution of -Delta v + v = a |u|^(p-2) u."""
    a = weight_values(u.grid, spec)
    rhs = a * np.abs(u.values) ** (spec.p - 2) * u.values
    rhs[0] = rhs[-1] = 0.0
    return linear_solve(Field(u.grid, rhs), method=method)


# ---------------------------------------------------------------------------
# cone


def project_cone(u: Field) -> ConeField:
    """Row-wise weighted isotonic projection (nonincreasing in theta), then clamp at 0."""
    g = u.grid
    v = project_rows(u.values, g.cell_mu)
    return ConeField(g, v)


def symmetry_metric(u: Field) -> float:
    """max |u - mean_theta u| / max |u|, with the mu-weighted angular mean."""
    peak = u.max
    if peak == 0:
        raise InvalidArgument("symmetry metric is undefined for the zero field")
    w = u.grid.cell_mu
    mean = (u.values @ w) / np.sum(w)
    return float(np.max(np.abs(u.values - mean[:, None])) / peak)


def tail_constant(N: int, m: int) -> float:
    return 2.0 ** ((N - m - 3) / 2.0)


def tail_bound_check(u: Field, k: int, q: float):
    """Both sides of |u|_q^q(top sector) <= |u|_q^q / (c_{N,m} (k-2) + 1).

    The sector is theta in [(1 - 1/k) pi/2, pi/2]; cells cut by its edge
    contribute the part of their mu-mass inside the sector.
    """
    if k < 2 or k % 2:
        raise InvalidArgument("k must be an even integer >= 2")
    g = u.grid
    lo = (1.0 - 1.0 / k) * 0.5 * math.pi
    f = g.theta_faces
    clip_lo = np.clip(f[:-1], lo, None)
    inside = np.where(f[1:] > lo, mu_integral(clip_lo, f[1:], g.N, g.m), 0.0)
    uq = np.abs(u.values) ** q
    lhs = g.omega * float(g.radial.weights @ (uq @ inside))
    total = g.omega * g.integrate(uq)
    rhs = total / (tail_constant(g.N, g.m) * (k - 2) + 1.0)
    return lhs, rhs


def ps_identity_check(u: Field, beta: float, spec: ProblemSpec) -> float:
    """|J(u) + alpha G(u, beta u) - (p - beta - 1)/(2p) |u|^2| with alpha = 1/(p(beta-1))."""
    p = spec.p
    if not 1 < beta < p - 1:
        raise InvalidArgument(f"beta must lie in (1, p-1), got {beta}")
    if np.any(u.values < 0) or cone_violation(u.values)[1] > 1e-12 * max(u.max, 1e-300):
        raise InvalidArgument("the identity is stated for cone fields")
    alpha = 1.0 / (p * (beta - 1.0))
    norm2 = h1_norm_sq(u)
    psi_u = 0.5 * norm2
    psi_bu = 0.5 * beta * beta * norm2
    phi = nonlinear_integral(u, spec) / p
    # Phi'(u) (u - beta u) = (1 - beta) int a |u|^p
    dphi = (1.0 - beta) * p * phi
    J = psi_u - phi
    G = psi_u - psi_bu - dphi
    target = (p - (beta + 1.0)) / (2.0 * p) * norm2
    return abs(J + alpha * G - target)


# ---------------------------------------------------------------------------
# initial data


def perturbed_radial_init(grid: Grid2D, profile_values, eps: float = 0.3) -> ConeField:
    from .quadform import y_values

    y = y_values(grid.theta, grid.N, grid.m)
    vals = np.outer(np.asarray(profile_values, float), 1.0 + eps * y)
    return project_cone(Field(grid, vals))


def random_cone_init(grid: Grid2D, envelope, rng: np.random.Generator) -> ConeField:
    """Envelope(r) times a random nonincreasing angular factor in (0, 1]."""
    steps = rng.random((grid.M + 1, grid.J))
    prof = np.cumsum(steps[:, ::-1], axis=1)[:, ::-1]
    prof /= prof[:, :1]
    vals = np.asarray(envelope, float)[:, None] * prof
    return project_cone(Field(grid, vals))


def default_envelope(grid: Grid2D) -> np.ndarray:
    x = grid.r - grid.R
    env = x * np.exp(-x)
    env[-1] = 0.0
    return env


# ---------------------------------------------------------------------------
# ground state iteration


def _pg_norm(g: Grid2D, x: np.ndarray, w: np.ndarray) -> float:
    """Nehari-tangent part of the projected gradient step, relative to |x|."""
    A = g.stiffness
    xi = g.interior_values(x)
    wi = g.interior_values(w)
    Aw = A @ wi
    s = float(xi @ Aw) / float(wi @ Aw)
    d = xi - s * wi
    return math.sqrt(max(float(d @ (A @ d)), 0.0) / float(xi @ (A @ xi)))


def ground_state(spec: ProblemSpec, init: Optional[Field] = None, grid: Optional[Grid2D] = None,
                 tol: float = 1e-7, max_iter: int = 5000, lam_min: float = 1e-8,
                 eps: float = 0.3, callback=None):
    """Minimize the energy over the Nehari set intersected with the cone.

    Iterates u <- t P(B(u)) where P is the cone projection and t the Nehari
    factor.  A step is accepted only when the energy decreases; otherwise
    damped steps u - lam (u - B(u)) are tried with lam halved down to
    ``lam_min``.  Stops when the Nehari-tangent projected gradient norm
    drops below ``tol``.  Returns (ConeField, SolveReport).
    """
    spec.require_subcritical()
    if grid is None:
        grid = Grid2D.for_spec(spec) if init is None else init.grid
    if init is None:
        init = default_init(spec, grid, eps)
    _check(init, spec)

    u = nehari_rescale(project_cone(init), spec)
    E = energy(u, spec)
    flags = []
    history = []
    converged = False
    pg = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        v = invariance_map(u, spec)
        w = nehari_rescale(project_cone(v), spec)
        pg = _pg_norm(grid, u.values, w.values)
        history.append((E, pg))
        if callback is not None:
            callback(it, u, E, pg)
        if pg <= tol:
            converged = True
            break
        Ew = energy(w, spec)
        if Ew < E:
            u, E = w, Ew
            continue
        lam = 0.5
        accepted = False
        while lam >= lam_min:
            cand = Field(grid, u.values - lam * (u.values - v.values))
            cand = nehari_rescale(project_cone(cand), spec)
            Ec = energy(cand, spec)
            if Ec < E:
                u, E, accepted = cand, Ec, True
                break
            lam *= 0.5
        if not accepted:
            if pg <= 100 * tol:
                # energy differences have reached round-off
                flags.append("roundoff-floor")
                converged = True
                break
            raise Stagnation(f"no energy decrease at lam < {lam_min} (pg={pg:.3e})",
                             iterate=u, history=history)
    if not converged:
        flags.append("max-iter")
    rep = SolveReport(
        energy=E,
        nehari_residual=nehari_residual(u, spec),
        projected_grad_norm=pg,
        symmetry_metric=symmetry_metric(u),
        iterations=it,
        converged=converged,
        flags=flags,
        history=history,
    )
    for k in TAIL_KS:
        lhs, rhs = tail_bound_check(u, k, spec.p)
        rep.tail_bounds[k] = (lhs, rhs)
        if lhs > rhs * (1 + 1e-12):
            rep.flags.append(f"tail-bound-violated-k{k}")
    log.info("ground state: E=%.10g pg=%.2e metric=%.3e after %d iterations",
             E, pg, rep.symmetry_metric, it)
    return u, rep


def default_init(spec: ProblemSpec, grid: Grid2D, eps: float = 0.3) -> ConeField:
    """u_rad (1 + eps y(theta)) for radial weights, else a generic decaying bump."""
    if spec.weight.is_radial:
        from .radial import solve_radial

        prof, _ = solve_radial(spec, grid.radial)
        return perturbed_radial_init(grid, prof.values, eps)
    return perturbed_radial_init(grid, default_envelope(grid), eps)


# ---------------------------------------------------------------------------
# persistence


def write_field(u: Field, spec: ProblemSpec, path, comments=()) -> None:
    """ASCII field file: header line "N m R p r_max M J", then M+1 rows of J values."""
    g = u.grid
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(f"{g.N} {g.m} {g.R!r} {float(spec.p)!r} {g.r_max!r} {g.M} {g.J}\n")
        for row in u.values:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_field(path):
    """Returns (Field, header dict)."""
    rows = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 7:
                    raise InvalidArgument("field header must read 'N m R p r_max M J'")
                header = dict(N=int(parts[0]), m=int(parts[1]), R=float(parts[2]),
                              p=float(parts[3]), r_max=float(parts[4]),
                              M=int(parts[5]), J=int(parts[6]))
                continue
            rows.append([float(v) for v in line.split()])
    if header is None:
        raise InvalidArgument("empty field file")
    grid = Grid2D(header["N"], header["m"], header["R"], header["r_max"], header["M"], header["J"])
    vals = np.array(rows, dtype=float)
    if vals.shape != (grid.M + 1, grid.J):
        raise InvalidArgument(f"field body has shape {vals.shape}, header says {(grid.M + 1, grid.J)}")
    return Field(grid, vals), header
