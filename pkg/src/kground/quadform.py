"""Second variation of the energy at the radial solution.

The test direction is v = u_rad(r) y(theta) with

    y(theta) = (N - m) cos^2 theta - m sin^2 theta,

a nonincreasing, mean-zero Neumann eigenfunction of
-(mu y')' = 2N mu y on (0, pi/2).  A negative value of I''(u_rad)(v, v)
shows that the radial solution is not a K-ground state.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import radial
from .errors import InvalidArgument
from .geometry import ProblemSpec, mu, omega_constant, suff_condition
from .grid2d import Field, Grid2D

_GL_X, _GL_W = np.polynomial.legendre.leggauss(2)
_FINE_X, _FINE_W = np.polynomial.legendre.leggauss(64)


def y_values(theta, N: int, m: int):
    th = np.asarray(theta, dtype=float)
    return (N - m) * np.cos(th) ** 2 - m * np.sin(th) ** 2


def y_prime(theta, N: int):
    return -N * np.sin(2.0 * np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class AngularProfile:
    N: int
    m: int
    theta: np.ndarray
    faces: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    weights: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.theta.size


def y_profile(n_cells: int, N: int, m: int) -> AngularProfile:
    """Test direction on a cell-centred grid of (0, pi/2); y' is analytic."""
    if n_cells < 1:
        raise InvalidArgument("need at least one cell")
    h = 0.5 * math.pi / n_cells
    faces = np.arange(n_cells + 1) * h
    theta = faces[:-1] + 0.5 * h
    return AngularProfile(
        N=N, m=m, theta=theta, faces=faces,
        y=y_values(theta, N, m), dy=y_prime(theta, N),
        weights=mu(theta, N, m) * h,
    )


def eta_ode_residual(profile: AngularProfile, N: int, m: int) -> float:
    """Max relative defect of -(mu y')' = 2N mu y, with (mu y')' differenced from faces."""
    f = profile.faces
    flux = mu(f, N, m) * y_prime(f, N)
    h = f[1] - f[0]
    div = np.diff(flux) / h
    mu_c = mu(profile.theta, N, m)
    rhs = 2.0 * N * mu_c * profile.y
    return float(np.max(np.abs(-div - rhs)) / np.max(np.abs(rhs)))


def eta_moment_checks(profile: AngularProfile, N: int, m: int):
    """(int y mu, int y'^2 mu / int y^2 mu) by two-point Gauss rules on each cell."""
    f = profile.faces
    half = 0.5 * np.diff(f)
    pts = (0.5 * (f[:-1] + f[1:]))[:, None] + half[:, None] * _GL_X
    wts = half[:, None] * _GL_W
    mw = mu(pts, N, m) * wts
    y = y_values(pts, N, m)
    dy = y_prime(pts, N)
    mean = float(np.sum(y * mw))
    ratio = float(np.sum(dy * dy * mw) / np.sum(y * y * mw))
    return mean, ratio


def angular_integrals(N: int, m: int):
    """(int y^2 mu, int y'^2 mu) on (0, pi/2), exact to round-off.

    The integrands are trigonometric polynomials; 64 Gauss points per
    half-interval integrate them exactly at these degrees.
    """
    total_y2 = 0.0
    total_dy2 = 0.0
    for lo, hi in ((0.0, math.pi / 4), (math.pi / 4, math.pi / 2)):
        half = 0.5 * (hi - lo)
        pts = 0.5 * (hi + lo) + half * _FINE_X
        w = half * _FINE_W * mu(pts, N, m)
        total_y2 += float(np.sum(y_values(pts, N, m) ** 2 * w))
        total_dy2 += float(np.sum(y_prime(pts, N) ** 2 * w))
    return total_y2, total_dy2


@dataclass(frozen=True)
class QuadFormReport:
    raw_value: float
    reduced_value: float
    hardy_bound_value: float
    predicted_nonradial: bool
    suff_condition_holds: bool
    nehari_residual: float
    y2_integral: float
    dy2_integral: float

    def as_dict(self) -> dict:
        return asdict(self)


def _radial_pieces(u: radial.RadialProfile, spec: ProblemSpec):
    g = u.grid
    w = g.weights
    v = u.values
    a = spec.weight(g.nodes, 0.0)
    grad2 = radial.gradient_sq(u)
    mass2 = float(np.sum(w * v * v))
    nl = float(np.sum(w * a * np.abs(v) ** spec.p))
    over_r2 = float(np.sum(w * v * v / g.nodes ** 2))
    return grad2, mass2, nl, over_r2


def quadratic_form(u_rad: radial.RadialProfile, spec: ProblemSpec, scale: float = 1.0,
                   nehari_tol: float = 1e-6) -> QuadFormReport:
    """I''(u_rad)(v, v) for v = scale * u_rad * y, from separated 1-D quadratures.

    raw_value uses the direct expansion; reduced_value substitutes the
    eigen-relation for y and the Nehari identity for u_rad; the Hardy
    value is the upper bound obtained from Hardy's inequality.
    """
    if not spec.weight.is_radial:
        raise InvalidArgument("the quadratic form is set up for radial weights")
    res = radial.nehari_residual(u_rad, spec)
    if not res <= nehari_tol:
        raise InvalidArgument(f"u_rad is not converged (Nehari residual {res:.3e})")
    N, m, p, R = spec.N, spec.m, spec.p, spec.R
    om = omega_constant(N, m)
    y2, dy2 = angular_integrals(N, m)
    y2 *= scale * scale
    dy2 *= scale * scale
    grad2, mass2, nl, over_r2 = _radial_pieces(u_rad, spec)
    raw = om * ((grad2 + mass2 - (p - 1) * nl) * y2 + over_r2 * dy2)
    reduced = om * (-(p - 2) * (grad2 + mass2) + 2 * N * over_r2) * y2
    hardy = om * (2 * N - (p - 2) * (((N - 2) / 2.0) ** 2 + R * R)) * over_r2 * y2
    return QuadFormReport(
        raw_value=raw,
        reduced_value=reduced,
        hardy_bound_value=hardy,
        predicted_nonradial=raw < 0,
        suff_condition_holds=suff_condition(N, m, p, R),
        nehari_residual=res,
        y2_integral=y2,
        dy2_integral=dy2,
    )


def nehari_perturbation_test(u_rad: radial.RadialProfile, spec: ProblemSpec,
                             s_values: Sequence[float], J: int = 64):
    """Nehari energies of t(s) P(u_rad (1 + s y)) on a 2-D grid sharing u_rad's radial nodes.

    Returns (rows, baseline, flags) with rows = [(s, I(u*_s)), ...] and
    baseline the 2-D energy of the radial lift.  A flag is raised when the
    form predicts breaking but no sampled s lowers the energy.
    """
    from . import solver2d

    rg = u_rad.grid
    grid = Grid2D(spec.N, spec.m, rg.R, rg.r_max, rg.M, J)
    base_field = Field.radial_lift(grid, u_rad.values)
    baseline = solver2d.energy(base_field, spec)
    y = y_values(grid.theta, spec.N, spec.m)
    rows = []
    for s in s_values:
        cand = Field(grid, np.outer(u_rad.values, 1.0 + s * y))
        cand = solver2d.project_cone(cand)
        t = solver2d.nehari_scale(cand, spec)
        rows.append((float(s), solver2d.energy(cand.scaled(t), spec)))
    flags = []
    qf = quadratic_form(u_rad, spec)
    if qf.predicted_nonradial and all(e >= baseline for s, e in rows if s > 0):
        flags.append("discretization-warning: no perturbation lowered the energy")
    return rows, baseline, flags
