"""Solver for the double-revolution exterior domain A_g = {s^2 + g(t^2) > 0}.

Works in the quarter plane (s, t) in [0, L]^2 with the density
s^(m-1) t^(N-m-1), where the Laplacian reads
u_ss + u_tt + (m-1)/s u_s + (N-m-1)/t u_t.  Cells are centred, so
neither axis carries a node; no flux crosses the axes.  Cells whose
centre lies outside A_g are Dirichlet zeros.  A face between an active
and a masked cell places the zero at the true boundary crossing
(Shortley-Weller style), which keeps the operator symmetric; the cut
cells themselves keep full volume, so the scheme is first order near
the boundary.  The outer edges s = L, t = L are Dirichlet.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from .errors import EmptyDomainError, InvalidArgument, Stagnation
from .geometry import ProblemSpec, mu, omega_constant
from .isotonic import project_rows
from .report import SolveReport

log = logging.getLogger(__name__)

_MIN_FRACTION = 1e-2


class QuarterPlaneGrid:
    def __init__(self, spec: ProblemSpec, n: int = 512, L: Optional[float] = None):
        if spec.domain.kind != "double-revolution":
            raise InvalidArgument("A_g solver needs a double-revolution domain")
        self.spec = spec
        self.N, self.m = spec.N, spec.m
        self.n = int(n)
        self.L = float(spec.r_max if L is None else L)
        self.h = self.L / self.n
        self.omega = omega_constant(self.N, self.m)
        c = (np.arange(self.n) + 0.5) * self.h
        self.s = c
        self.t = c
        dom = spec.domain
        ss, tt = np.meshgrid(c, c, indexing="ij")
        self.active = ss ** 2 + dom.g(tt ** 2) > 0
        if not self.active.any():
            raise EmptyDomainError("mask removes every cell")
        self.index = -np.ones((self.n, self.n), dtype=np.int64)
        self.index[self.active] = np.arange(int(self.active.sum()))
        r = np.hypot(ss, tt)
        self.r = r
        self.theta = np.arctan2(tt, ss)

    @property
    def n_unknowns(self) -> int:
        return int(self.active.sum())

    # 1-D integrals of the density factors over cells
    def _cell_int(self, k: int) -> np.ndarray:
        e = np.arange(self.n + 1) * self.h
        return (e[1:] ** k - e[:-1] ** k) / k

    @cached_property
    def mass_weights(self) -> np.ndarray:
        ms = self._cell_int(self.m)
        mt = self._cell_int(self.N - self.m)
        return np.outer(ms, mt)

    @cached_property
    def mass_vector(self) -> np.ndarray:
        return self.mass_weights[self.active]

    def _crossing_s(self, t):
        # s where s^2 + g(t^2) = 0
        val = -float(self.spec.domain.g(t * t))
        return math.sqrt(val) if val > 0 else 0.0

    def _crossing_t(self, s):
        # t where s^2 + kappa t^2 - c = 0
        dom = self.spec.domain
        val = (dom.c - s * s) / dom.kappa
        return math.sqrt(val) if val > 0 else 0.0

    @cached_property
    def stiffness(self) -> sp.csc_matrix:
        n, h = self.n, self.h
        e = np.arange(n + 1) * h
        ms = self._cell_int(self.m)
        mt = self._cell_int(self.N - self.m)
        rows, cols, vals = [], [], []
        diag = np.zeros(self.n_unknowns)
        idx = self.index

        def couple(a, b, k):
            rows.extend((a, b))
            cols.extend((b, a))
            vals.extend((-k, -k))
            diag[a] += k
            diag[b] += k

        # s-faces between cells (i, j) and (i+1, j), plus the outer face
        for i in range(n):
            fs = e[i + 1] ** (self.m - 1)
            for j in range(n):
                k = fs * mt[j] / h
                a = idx[i, j]
                if i + 1 < n:
                    b = idx[i + 1, j]
                    if a >= 0 and b >= 0:
                        couple(a, b, k)
                    elif a >= 0 or b >= 0:
                        c_act = a if a >= 0 else b
                        s_act = self.s[i] if a >= 0 else self.s[i + 1]
                        sb = self._crossing_s(self.t[j])
                        frac = max(abs(s_act - sb) / h, _MIN_FRACTION)
                        diag[c_act] += k / min(frac, 1.0)
                elif a >= 0:
                    diag[a] += 2.0 * k
        # t-faces
        for j in range(n):
            ft = e[j + 1] ** (self.N - self.m - 1)
            for i in range(n):
                k = ft * ms[i] / h
                a = idx[i, j]
                if j + 1 < n:
                    b = idx[i, j + 1]
                    if a >= 0 and b >= 0:
                        couple(a, b, k)
                    elif a >= 0 or b >= 0:
                        c_act = a if a >= 0 else b
                        t_act = self.t[j] if a >= 0 else self.t[j + 1]
                        tb = self._crossing_t(self.s[i])
                        frac = max(abs(t_act - tb) / h, _MIN_FRACTION)
                        diag[c_act] += k / min(frac, 1.0)
                elif a >= 0:
                    diag[a] += 2.0 * k
        diag += self.mass_vector
        nu = self.n_unknowns
        A = sp.coo_matrix((vals, (rows, cols)), shape=(nu, nu)).tocsr()
        A = A + sp.diags(diag)
        return sp.csc_matrix(A)

    @cached_property
    def factor(self):
        return splu(self.stiffness)

    @cached_property
    def weight(self) -> np.ndarray:
        return self.spec.weight(self.r, self.theta)[self.active]

    @cached_property
    def polar(self):
        """Polar sampling lines used by the cone projection: (radii, angles, weights)."""
        K = int(math.ceil(self.L * math.sqrt(2.0) / self.h))
        radii = (np.arange(K) + 0.5) * self.h
        J = self.n
        dth = 0.5 * math.pi / J
        angles = (np.arange(J) + 0.5) * dth
        return radii, angles, mu(angles, self.N, self.m) * dth

    @cached_property
    def _padded_axes(self):
        # mirror across both axes (no flux), zero beyond the outer edge
        c = np.concatenate(([-0.5 * self.h], self.s, [self.L]))
        return c, c

    def pad(self, full: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n + 2, self.n + 2))
        out[1:-1, 1:-1] = full
        out[0, 1:-1] = full[0]
        out[1:-1, 0] = full[:, 0]
        out[0, 0] = full[0, 0]
        return out

    def sample_polar(self, full: np.ndarray) -> np.ndarray:
        radii, angles, _ = self.polar
        rr, tt = np.meshgrid(radii, angles, indexing="ij")
        pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1)
        f = RegularGridInterpolator(self._padded_axes, self.pad(full),
                                    bounds_error=False, fill_value=0.0)
        return f(pts)

    def polar_to_cells(self, values: np.ndarray) -> np.ndarray:
        radii, angles, _ = self.polar
        r_ax = np.concatenate(([0.0], radii))
        th_ax = np.concatenate(([0.0], angles, [0.5 * math.pi]))
        v = np.zeros((radii.size + 1, angles.size + 2))
        v[1:, 1:-1] = values
        v[1:, 0] = values[:, 0]
        v[1:, -1] = values[:, -1]
        v[0] = v[1]
        f = RegularGridInterpolator((r_ax, th_ax), v, bounds_error=False, fill_value=0.0)
        pts = np.stack([self.r[self.active], self.theta[self.active]], axis=-1)
        return f(pts)

    def to_full(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.active] = x
        return out


@dataclass
class AgField:
    grid: QuarterPlaneGrid
    values: np.ndarray   # full (n, n) array; masked cells are 0


def _h1(g: QuarterPlaneGrid, x):
    return g.omega * float(x @ (g.stiffness @ x))


def _nl(g: QuarterPlaneGrid, x, p):
    return g.omega * float(np.sum(g.mass_vector * g.weight * np.abs(x) ** p))


def ag_energy(g: QuarterPlaneGrid, x, p) -> float:
    return 0.5 * _h1(g, x) - _nl(g, x, p) / p


def _project(g: QuarterPlaneGrid, x):
    """Cone projection along polar-angle lines.

    The field is sampled on rays of constant radius, each row is replaced
    by its weighted monotone (PAV) fit, and the correction is interpolated
    back to the cells.  A field already monotone along the sampled arcs is
    left unchanged apart from clamping at zero.
    """
    y = np.maximum(x, 0.0)
    samples = g.sample_polar(g.to_full(y))
    corr = project_rows(samples, g.polar[2]) - samples
    if not np.any(corr):
        return y
    return np.maximum(y + g.polar_to_cells(corr), 0.0)


def _rescale(g, x, p):
    nl = _nl(g, x, p)
    return x * (_h1(g, x) / nl) ** (1.0 / (p - 2))


def angular_monotonicity_defect(g: QuarterPlaneGrid, x) -> float:
    """Largest increase along the sampled arcs, relative to max |x|."""
    samples = g.sample_polar(g.to_full(x))
    inc = float(max(0.0, np.max(np.diff(samples, axis=1))))
    return inc / max(float(np.max(np.abs(x))), 1e-300)


def solve_on_Ag(spec: ProblemSpec, init=None, n: int = 512, L: Optional[float] = None,
                tol: float = 1e-6, max_iter: int = 3000, lam_min: float = 1e-8):
    """Nehari/cone iteration of `solver2d.ground_state`, on the (s, t) grid.

    ``init`` may be a callable init(r, theta) or an (n, n) array; the
    default is a decaying bump peaked on the s-axis.
    """
    spec.require_subcritical()
    g = QuarterPlaneGrid(spec, n, L)
    p = spec.p
    if init is None:
        rb = spec.domain.boundary_radius(g.theta)
        x0 = np.clip(g.r - rb, 0, None) * np.exp(-np.clip(g.r - rb, 0, None)) * (1 + 0.3 * np.cos(g.theta) ** 2)
        x0 = x0[g.active]
    elif callable(init):
        x0 = np.asarray(init(g.r, g.theta), float)[g.active]
    else:
        x0 = np.asarray(init, float)[g.active]
    x = _rescale(g, _project(g, x0), p)
    E = ag_energy(g, x, p)
    A = g.stiffness
    flags = ["first-order-near-cut-boundary"]
    history = []
    converged = False
    pg = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        v = g.factor.solve(g.mass_vector * g.weight * np.abs(x) ** (p - 2) * x)
        w = _rescale(g, _project(g, v), p)
        Aw = A @ w
        sc = float(x @ Aw) / float(w @ Aw)
        d = x - sc * w
        pg = math.sqrt(max(float(d @ (A @ d)), 0.0) / float(x @ (A @ x)))
        history.append((E, pg))
        if pg <= tol:
            converged = True
            break
        Ew = ag_energy(g, w, p)
        if Ew < E:
            x, E = w, Ew
            continue
        lam = 0.5
        accepted = False
        while lam >= lam_min:
            cand = _rescale(g, _project(g, x - lam * (x - v)), p)
            Ec = ag_energy(g, cand, p)
            if Ec < E:
                x, E, accepted = cand, Ec, True
                break
            lam *= 0.5
        if not accepted:
            if pg <= 1e3 * tol:
                flags.append("projection-limited")
                converged = True
                break
            raise Stagnation(f"A_g iteration stagnated (pg={pg:.3e})",
                             iterate=AgField(g, g.to_full(x)), history=history)
    if not converged:
        flags.append("max-iter")
    h1 = _h1(g, x)
    rep = SolveReport(
        energy=E,
        nehari_residual=abs(h1 - _nl(g, x, p)) / h1,
        projected_grad_norm=pg,
        symmetry_metric=math.nan,
        iterations=it,
        converged=converged,
        flags=flags,
        history=history,
        extra={"angular_monotonicity_defect": angular_monotonicity_defect(g, x),
               "cells": g.n_unknowns, "n": g.n, "L": g.L},
    )
    log.info("A_g solve: E=%.8g pg=%.2e in %d iterations", E, pg, it)
    return AgField(g, g.to_full(x)), rep
