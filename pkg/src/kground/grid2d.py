"""Tensor grid in (r, theta) and fields living on it.

Radial nodes are vertex centred with Dirichlet rows at r = R and
r = r_max; angular nodes are cell centres strictly inside (0, pi/2).
The quadrature is

    mass:          r_i^(N-1) h_r * int_{cell j} mu
    radial flux:   mean of r^(N-1) on [r_i, r_{i+1}] / h_r * int_{cell j} mu
    angular flux:  r_i^(N-3) h_r * mu(theta_{j+1/2}) / h_theta

No flux crosses theta = 0 or theta = pi/2.  Because the radial flux and
the mass share the same angular factor, radial data stay radial under
the linear solve, and the operator is a symmetric M-matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InvalidArgument
from .geometry import ProblemSpec, mu, omega_constant
from .radial import RadialGrid

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def mu_integral(lo, hi, N: int, m: int) -> np.ndarray:
    """int_lo^hi mu(theta) dtheta, elementwise, by 8-point Gauss-Legendre."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[..., None] + half[..., None] * _GL_X
    return np.sum(mu(pts, N, m) * _GL_W, axis=-1) * half


class Grid2D:
    def __init__(self, N: int, m: int, R: float, r_max: float, M: int = 512, J: int = 64):
        if M < 2 or J < 1:
            raise InvalidArgument("grid needs M >= 2 and J >= 1")
        self.N, self.m = int(N), int(m)
        self.R, self.r_max = float(R), float(r_max)
        self.M, self.J = int(M), int(J)
        self.radial = RadialGrid(self.R, self.r_max, self.M, self.N)
        self.omega = omega_constant(self.N, self.m)

    @classmethod
    def for_spec(cls, spec: ProblemSpec, M: int = 512, J: int = 64) -> "Grid2D":
        return cls(spec.N, spec.m, spec.R, spec.r_max, M, J)

    def key(self) -> tuple:
        return (self.N, self.m, self.R, self.r_max, self.M, self.J)

    def __eq__(self, other):
        return isinstance(other, Grid2D) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Grid2D(N={self.N}, m={self.m}, R={self.R}, r_max={self.r_max}, M={self.M}, J={self.J})"

    # -- coordinates --------------------------------------------------------

    @property
    def r(self) -> np.ndarray:
        return self.radial.nodes

    @property
    def h_r(self) -> float:
        return self.radial.h

    @property
    def h_theta(self) -> float:
        return 0.5 * math.pi / self.J

    @cached_property
    def theta(self) -> np.ndarray:
        return (np.arange(self.J) + 0.5) * self.h_theta

    @cached_property
    def theta_faces(self) -> np.ndarray:
        return np.arange(self.J + 1) * self.h_theta

    # -- quadrature ---------------------------------------------------------

    @cached_property
    def cell_mu(self) -> np.ndarray:
        f = self.theta_faces
        return mu_integral(f[:-1], f[1:], self.N, self.m)

    @cached_property
    def face_mu(self) -> np.ndarray:
        """mu at the J-1 interior angular faces."""
        return mu(self.theta_faces[1:-1], self.N, self.m)

    @cached_property
    def mass_weights(self) -> np.ndarray:
        """(M+1, J) quadrature weights r^(N-1) dr x int mu over the cell."""
        return np.outer(self.radial.weights, self.cell_mu)

    @property
    def interior(self) -> slice:
        return slice(1, self.M)

    @property
    def n_unknowns(self) -> int:
        return (self.M - 1) * self.J

    # -- operators on interior unknowns (row-major: i outer, j inner) -------

    @cached_property
    def stiffness(self) -> sp.csc_matrix:
        """Discrete H^1 form A (gradient plus mass part), without omega."""
        g = self.radial
        fw = g.face_weights
        w = g.weights[1:-1]
        Kr = sp.diags([fw[:-1] + fw[1:], -fw[1:-1], -fw[1:-1]], [0, 1, -1])
        Wt = sp.diags(self.cell_mu)
        if self.J > 1:
            c = self.face_mu / self.h_theta
            d = np.zeros(self.J)
            d[:-1] += c
            d[1:] += c
            Kt = sp.diags([d, -c, -c], [0, 1, -1])
        else:
            Kt = sp.csr_matrix((1, 1))
        r_int = g.nodes[1:-1]
        A = sp.kron(Kr, Wt) + sp.kron(sp.diags(w / r_int ** 2), Kt) + sp.kron(sp.diags(w), Wt)
        return sp.csc_matrix(A)

    @cached_property
    def mass_vector(self) -> np.ndarray:
        return self.mass_weights[1:-1].ravel()

    @cached_property
    def factor(self):
        return splu(self.stiffness)

    def interior_values(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[1:-1].ravel()

    def full_values(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros((self.M + 1, self.J))
        out[1:-1] = np.asarray(x).reshape(self.M - 1, self.J)
        return out

    # -- discrete integrals on full arrays ----------------------------------

    def h1_sq(self, u: np.ndarray) -> float:
        """Sum of gradient and mass terms; omega not included."""
        x = self.interior_values(u)
        return float(x @ (self.stiffness @ x))

    def h1_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(self.interior_values(u) @ (self.stiffness @ self.interior_values(v)))

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.mass_weights * f))


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        g = self.grid
        if v.shape != (g.M + 1, g.J):
            raise InvalidArgument(f"field shape {v.shape} does not match grid {(g.M + 1, g.J)}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("field values must be finite")
        if np.any(v[0] != 0) or np.any(v[-1] != 0):
            raise InvalidArgument("field must vanish on the radial boundary rows")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "Field":
        rr, tt = np.meshgrid(grid.r, grid.theta, indexing="ij")
        v = np.array(np.broadcast_to(fn(rr, tt), rr.shape), dtype=float)
        v[0] = v[-1] = 0.0
        return cls(grid, v)

    @classmethod
    def radial_lift(cls, grid: Grid2D, profile_values) -> "Field":
        prof = np.asarray(profile_values, dtype=float)
        return cls(grid, np.repeat(prof[:, None], grid.J, axis=1))

    def scaled(self, c: float) -> "Field":
        return type(self)(self.grid, self.values * c) if c >= 0 else Field(self.grid, self.values * c)

    @property
    def max(self) -> float:
        return float(np.max(np.abs(self.values)))


def cone_violation(values: np.ndarray) -> tuple[float, float]:
    """(largest negative part, largest increase along theta)."""
    v = np.asarray(values)
    neg = float(max(0.0, -np.min(v)))
    inc = float(max(0.0, np.max(np.diff(v, axis=1)))) if v.shape[1] > 1 else 0.0
    return neg, inc


@dataclass(frozen=True, eq=False)
class ConeField(Field):
    """Field certified nonnegative and nonincreasing in theta."""

    def __post_init__(self):
        super().__post_init__()
        neg, inc = cone_violation(self.values)
        tol = 1e-12 * max(self.max, np.finfo(float).tiny)
        if neg > 0:
            raise InvalidArgument(f"cone field has negative values (min {-neg:.3e})")
        if inc > tol:
            raise InvalidArgument(f"cone field increases in theta by {inc:.3e}")
