"""Coordinates, measures, exponent arithmetic and domain descriptions.

Points of R^N are split as R^m x R^(N-m).  A function with the
O(m) x O(N-m) symmetry depends only on

    s = |(x_1, ..., x_m)|,   t = |(x_{m+1}, ..., x_N)|,

or equivalently on r = |x| and theta = arcsin(t / r) in [0, pi/2].
Integrals over the exterior domain reduce to

    int u dx = omega_{N,m} int int u(r, theta) mu(theta) r^(N-1) dr dtheta,

with mu(theta) = cos(theta)^(m-1) sin(theta)^(N-m-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "critical_exponent",
    "r_star",
    "suff_condition",
    "theta_of",
    "st_of",
    "mu",
    "sphere_area",
    "omega_constant",
    "ExponentTable",
    "conditions_report",
    "WeightSpec",
    "DomainSpec",
    "ProblemSpec",
    "domain_contains",
    "boundary_normal",
]


# ---------------------------------------------------------------------------
# exponents and thresholds


def critical_exponent(n: int) -> float:
    """Sobolev exponent 2n/(n-2) of R^n; ``math.inf`` for n = 2."""
    if int(n) != n or n < 2:
        raise InvalidArgument(f"critical exponent needs an integer n >= 2, got {n}")
    if n == 2:
        return math.inf
    return 2.0 * n / (n - 2)


def _breaking_exponent(N: int) -> float:
    # p at which the threshold radius drops to zero
    return 2.0 + 8.0 * N / (N - 2) ** 2


def r_star(N: int, p: float) -> float:
    """Inner radius above which the sufficient symmetry-breaking condition holds."""
    if N < 3 or p <= 2:
        raise InvalidArgument(f"r_star needs N >= 3 and p > 2, got N={N}, p={p}")
    if p >= _breaking_exponent(N):
        return 0.0
    val = 2.0 * N / (p - 2) - ((N - 2) / 2.0) ** 2
    return math.sqrt(max(val, 0.0))


def suff_condition(N: int, m: int, p: float, R: float) -> bool:
    """Lower bound 2 + 2N/(((N-2)/2)^2 + R^2) <= p < 2*_{N-m+1}."""
    lower = 2.0 + 2.0 * N / (((N - 2) / 2.0) ** 2 + R * R)
    return lower <= p < critical_exponent(N - m + 1)


# ---------------------------------------------------------------------------
# coordinates and measures


def st_of(x: Sequence[float], m: int) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise InvalidArgument("the origin has no angular coordinate")
    if not 1 <= m < x.size:
        raise InvalidArgument(f"block size m={m} incompatible with dimension {x.size}")
    return float(np.linalg.norm(x[:m])), float(np.linalg.norm(x[m:]))


def theta_of(x: Sequence[float], m: int) -> float:
    s, t = st_of(x, m)
    # atan2 is accurate near both axes, unlike arcsin(t/r) near pi/2
    return math.atan2(t, s)


def mu(theta, N: int, m: int):
    """Angular density cos^(m-1) sin^(N-m-1); works on scalars and arrays."""
    th = np.asarray(theta, dtype=float)
    out = np.cos(th) ** (m - 1) * np.sin(th) ** (N - m - 1)
    # cos(pi/2) is 6e-17 in floating point, not 0
    out = np.where(np.isclose(th, math.pi / 2, rtol=0, atol=1e-15) & (m > 1), 0.0, out)
    out = np.maximum(out, 0.0)
    if np.ndim(theta) == 0:
        return float(out)
    return out


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^(k+1); S^0 counts two points."""
    if k < 0:
        raise InvalidArgument("sphere dimension must be >= 0")
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def omega_constant(N: int, m: int) -> float:
    if not 2 <= m <= N - 1:
        raise InvalidArgument(f"need 2 <= m <= N-1, got N={N}, m={m}")
    return sphere_area(m - 1) * sphere_area(N - m - 1)


# ---------------------------------------------------------------------------
# counting solutions


@dataclass(frozen=True)
class ExponentTable:
    N: int
    p: float
    R: float
    two_star: dict
    R_star: float
    radius_ok: bool
    multiplicity: int
    admissible_m: tuple
    theorem_applies: bool
    corollary_i: bool
    corollary_ii: bool

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "p": self.p,
            "R": self.R,
            "two_star": {str(k): v for k, v in self.two_star.items()},
            "R_star": self.R_star,
            "radius_ok": self.radius_ok,
            "multiplicity": self.multiplicity,
            "admissible_m": list(self.admissible_m),
            "theorem_applies": self.theorem_applies,
            "corollary_i": self.corollary_i,
            "corollary_ii": self.corollary_ii,
        }


def conditions_report(N: int, p: float, R: float) -> ExponentTable:
    """Number of rotationally nonequivalent solutions guaranteed for (N, p, R).

    The largest n in [2, N-1] with p < 2*_n is taken, provided the radius
    condition R > R* holds (or R = R* > 0).  Otherwise only the radial
    solution is guaranteed and n = 1.
    """
    if N < 3 or p <= 2 or R <= 0:
        raise InvalidArgument(f"need N >= 3, p > 2, R > 0; got N={N}, p={p}, R={R}")
    rs = r_star(N, p)
    radius_ok = R > rs or (R == rs and rs > 0)
    two_star = {n: critical_exponent(n) for n in range(2, N + 1)}
    n = 1
    if radius_ok:
        for k in range(2, N):
            if p < two_star[k]:
                n = k
    admissible = tuple(range(N - n + 1, N)) if n >= 2 else ()
    p_break = _breaking_exponent(N)
    cor_i = p >= p_break
    cor_ii = N >= 6 and n >= 3 and n <= N / 2 and p >= p_break
    return ExponentTable(
        N=N,
        p=p,
        R=R,
        two_star=two_star,
        R_star=rs,
        radius_ok=radius_ok,
        multiplicity=n,
        admissible_m=admissible,
        theorem_applies=n >= 2,
        corollary_i=cor_i,
        corollary_ii=cor_ii,
    )


# ---------------------------------------------------------------------------
# weights


_WEIGHT_KINDS = ("constant", "radial-exponential", "tabulated-radial", "separable")


@dataclass(frozen=True)
class WeightSpec:
    """The coefficient a(x) = a(r, theta) of the nonlinearity.

    kinds and parameters:
      constant            (c,)              a = c
      radial-exponential  (c0, c1)          a = c0 + c1 exp(-r)
      tabulated-radial    table=((r, a),..) piecewise linear, constant outside
      separable           (c0, c1, b)       a = (c0 + c1 exp(-r)) (1 + b cos^2 theta)
    """

    kind: str = "constant"
    params: tuple = (1.0,)
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in _WEIGHT_KINDS:
            raise InvalidArgument(f"unknown weight kind {self.kind!r}")
        nparams = {"constant": 1, "radial-exponential": 2, "tabulated-radial": 0, "separable": 3}
        if len(self.params) != nparams[self.kind]:
            raise InvalidArgument(
                f"weight {self.kind} takes {nparams[self.kind]} parameters, got {len(self.params)}"
            )
        if self.kind == "tabulated-radial":
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 2:
                raise InvalidArgument("tabulated weight needs at least two (r, a) rows")
            if np.any(np.diff(tab[:, 0]) <= 0):
                raise InvalidArgument("tabulated weight radii must increase")
        if self.kind == "separable" and self.params[2] < 0:
            raise InvalidArgument("separable weight needs b >= 0 (a nonincreasing in theta)")

    @property
    def is_radial(self) -> bool:
        return self.kind != "separable" or self.params[2] == 0

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.full_like(r, float(self.params[0]))
        if self.kind == "tabulated-radial":
            tab = np.asarray(self.table, dtype=float)
            return np.interp(r, tab[:, 0], tab[:, 1])
        c0, c1 = self.params[0], self.params[1]
        return c0 + c1 * np.exp(-r)

    def __call__(self, r, theta=0.0):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        out = self.radial(r)
        if self.kind == "separable":
            out = out * (1.0 + self.params[2] * np.cos(theta) ** 2)
        return out

    def scaled(self, factor: float) -> "WeightSpec":
        if self.kind == "constant":
            return WeightSpec("constant", (self.params[0] * factor,))
        if self.kind == "radial-exponential":
            return WeightSpec(self.kind, (self.params[0] * factor, self.params[1] * factor))
        if self.kind == "separable":
            c0, c1, b = self.params
            return WeightSpec(self.kind, (c0 * factor, c1 * factor, b))
        tab = tuple((r, a * factor) for r, a in self.table)
        return WeightSpec(self.kind, (), tab)

    def validate(self, r, theta) -> None:
        """Check a >= 0, a not identically 0, a bounded and nonincreasing in theta."""
        rr, tt = np.meshgrid(np.asarray(r, float), np.sort(np.asarray(theta, float)), indexing="ij")
        vals = self(rr, tt)
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("weight is not finite on the grid")
        if np.any(vals < 0):
            raise InvalidArgument("weight must be nonnegative")
        if not np.any(vals > 0):
            raise InvalidArgument("weight vanishes identically")
        if np.any(np.diff(vals, axis=1) > 1e-12 * np.max(vals)):
            raise InvalidArgument("weight must be nonincreasing in theta")

    def describe(self) -> str:
        if self.kind == "tabulated-radial":
            return f"tabulated-radial[{len(self.table)} rows]"
        return " ".join([self.kind] + [repr(float(v)) for v in self.params])


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class DomainSpec:
    """Exterior of a ball, or A_g = {s^2 + g(t^2) > 0} with g(tau) = kappa tau - c."""

    kind: str = "exterior"
    kappa: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exterior", "double-revolution"):
            raise InvalidArgument(f"unknown domain kind {self.kind!r}")
        if self.kind == "double-revolution":
            if not 0 < self.kappa <= 1:
                raise InvalidArgument("need 0 < kappa <= 1")
            if not self.c > 0:
                raise InvalidArgument("need g(0) = -c < 0")

    def g(self, tau):
        return self.kappa * np.asarray(tau, dtype=float) - self.c

    def g_prime(self, tau):
        return np.full_like(np.asarray(tau, dtype=float), self.kappa)

    def boundary_radius(self, theta):
        """Radius of the boundary along the ray of angle theta (A_g only)."""
        th = np.asarray(theta, dtype=float)
        return np.sqrt(self.c / (np.cos(th) ** 2 + self.kappa * np.sin(th) ** 2))

    def describe(self) -> str:
        if self.kind == "exterior":
            return "exterior"
        return f"double-revolution {self.kappa!r} {self.c!r}"


def domain_contains(domain: DomainSpec, x, m: int, R: Optional[float] = None) -> bool:
    x = np.asarray(x, dtype=float)
    if domain.kind == "exterior":
        if R is None:
            raise InvalidArgument("exterior-ball membership needs the radius R")
        return bool(np.linalg.norm(x) > R)
    s2 = float(np.sum(x[:m] ** 2))
    t2 = float(np.sum(x[m:] ** 2))
    return bool(s2 + float(domain.g(t2)) > 0)


def boundary_normal(domain: DomainSpec, x, m: int, R: Optional[float] = None, tol: float = 1e-8):
    """Unit normal at a boundary point, pointing into the domain.

    For A_g the direction is x^s + g'(t^2) x^t, i.e. half the gradient of
    s^2 + g(t^2).
    """
    x = np.asarray(x, dtype=float)
    xs = np.zeros_like(x)
    xt = np.zeros_like(x)
    xs[:m] = x[:m]
    xt[m:] = x[m:]
    if not np.any(xs) and not np.any(xt):
        raise InvalidArgument("boundary normal undefined at s = t = 0")
    if domain.kind == "exterior":
        if R is None:
            raise InvalidArgument("exterior-ball normal needs the radius R")
        if abs(np.linalg.norm(x) - R) > tol:
            raise InvalidArgument("point is not on the boundary")
        return x / np.linalg.norm(x)
    t2 = float(np.sum(xt ** 2))
    if abs(float(np.sum(xs ** 2)) + float(domain.g(t2))) > tol:
        raise InvalidArgument("point is not on the boundary")
    n = xs + float(domain.g_prime(t2)) * xt
    return n / np.linalg.norm(n)


# ---------------------------------------------------------------------------
# problem


@dataclass(frozen=True)
class ProblemSpec:
    N: int
    m: int
    p: float
    R: float
    weight: WeightSpec = field(default_factory=WeightSpec)
    domain: DomainSpec = field(default_factory=DomainSpec)
    r_max: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise InvalidArgument(f"N must be an integer >= 3, got {self.N}")
        if int(self.m) != self.m or not 2 <= self.m <= self.N - 1:
            raise InvalidArgument(f"m must satisfy 2 <= m <= N-1, got m={self.m}")
        if not self.p > 2:
            raise InvalidArgument(f"p must exceed 2, got {self.p}")
        if not self.R > 0:
            raise InvalidArgument(f"R must be positive, got {self.R}")
        if self.r_max is None:
            object.__setattr__(self, "r_max", self.R + 25.0)
        if not self.r_max > self.R:
            raise InvalidArgument("r_max must exceed R")
        if self.domain.kind == "double-revolution" and self.R > math.sqrt(self.domain.c) + 1e-12:
            raise InvalidArgument("R must not exceed the smallest boundary radius sqrt(c) of A_g")
        r = np.linspace(self.R, self.r_max, 65)
        th = np.linspace(0.0, math.pi / 2, 33)
        self.weight.validate(r, th)

    @property
    def two_star(self) -> float:
        return critical_exponent(self.N - self.m + 1)

    @property
    def subcritical(self) -> bool:
        return self.p < self.two_star

    def require_subcritical(self) -> None:
        if not self.subcritical:
            raise InvalidArgument(
                f"p={self.p} is not below 2*_(N-m+1)={self.two_star} for N={self.N}, m={self.m}"
            )

    def replace(self, **changes) -> "ProblemSpec":
        kw = dict(N=self.N, m=self.m, p=self.p, R=self.R, weight=self.weight,
                  domain=self.domain, r_max=self.r_max)
        if "R" in changes and "r_max" not in changes:
            kw["r_max"] = None
        kw.update(changes)
        if kw["r_max"] is None:
            kw["r_max"] = kw["R"] + 25.0
        return ProblemSpec(**kw)
