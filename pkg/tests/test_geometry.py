import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from kground.errors import InvalidArgument
from kground.geometry import (DomainSpec, ProblemSpec, WeightSpec, boundary_normal,
                              conditions_report, critical_exponent, domain_contains, mu,
                              omega_constant, r_star, sphere_area, st_of, theta_of)


def test_critical_exponent_values():
    assert critical_exponent(2) == math.inf
    assert critical_exponent(3) == 6.0
    assert critical_exponent(6) == 3.0
    with pytest.raises(InvalidArgument):
        critical_exponent(1)


def test_r_star_examples():
    assert r_star(3, 26.0) == 0.0
    assert r_star(3, 4.0) == pytest.approx(math.sqrt(2.75), abs=1e-12)
    assert r_star(4, 6.0) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("N", range(3, 11))
def test_r_star_vanishes_at_breaking_exponent(N):
    assert r_star(N, 2 + 8 * N / (N - 2) ** 2) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 10), st.floats(2.01, 40.0), st.floats(0.0, 5.0))
def test_r_star_nonincreasing_in_p(N, p, dp):
    assert r_star(N, p + dp) <= r_star(N, p) + 1e-12


def test_theta_and_st_axis_points():
    x = np.array([3.0, 0, 0, 0])
    assert theta_of(x, 2) == 0.0
    assert st_of(x, 2) == (3.0, 0.0)
    y = np.array([0, 0, 0, 3.0])
    assert theta_of(y, 2) == pytest.approx(math.pi / 2)
    assert st_of(y, 2) == (0.0, 3.0)
    z = np.array([1.0, 0, 1.0, 0])
    assert theta_of(z, 2) == pytest.approx(math.pi / 4)
    assert st_of(z, 2) == pytest.approx((1.0, 1.0))
    with pytest.raises(InvalidArgument):
        theta_of(np.zeros(3), 2)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.integers(2, 3))
def test_st_round_trip(coords, m):
    x = np.array(coords)
    if np.linalg.norm(x) < 1e-6:
        return
    s, t = st_of(x, m)
    th = theta_of(x, m)
    r = np.linalg.norm(x)
    assert math.hypot(s, t) == pytest.approx(r, rel=1e-13)
    assert r * math.cos(th) == pytest.approx(s, abs=1e-12 * r)
    assert r * math.sin(th) == pytest.approx(t, abs=1e-12 * r)


def test_mu_examples():
    assert mu(math.pi / 4, 4, 2) == pytest.approx(0.5)
    assert mu(0.0, 5, 4) == 1.0
    assert mu(0.0, 5, 2) == 0.0
    # endpoint behaviour
    assert mu(math.pi / 2, 5, 2) == 0.0
    # sin power N-m-1 = 0: no zero at theta = 0
    assert mu(0.0, 3, 2) == 1.0


def test_omega_examples():
    assert omega_constant(3, 2) == pytest.approx(4 * math.pi)
    assert omega_constant(4, 2) == pytest.approx(4 * math.pi ** 2)
    assert omega_constant(6, 4) == pytest.approx(4 * math.pi ** 3)
    assert sphere_area(0) == 2.0


@pytest.mark.parametrize("N", range(3, 9))
def test_measure_consistency(N):
    full = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
    for m in range(2, N):
        val, _ = integrate.quad(lambda t: mu(t, N, m), 0, math.pi / 2, epsabs=1e-14, epsrel=1e-13)
        assert omega_constant(N, m) * val == pytest.approx(full, rel=1e-8)


def test_conditions_report_examples():
    t = conditions_report(3, 26.0, 0.5)
    assert t.multiplicity == 2 and t.admissible_m == (2,)
    t = conditions_report(6, 5.0, 1.0)
    assert t.multiplicity == 3 and t.admissible_m == (4, 5)
    t = conditions_report(3, 4.0, 1.0)
    assert t.multiplicity == 1 and t.admissible_m == ()


def test_conditions_report_boundary_case():
    rs = r_star(3, 4.0)
    assert conditions_report(3, 4.0, rs).multiplicity == 2
    # R* = 0 requires R > 0 strictly, which every valid R satisfies
    assert conditions_report(3, 26.0, 1e-9).multiplicity == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 9), st.floats(2.05, 30.0), st.floats(0.01, 5.0), st.floats(0.0, 5.0))
def test_conditions_monotone_in_R(N, p, R, dR):
    assert conditions_report(N, p, R + dR).multiplicity >= conditions_report(N, p, R).multiplicity


def test_domain_membership_and_normals():
    g = DomainSpec("double-revolution", 1.0, 1.0)
    assert domain_contains(g, np.array([2.0, 0, 0]), 2)
    assert not domain_contains(DomainSpec(), np.array([0.5, 0, 0]), 2, R=1.0)
    x = np.array([0.5, 0.5, 1 / math.sqrt(2)])
    n = boundary_normal(g, x, 2)
    assert n == pytest.approx(x / np.linalg.norm(x))
    with pytest.raises(InvalidArgument):
        boundary_normal(g, np.zeros(3), 2)


def test_boundary_normal_uses_derivative_at_t_squared():
    g = DomainSpec("double-revolution", 0.5, 1.0)
    # s^2 + t^2/2 = 1 with s = 0.5
    t = math.sqrt(2 * (1 - 0.25))
    x = np.array([0.5, 0.0, t])
    n = boundary_normal(g, x, 2)
    expect = np.array([0.5, 0.0, 0.5 * t])
    assert n == pytest.approx(expect / np.linalg.norm(expect))


def test_problem_spec_validation():
    with pytest.raises(InvalidArgument):
        ProblemSpec(N=3, m=1, p=4.0, R=1.0)
    with pytest.raises(InvalidArgument):
        ProblemSpec(N=3, m=2, p=2.0, R=1.0)
    with pytest.raises(InvalidArgument):
        ProblemSpec(N=3, m=2, p=4.0, R=1.0, r_max=0.5)
    with pytest.raises(InvalidArgument):
        ProblemSpec(N=3, m=2, p=4.0, R=1.0, weight=WeightSpec("separable", (1.0, 0.0, -0.5)))
    with pytest.raises(InvalidArgument):
        DomainSpec("double-revolution", 1.5, 1.0)
    spec = ProblemSpec(N=6, m=3, p=5.0, R=1.0)
    assert not spec.subcritical
    with pytest.raises(InvalidArgument):
        spec.require_subcritical()
    assert ProblemSpec(N=3, m=2, p=7.0, R=1.0).subcritical


def test_weight_kinds():
    w = WeightSpec("radial-exponential", (1.0, 2.0))
    assert w(0.0) == pytest.approx(3.0)
    tab = WeightSpec("tabulated-radial", (), ((0.0, 1.0), (2.0, 3.0)))
    assert tab(1.0) == pytest.approx(2.0)
    sep = WeightSpec("separable", (1.0, 0.0, 1.0))
    assert not sep.is_radial
    assert sep(1.0, 0.0) == pytest.approx(2.0)
    assert sep(1.0, math.pi / 2) == pytest.approx(1.0)
