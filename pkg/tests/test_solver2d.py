import math

import numpy as np
import pytest

from kground import radial, solver2d
from kground.errors import DegenerateDirection, InvalidArgument
from kground.geometry import ProblemSpec, WeightSpec, sphere_area
from kground.grid2d import ConeField, Field, Grid2D, cone_violation
from oracles import dense_operator


def random_cone(grid, rng, scale=1.0):
    env = solver2d.default_envelope(grid) * scale
    return solver2d.random_cone_init(grid, env, rng)


@pytest.fixture(scope="module")
def small_spec():
    return ProblemSpec(N=3, m=2, p=4.0, R=2.0)


def test_energy_of_zero(small_spec):
    g = Grid2D.for_spec(small_spec, 32, 8)
    assert solver2d.energy(Field(g, np.zeros((33, 8))), small_spec) == 0.0


def test_radial_lift_energy(radial_solution, base_spec):
    prof, rep = radial_solution
    g = Grid2D(3, 2, base_spec.R, base_spec.r_max, prof.grid.M, 16)
    u = Field.radial_lift(g, prof.values)
    assert g.omega * g.cell_mu.sum() == pytest.approx(sphere_area(2), rel=1e-14)
    assert solver2d.energy(u, base_spec) == pytest.approx(rep.energy, rel=1e-8)


def test_gradient_is_exact(small_spec, rng):
    g = Grid2D.for_spec(small_spec, 24, 6)
    u = random_cone(g, rng)
    phi = g.full_values(rng.normal(size=g.n_unknowns))
    grad = solver2d.gradient(u, small_spec) @ g.interior_values(phi)
    errs = []
    for h in (1e-3, 5e-4):
        ep = solver2d.energy(Field(g, u.values + h * phi), small_spec)
        em = solver2d.energy(Field(g, u.values - h * phi), small_spec)
        errs.append(abs((ep - em) / (2 * h) - grad))
    assert errs[0] < 1e-5 * abs(grad) + 1e-9
    assert errs[1] < errs[0] / 3 or errs[1] < 1e-9


def test_operator_matches_longhand_assembly(small_spec):
    g = Grid2D.for_spec(small_spec, 8, 4)
    A = g.stiffness.toarray()
    D = dense_operator(g)
    assert np.max(np.abs(A - D)) <= 1e-12 * np.max(np.abs(D))
    assert np.array_equal(A, A.T)


def test_operator_spd(small_spec, rng):
    g = Grid2D.for_spec(small_spec, 16, 8)
    A = g.stiffness
    for _ in range(20):
        x = rng.normal(size=g.n_unknowns)
        assert x @ (A @ x) > 0


def test_linear_solve_dense_oracle(small_spec, rng):
    g = Grid2D.for_spec(small_spec, 8, 4)
    rhs = Field(g, g.full_values(rng.normal(size=g.n_unknowns)))
    D = dense_operator(g)
    b = g.mass_vector * g.interior_values(rhs.values)
    ref = np.linalg.solve(D, b)
    for method in ("direct", "cg"):
        v = solver2d.linear_solve(rhs, method=method)
        assert np.max(np.abs(g.interior_values(v.values) - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_linear_solve_zero_rhs(small_spec):
    g = Grid2D.for_spec(small_spec, 16, 4)
    v = solver2d.linear_solve(Field(g, np.zeros((17, 4))))
    assert not np.any(v.values)


def test_linear_solve_preserves_cone(small_spec, rng):
    g = Grid2D.for_spec(small_spec, 128, 32)
    for _ in range(10):
        v = solver2d.linear_solve(random_cone(g, rng))
        neg, inc = cone_violation(v.values)
        assert neg <= 1e-8 * v.max and inc <= 1e-8 * v.max


def test_nehari_scale(small_spec, rng):
    g = Grid2D.for_spec(small_spec, 64, 16)
    u = random_cone(g, rng)
    t = solver2d.nehari_scale(u, small_spec)
    tu = u.scaled(t)
    h1 = solver2d.h1_norm_sq(tu)
    assert abs(h1 - solver2d.nonlinear_integral(tu, small_spec)) <= 1e-12 * h1
    assert solver2d.nehari_scale(u.scaled(3.0), small_spec) == pytest.approx(t / 3, rel=1e-13)
    assert solver2d.nehari_scale(tu, small_spec) == pytest.approx(1.0, rel=1e-13)
    with pytest.raises(DegenerateDirection):
        solver2d.nehari_scale(Field(g, np.zeros((65, 16))), small_spec)


def test_nehari_scale_known_ratio(small_spec, rng):
    # choose a = c so that |u|^2 = 4 int a |u|^p; with p = 4 this gives t = 2
    g = Grid2D.for_spec(small_spec, 32, 8)
    u = random_cone(g, rng)
    h1 = solver2d.h1_norm_sq(u)
    lp = solver2d.nonlinear_integral(u, small_spec)
    spec = small_spec.replace(weight=WeightSpec("constant", (h1 / (4 * lp),)))
    assert solver2d.nehari_scale(u, spec) == pytest.approx(2.0, rel=1e-14)


def test_project_cone_idempotent(small_spec, rng):
    g = Grid2D.for_spec(small_spec, 32, 8)
    u = Field(g, g.full_values(rng.normal(size=g.n_unknowns)))
    p1 = solver2d.project_cone(u)
    p2 = solver2d.project_cone(p1)
    assert np.array_equal(p1.values, p2.values)
    assert isinstance(p1, ConeField)


def test_cone_field_validation(small_spec):
    g = Grid2D.for_spec(small_spec, 4, 3)
    vals = np.zeros((5, 3))
    vals[2] = [1.0, 2.0, 0.0]
    with pytest.raises(InvalidArgument):
        ConeField(g, vals)
    vals[2] = [1.0, -1.0, -2.0]
    with pytest.raises(InvalidArgument):
        ConeField(g, vals)
    with pytest.raises(InvalidArgument):
        Field(g, np.ones((5, 3)))


def test_symmetry_metric(small_spec):
    g = Grid2D.for_spec(small_spec, 64, 64)
    const = Field.radial_lift(g, solver2d.default_envelope(g))
    assert solver2d.symmetry_metric(const) <= 1e-15
    f = solver2d.default_envelope(g)
    u = Field(g, np.outer(f, np.cos(g.theta) ** 2))
    # mu = cos theta for N=3, m=2: the weighted mean of cos^2 is 2/3
    i = int(np.argmax(f))
    expect = max(abs(np.cos(g.theta) ** 2 - 2 / 3)) * f[i] / np.max(u.values)
    assert solver2d.symmetry_metric(u) == pytest.approx(expect, rel=1e-3)
    assert solver2d.symmetry_metric(u.scaled(7.0)) == pytest.approx(solver2d.symmetry_metric(u), rel=1e-14)
    with pytest.raises(InvalidArgument):
        solver2d.symmetry_metric(Field(g, np.zeros((65, 64))))


def test_tail_bound_examples(small_spec, rng):
    g = Grid2D.for_spec(small_spec, 64, 16)
    u = random_cone(g, rng)
    lhs, rhs = solver2d.tail_bound_check(u, 2, 4.0)
    assert rhs == pytest.approx(g.omega * g.integrate(u.values ** 4), rel=1e-14)
    assert lhs <= rhs
    # theta-constant field, N=3, m=2: sector mu-mass is 1 - sin(lo)
    c = Field.radial_lift(g, solver2d.default_envelope(g))
    lhs, rhs = solver2d.tail_bound_check(c, 8, 4.0)
    lo = (1 - 1 / 8) * math.pi / 2
    radial_part = g.radial.weights @ solver2d.default_envelope(g) ** 4
    assert lhs == pytest.approx(g.omega * radial_part * (1 - math.sin(lo)), rel=1e-12)
    assert rhs == pytest.approx(g.omega * radial_part / (solver2d.tail_constant(3, 2) * 6 + 1),
                                rel=1e-12)
    assert lhs <= rhs
    with pytest.raises(InvalidArgument):
        solver2d.tail_bound_check(c, 3, 4.0)


def test_ps_identity(small_spec, rng):
    g = Grid2D.for_spec(small_spec, 32, 8)
    assert solver2d.ps_identity_check(Field(g, np.zeros((33, 8))), 2.0, small_spec) == 0.0
    for _ in range(20):
        u = random_cone(g, rng, scale=rng.uniform(0.1, 10))
        beta = rng.uniform(1.0, 3.0)
        beta = min(max(beta, 1.0 + 1e-6), 3.0 - 1e-6)
        dev = solver2d.ps_identity_check(u, beta, small_spec)
        assert dev <= 1e-12 * solver2d.h1_norm_sq(u)
    with pytest.raises(InvalidArgument):
        solver2d.ps_identity_check(u, 3.5, small_spec)


def test_ground_state_breaks_symmetry_small_grid(small_spec):
    g = Grid2D.for_spec(small_spec, 128, 16)
    energies = []
    u, rep = solver2d.ground_state(small_spec, grid=g,
                                   callback=lambda it, uu, E, pg: energies.append(E))
    _, rrep = radial.solve_radial(small_spec, g.radial)
    assert rep.converged
    assert rep.energy < rrep.energy
    assert rep.symmetry_metric > 1e-2
    assert rep.nehari_residual <= 1e-6
    assert rep.projected_grad_norm <= 1e-7 or "roundoff-floor" in rep.flags
    # accepted iterates strictly decrease the energy
    assert all(b < a for a, b in zip(energies, energies[1:]))
    for k, (lhs, rhs) in rep.tail_bounds.items():
        assert lhs <= rhs


def test_ground_state_weight_scaling(small_spec):
    g = Grid2D.for_spec(small_spec, 96, 12)
    _, r1 = solver2d.ground_state(small_spec, grid=g)
    spec2 = small_spec.replace(weight=WeightSpec("constant", (2.0,)))
    _, r2 = solver2d.ground_state(spec2, grid=g)
    assert r2.energy == pytest.approx(r1.energy * 2 ** (-2 / (small_spec.p - 2)), rel=1e-8)


def test_equivariance_theta_constant():
    spec = ProblemSpec(N=3, m=2, p=3.0, R=0.5)
    g = Grid2D.for_spec(spec, 128, 16)
    init = Field.radial_lift(g, solver2d.default_envelope(g))
    worst = []
    solver2d.ground_state(spec, init=init, grid=g, max_iter=50,
                          callback=lambda it, u, E, pg: worst.append(
                              float(np.max(np.ptp(u.values, axis=1)) / u.max)))
    assert len(worst) >= 1
    assert max(worst) <= 1e-10


def test_max_iter_flag(small_spec):
    g = Grid2D.for_spec(small_spec, 64, 8)
    _, rep = solver2d.ground_state(small_spec, grid=g, max_iter=2)
    assert not rep.converged and "max-iter" in rep.flags


def test_nonradial_weight_runs():
    spec = ProblemSpec(N=3, m=2, p=4.0, R=1.0, weight=WeightSpec("separable", (1.0, 0.5, 0.5)))
    g = Grid2D.for_spec(spec, 96, 12)
    u, rep = solver2d.ground_state(spec, grid=g)
    assert rep.energy > 0 and rep.converged


def test_field_file_round_trip_and_determinism(small_spec, tmp_path):
    g = Grid2D.for_spec(small_spec, 64, 8)
    u1, _ = solver2d.ground_state(small_spec, grid=g)
    u2, _ = solver2d.ground_state(small_spec, grid=g)
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    solver2d.write_field(u1, small_spec, p1, comments=["run 1"])
    solver2d.write_field(u2, small_spec, p2, comments=["run 1"])
    assert p1.read_bytes() == p2.read_bytes()
    back, header = solver2d.read_field(p1)
    assert np.array_equal(back.values, u1.values)
    assert back.grid == g and header["p"] == 4.0


def test_subcritical_required():
    spec = ProblemSpec(N=6, m=3, p=5.0, R=1.0)
    with pytest.raises(InvalidArgument):
        solver2d.ground_state(spec, grid=Grid2D.for_spec(spec, 16, 4))
