import numpy as np
import pytest

from kground import ag
from kground.errors import EmptyDomainError, InvalidArgument
from kground.geometry import DomainSpec, ProblemSpec


def ellipsoid_spec():
    return ProblemSpec(N=3, m=2, p=4.0, R=1.0, domain=DomainSpec("double-revolution", 0.5, 1.0))


def test_empty_domain():
    spec = ProblemSpec(N=3, m=2, p=4.0, R=1.0, r_max=5.0,
                       domain=DomainSpec("double-revolution", 1.0, 1e4))
    with pytest.raises(EmptyDomainError):
        ag.solve_on_Ag(spec, n=16)


def test_needs_double_revolution():
    with pytest.raises(InvalidArgument):
        ag.QuarterPlaneGrid(ProblemSpec(N=3, m=2, p=4.0, R=1.0), 16)


def test_mask_matches_membership():
    spec = ellipsoid_spec()
    g = ag.QuarterPlaneGrid(spec, 64)
    ss, tt = np.meshgrid(g.s, g.t, indexing="ij")
    assert np.array_equal(g.active, ss ** 2 + 0.5 * tt ** 2 - 1.0 > 0)


def test_operator_symmetric_positive(rng):
    g = ag.QuarterPlaneGrid(ellipsoid_spec(), 32)
    A = g.stiffness
    assert abs(A - A.T).max() == 0
    for _ in range(10):
        x = rng.normal(size=g.n_unknowns)
        assert x @ (A @ x) > 0


def test_radial_profile_energy_converges_to_radial_energy(radial_solution):
    # for kappa = 1 the quarter-plane energy of u_rad(|x|) approaches the radial energy
    prof, rep = radial_solution
    spec = ProblemSpec(N=3, m=2, p=4.0, R=2.0, domain=DomainSpec("double-revolution", 1.0, 4.0))
    errs = []
    for n in (128, 256):
        g = ag.QuarterPlaneGrid(spec, n)
        x = np.interp(g.r, prof.grid.nodes, prof.values)[g.active]
        errs.append(abs(ag.ag_energy(g, x, 4.0) - rep.energy) / rep.energy)
    assert errs[1] < errs[0] < 1e-2


def test_ellipsoid_solution_small_grid():
    f, rep = ag.solve_on_Ag(ellipsoid_spec(), n=96)
    g = f.grid
    assert rep.converged
    assert rep.energy > 0
    assert rep.nehari_residual <= 1e-6
    assert np.all(f.values >= 0) and f.values.max() > 0
    assert np.all(f.values[~g.active] == 0.0)
    assert "first-order-near-cut-boundary" in rep.flags
