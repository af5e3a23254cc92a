import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kground.cg import pcg
from kground.errors import LinearSolveFailure
from kground.isotonic import pav_nonincreasing, project_rows
from oracles import qp_oracle


def test_spec_examples():
    assert project_rows(np.array([[1.0, 2.0, 0.5]]), np.ones(3))[0] == pytest.approx([1.5, 1.5, 0.5])
    row = np.array([[3.0, 2.0, 0.0]])
    assert np.array_equal(project_rows(row, np.ones(3)), row)
    assert np.array_equal(project_rows(np.array([[-1.0, -2.0]]), np.ones(2)), np.zeros((1, 2)))


def test_against_qp_oracle(rng):
    worst = 0.0
    for _ in range(1000):
        n = rng.integers(1, 9)
        y = rng.normal(size=n)
        w = rng.uniform(0.1, 2.0, size=n)
        got = project_rows(y[None, :], w)[0]
        worst = max(worst, float(np.max(np.abs(got - qp_oracle(y, w)))))
    assert worst <= 1e-10


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.data())
def test_projection_properties(ys, data):
    y = np.array(ys)
    w = np.array(data.draw(st.lists(st.floats(0.1, 3.0), min_size=len(ys), max_size=len(ys))))
    x = project_rows(y[None, :], w)[0]
    assert np.all(x >= 0)
    assert np.all(np.diff(x) <= 1e-12 * max(1.0, np.max(np.abs(x))))
    again = project_rows(x[None, :], w)[0]
    assert np.array_equal(again, x)


def test_pav_preserves_weighted_mean(rng):
    y = rng.normal(size=50)
    w = rng.uniform(0.5, 1.5, size=50)
    x = pav_nonincreasing(y, w)
    assert np.sum(w * x) == pytest.approx(np.sum(w * y))


def test_pcg_solves_spd(rng):
    n = 40
    B = rng.normal(size=(n, n))
    A = B @ B.T + n * np.eye(n)
    b = rng.normal(size=n)
    d = 1.0 / np.diag(A)
    x, hist = pcg(lambda v: A @ v, b, precond=lambda v: d * v, rtol=1e-12)
    assert np.allclose(A @ x, b, rtol=0, atol=1e-10 * np.linalg.norm(b))
    assert hist[-1] <= 1e-12


def test_pcg_zero_rhs():
    x, hist = pcg(lambda v: v, np.zeros(5))
    assert not np.any(x)


def test_pcg_reports_failure(rng):
    A = np.diag(np.linspace(1, 1e6, 200))
    with pytest.raises(LinearSolveFailure) as info:
        pcg(lambda v: A @ v, rng.normal(size=200), rtol=1e-14, max_iter=3)
    assert len(info.value.history) == 4
    with pytest.raises(LinearSolveFailure):
        pcg(lambda v: -v, np.ones(3))
