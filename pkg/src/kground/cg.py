"""Preconditioned conjugate gradients for symmetric positive definite systems."""

from __future__ import annotations

import numpy as np

from .errors import LinearSolveFailure


def pcg(apply_A, b, precond=None, x0=None, rtol=1e-10, max_iter=None):
    """Solve A x = b; returns (x, residual_history).

    ``apply_A`` and ``precond`` are callables on 1-D arrays.  The history
    holds relative residual norms |r_k| / |b|.  Raises LinearSolveFailure
    if rtol is not reached within ``max_iter`` iterations.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = 10 * n
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), [0.0]
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_A(x)
    z = precond(r) if precond is not None else r
    d = z.copy()
    rz = float(r @ z)
    history = [float(np.linalg.norm(r)) / bnorm]
    for _ in range(max_iter):
        if history[-1] <= rtol:
            return x, history
        Ad = apply_A(d)
        dAd = float(d @ Ad)
        if dAd <= 0:
            raise LinearSolveFailure("operator is not positive definite", iterate=x, history=history)
        alpha = rz / dAd
        x += alpha * d
        r -= alpha * Ad
        z = precond(r) if precond is not None else r
        rz_new = float(r @ z)
        d = z + (rz_new / rz) * d
        rz = rz_new
        history.append(float(np.linalg.norm(r)) / bnorm)
    if history[-1] <= rtol:
        return x, history
    raise LinearSolveFailure(
        f"CG stagnated at relative residual {history[-1]:.3e}", iterate=x, history=history
    )
