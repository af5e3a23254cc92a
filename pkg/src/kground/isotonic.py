"""Weighted isotonic regression by pool-adjacent-violators."""

from __future__ import annotations

import numpy as np


def pav_nonincreasing(y, w=None) -> np.ndarray:
    """Weighted least-squares projection of ``y`` onto nonincreasing sequences.

    Adjacent blocks are pooled while a later block mean exceeds an
    earlier one; each block takes its weighted mean.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if w is None:
        w = np.ones(n)
    w = np.asarray(w, dtype=float)
    if n == 0:
        return y.copy()
    means = np.empty(n)
    weights = np.empty(n)
    sizes = np.empty(n, dtype=np.int64)
    top = -1
    for k in range(n):
        top += 1
        means[top] = y[k]
        weights[top] = w[k]
        sizes[top] = 1
        while top > 0 and means[top - 1] < means[top]:
            wsum = weights[top - 1] + weights[top]
            means[top - 1] = (weights[top - 1] * means[top - 1] + weights[top] * means[top]) / wsum
            weights[top - 1] = wsum
            sizes[top - 1] += sizes[top]
            top -= 1
    return np.repeat(means[: top + 1], sizes[: top + 1])


def project_rows(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Nearest nonnegative, nonincreasing rows in the w-weighted metric.

    Rows that are already monotone are only clamped, which leaves cone
    members untouched.  Clamping after pooling keeps rows monotone and
    gives the projection onto the intersection.
    """
    out = np.array(values, dtype=float, copy=True)
    bad = np.nonzero(np.any(np.diff(out, axis=1) > 0, axis=1))[0]
    for i in bad:
        out[i] = pav_nonincreasing(out[i], w)
    np.maximum(out, 0.0, out=out)
    return out
