"""Compiled inner loops for the self-projection step.

Both kernels run Matching Pursuit restricted to an already selected set of
atoms, tracking the correlations through the Gram matrix instead of the
residual; ties go to the lowest position.
"""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def self_project(g, gram, coef, eps, max_iter):
    """MP over the selected set until max |g| <= eps.

    g    -- correlations of the selected atoms with the residual (updated)
    gram -- Gram matrix of the selected atoms
    coef -- coefficient increments, accumulated in place
    Returns the number of inner iterations.
    """
    k = g.shape[0]
    it = 0
    while it < max_iter:
        q = 0
        best = abs(g[0])
        for i in range(1, k):
            a = abs(g[i])
            if a > best:
                best = a
                q = i
        if best <= eps:
            break
        step = g[q]
        coef[q] += step
        for i in range(k):
            g[i] -= step * gram[i, q]
        it += 1
    return it


@numba.njit(cache=True, nogil=True)
def self_project_pairs(g, gram_x, gram_y, lx, ly, coef, eps, max_iter):
    """Pair version: the Gram entry of two rank-1 atoms is the product of the
    1D Gram entries, so only the two 1D Gram matrices are needed."""
    k = g.shape[0]
    it = 0
    while it < max_iter:
        q = 0
        best = abs(g[0])
        for i in range(1, k):
            a = abs(g[i])
            if a > best:
                best = a
                q = i
        if best <= eps:
            break
        step = g[q]
        coef[q] += step
        qx = lx[q]
        qy = ly[q]
        for i in range(k):
            g[i] -= step * gram_x[lx[i], qx] * gram_y[ly[i], qy]
        it += 1
    return it


def warmup():
    g = np.zeros(1)
    self_project(g, np.ones((1, 1)), np.zeros(1), 1.0, 1)
    idx = np.zeros(1, dtype=np.int64)
    self_project_pairs(g, np.ones((1, 1)), np.ones((1, 1)), idx, idx, np.zeros(1), 1.0, 1)
