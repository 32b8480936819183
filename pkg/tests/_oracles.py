"""Independent reference implementations used only by the tests.

These deliberately avoid the package's algorithms: the assignment solver is
checked against a linear program over the transport polytope, quantile
couplings against permutation enumeration, and quadratures against scipy.
"""
import itertools

import numpy as np
from scipy.optimize import linprog


def w2_lp(a_atoms, b_atoms):
    """Exact W2 by linear programming over the full transport polytope."""
    a = np.atleast_2d(np.asarray(a_atoms, float))
    b = np.atleast_2d(np.asarray(b_atoms, float))
    if a.shape[0] == 1 and a.shape[1] > 1 and b.ndim == 2 and b.shape[0] != 1:
        a = a.T
    m, k = a.shape[0], b.shape[0]
    cost = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2).ravel()
    a_eq = []
    for i in range(m):
        row = np.zeros(m * k)
        row[i * k:(i + 1) * k] = 1.0
        a_eq.append(row)
    for j in range(k):
        row = np.zeros(m * k)
        row[j::k] = 1.0
        a_eq.append(row)
    b_eq = np.concatenate([np.full(m, 1.0 / m), np.full(k, 1.0 / k)])
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=b_eq, bounds=(0, None),
                  method="highs")
    assert res.success
    return float(np.sqrt(res.fun))


def w2_permutations(a_atoms, b_atoms):
    """Exact equal-count W2 by brute-force enumeration of permutations."""
    a = np.atleast_2d(np.asarray(a_atoms, float))
    b = np.atleast_2d(np.asarray(b_atoms, float))
    if a.shape[0] == 1 and a.shape[1] > 1:
        a, b = a.T, b.T
    m = a.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(m)):
        cost = float(((a - b[list(perm)]) ** 2).sum()) / m
        best = min(best, cost)
    return float(np.sqrt(best))


def random_union_cut_norm(kernel, candidates, seed):
    """Randomized block-union maximization of |integral over S x T|."""
    rng = np.random.default_rng(seed)
    w = np.diff(kernel.boundaries)
    masses = kernel.values * np.outer(w, w)
    k = masses.shape[0]
    best = 0.0
    for _ in range(candidates):
        s = rng.random(k) < 0.5
        t = rng.random(k) < 0.5
        best = max(best, abs(float(masses[np.ix_(s, t)].sum())))
    return best
