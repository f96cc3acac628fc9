"""Pure-NumPy implementations of the hot kernels.

Mirrors the native Cython module `_native`; the package selects between the
two at import time. Both backends iterate candidate knot tuples in the same
lexicographic order with strict-improvement comparisons, so they return the
same minimizer up to floating-point ties.
"""
from __future__ import annotations

import itertools

import numpy as np

BACKEND = "pure"


def log_likelihood_sum(y, event, X, beta, log_b) -> float:
    """Log-likelihood of a right-censored log-logistic AFT model.

    -r log b + sum_i [ delta_i z_i - (1 + delta_i) log(1 + e^{z_i}) ],
    z_i = (y_i - x_i' beta) / b, with the overflow-safe softplus.
    """
    b = np.exp(log_b)
    z = (y - X @ beta) / b
    r = float(event.sum())
    return float(-r * log_b + np.sum(event * z - (1.0 + event) * np.logaddexp(0.0, z)))


def _suffix_sums(x, y, cand):
    """Sums of 1, x, x^2, y, xy over grid points strictly above each candidate."""
    idx = np.searchsorted(x, cand, side="right")
    zero = np.zeros(1)
    cs0 = np.concatenate([np.cumsum(np.ones_like(x)[::-1])[::-1], zero])
    cs1 = np.concatenate([np.cumsum(x[::-1])[::-1], zero])
    cs2 = np.concatenate([np.cumsum((x * x)[::-1])[::-1], zero])
    ct0 = np.concatenate([np.cumsum(y[::-1])[::-1], zero])
    ct1 = np.concatenate([np.cumsum((x * y)[::-1])[::-1], zero])
    return cs0[idx], cs1[idx], cs2[idx], ct0[idx], ct1[idx]


def best_segmented_fit(x, y, cand, k):
    """Exhaustive least-squares search for the best k-knot linear spline.

    Fits y ~ 1 + x + sum_j (x - a_j)_+ over every strictly increasing k-tuple
    of knots drawn from `cand`, entirely through precomputed suffix sums, and
    returns (sse, knots) for the minimizer. k = 0 fits a single line.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    cand = np.asarray(cand, float)
    n = float(len(x))
    sx = float(x.sum())
    sxx = float((x * x).sum())
    sy = float(y.sum())
    sxy = float((x * y).sum())
    syy = float((y * y).sum())

    if k == 0:
        M = np.array([[n, sx], [sx, sxx]])
        rhs = np.array([sy, sxy])
        beta = np.linalg.solve(M, rhs)
        return syy - float(beta @ rhs), np.empty(0)

    S0, S1, S2, T0, T1 = _suffix_sums(x, y, cand)
    m = len(cand)
    d = k + 2
    best_sse = np.inf
    best = None

    for head in itertools.combinations(range(m), k - 1):
        t0 = head[-1] + 1 if head else 0
        tails = np.arange(t0, m)
        if len(tails) == 0:
            continue
        nt = len(tails)
        M = np.empty((nt, d, d))
        rhs = np.empty((nt, d))
        M[:, 0, 0] = n
        M[:, 0, 1] = sx
        M[:, 1, 1] = sxx
        rhs[:, 0] = sy
        rhs[:, 1] = sxy
        for i, ji in enumerate(head):
            a = cand[ji]
            M[:, 0, 2 + i] = S1[ji] - a * S0[ji]
            M[:, 1, 2 + i] = S2[ji] - a * S1[ji]
            rhs[:, 2 + i] = T1[ji] - a * T0[ji]
            for l in range(i, k - 1):
                jl = head[l]
                bv = cand[jl]
                M[:, 2 + i, 2 + l] = S2[jl] - (a + bv) * S1[jl] + a * bv * S0[jl]
        c = cand[tails]
        M[:, 0, d - 1] = S1[tails] - c * S0[tails]
        M[:, 1, d - 1] = S2[tails] - c * S1[tails]
        rhs[:, d - 1] = T1[tails] - c * T0[tails]
        for i, ji in enumerate(head):
            a = cand[ji]
            M[:, 2 + i, d - 1] = S2[tails] - (a + c) * S1[tails] + a * c * S0[tails]
        M[:, d - 1, d - 1] = S2[tails] - 2.0 * c * S1[tails] + c * c * S0[tails]
        for r_ in range(d):
            for c_ in range(r_):
                M[:, r_, c_] = M[:, c_, r_]
        try:
            beta = np.linalg.solve(M, rhs[..., None])[..., 0]
            sse = syy - np.einsum("ij,ij->i", beta, rhs)
        except np.linalg.LinAlgError:
            sse = np.empty(nt)
            for t in range(nt):
                try:
                    bt = np.linalg.solve(M[t], rhs[t])
                    sse[t] = syy - float(bt @ rhs[t])
                except np.linalg.LinAlgError:
                    sse[t] = np.inf
        tbest = int(np.argmin(sse))
        if sse[tbest] < best_sse:
            best_sse = float(sse[tbest])
            best = (*head, int(tails[tbest]))

    return best_sse, cand[list(best)]
