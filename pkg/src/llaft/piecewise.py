"""Piecewise surrogates of the softplus function log(1 + e^x).

Two fixed lookup tables drive the conjugate variational updates: a six-piece
linear table (slopes phi) and a five-piece quadratic table (linear rho,
quadratic zeta). Outside [-5, 5] both coincide with the exact asymptotes 0
and x. Segment intervals are left-open/right-closed, e.g. -5 < x <= -1.701.

The module also carries an independent verifier: a brute-force segmented
least-squares search that re-derives the linear table's knots and error from
scratch on a dense grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "LINEAR_KNOTS",
    "LINEAR_INTERCEPTS",
    "LINEAR_SLOPES",
    "QUADRATIC_KNOTS",
    "QUADRATIC_INTERCEPTS",
    "QUADRATIC_LINEAR",
    "QUADRATIC_QUADRATIC",
    "PiecewiseCoefficients",
    "BreakpointFit",
    "softplus",
    "softplus_linear",
    "softplus_quadratic",
    "segment_coefficients",
    "table_sse",
    "fit_linear_breakpoints",
]

# Six linear pieces on (-inf, -5], (-5, -1.701], (-1.701, 0], (0, 1.702],
# (1.702, 5], (5, inf).
LINEAR_KNOTS = np.array([-5.0, -1.701, 0.0, 1.702, 5.0])
LINEAR_INTERCEPTS = np.array([0.0, 0.1938, 0.6405, 0.6405, 0.1939, 0.0])
LINEAR_SLOPES = np.array([0.0, 0.0426, 0.3052, 0.6950, 0.9574, 1.0])

# Five quadratic pieces on (-inf, -5], (-5, -1.7], (-1.7, 1.7], (1.7, 5], (5, inf).
QUADRATIC_KNOTS = np.array([-5.0, -1.7, 1.7, 5.0])
QUADRATIC_INTERCEPTS = np.array([0.0, 0.3893, 0.6962, 0.3894, 0.0])
QUADRATIC_LINEAR = np.array([0.0, 0.1696, 0.5000, 0.8303, 1.0])
QUADRATIC_QUADRATIC = np.array([0.0, 0.0189, 0.1138, 0.0190, 0.0])

for _knots in (LINEAR_KNOTS, LINEAR_INTERCEPTS, LINEAR_SLOPES, QUADRATIC_KNOTS,
               QUADRATIC_INTERCEPTS, QUADRATIC_LINEAR, QUADRATIC_QUADRATIC):
    _knots.setflags(write=False)


@dataclass(frozen=True)
class PiecewiseCoefficients:
    """Per-observation surrogate coefficients at a vector of standardized
    residuals: linear slope phi and quadratic pair (rho, zeta)."""

    phi: np.ndarray
    rho: np.ndarray
    zeta: np.ndarray


@dataclass(frozen=True)
class BreakpointFit:
    breakpoints: np.ndarray
    sse: float
    r_squared: float


def softplus(x):
    """Exact log(1 + e^x), overflow-safe."""
    return np.logaddexp(0.0, x)


def _linear_segment(x):
    # left-open/right-closed intervals: index k means knots[k-1] < x <= knots[k]
    return np.searchsorted(LINEAR_KNOTS, x, side="left")


def _quadratic_segment(x):
    return np.searchsorted(QUADRATIC_KNOTS, x, side="left")


def softplus_linear(x):
    """Six-piece linear surrogate of softplus; scalar in, scalar out."""
    x = np.asarray(x, dtype=float)
    k = _linear_segment(x)
    out = LINEAR_INTERCEPTS[k] + LINEAR_SLOPES[k] * x
    return float(out) if out.ndim == 0 else out


def softplus_quadratic(x):
    """Five-piece quadratic surrogate of softplus."""
    x = np.asarray(x, dtype=float)
    k = _quadratic_segment(x)
    out = QUADRATIC_INTERCEPTS[k] + (QUADRATIC_LINEAR[k] + QUADRATIC_QUADRATIC[k] * x) * x
    return float(out) if out.ndim == 0 else out


def segment_coefficients(z_hat) -> PiecewiseCoefficients:
    """Surrogate coefficients for the segments containing each z_hat value."""
    z_hat = np.atleast_1d(np.asarray(z_hat, dtype=float))
    kl = _linear_segment(z_hat)
    kq = _quadratic_segment(z_hat)
    return PiecewiseCoefficients(
        phi=LINEAR_SLOPES[kl],
        rho=QUADRATIC_LINEAR[kq],
        zeta=QUADRATIC_QUADRATIC[kq],
    )


def _grid(grid_size: int):
    x = np.linspace(-5.0, 5.0, grid_size)
    return x, softplus(x)


def table_sse(grid_size: int = 10_000) -> tuple[float, float]:
    """(linear, quadratic) sums of squared error of the published tables on an
    equispaced grid over [-5, 5]."""
    x, y = _grid(grid_size)
    lin = float(np.sum((softplus_linear(x) - y) ** 2))
    quad = float(np.sum((softplus_quadratic(x) - y) ** 2))
    return lin, quad


class _SplineLS:
    """Least-squares SSE of a hinge-basis spline, one O(k^3) solve per call.

    All grid sums enter through suffix sums taken at each knot, so evaluating
    a candidate knot tuple never touches the grid again.
    """

    def __init__(self, x, y):
        self.n = float(len(x))
        self.x = x
        self.sx = float(x.sum())
        self.sxx = float((x * x).sum())
        self.sy = float(y.sum())
        self.sxy = float((x * y).sum())
        self.syy = float((y * y).sum())
        zero = np.zeros(1)
        self._cs0 = np.concatenate([np.cumsum(np.ones_like(x)[::-1])[::-1], zero])
        self._cs1 = np.concatenate([np.cumsum(x[::-1])[::-1], zero])
        self._cs2 = np.concatenate([np.cumsum((x * x)[::-1])[::-1], zero])
        self._ct0 = np.concatenate([np.cumsum(y[::-1])[::-1], zero])
        self._ct1 = np.concatenate([np.cumsum((x * y)[::-1])[::-1], zero])

    def sse(self, knots) -> float:
        knots = np.asarray(knots, float)
        k = len(knots)
        idx = np.searchsorted(self.x, knots, side="right")
        s0, s1, s2 = self._cs0[idx], self._cs1[idx], self._cs2[idx]
        t0, t1 = self._ct0[idx], self._ct1[idx]
        d = k + 2
        M = np.empty((d, d))
        rhs = np.empty(d)
        M[0, 0] = self.n
        M[0, 1] = M[1, 0] = self.sx
        M[1, 1] = self.sxx
        rhs[0] = self.sy
        rhs[1] = self.sxy
        for i in range(k):
            a = knots[i]
            M[0, 2 + i] = M[2 + i, 0] = s1[i] - a * s0[i]
            M[1, 2 + i] = M[2 + i, 1] = s2[i] - a * s1[i]
            rhs[2 + i] = t1[i] - a * t0[i]
            for l in range(i, k):
                # inner products of hinges use the suffix at the larger knot
                v = s2[l] - (a + knots[l]) * s1[l] + a * knots[l] * s0[l]
                M[2 + i, 2 + l] = M[2 + l, 2 + i] = v
        try:
            coef = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            return float("inf")
        return float(self.syy - coef @ rhs)


def fit_linear_breakpoints(grid_size: int = 10_000, n_breakpoints: int = 3,
                           lattice_step: float = 0.05) -> BreakpointFit:
    """Best continuous linear spline fit of softplus on [-5, 5] by knot search.

    Knots live on a lattice with the given step. Up to three knots the search
    is exhaustive over all increasing tuples. For four or five knots an
    exhaustive pass on a 0.25 lattice (plus the best smaller fit extended by
    one knot) seeds coordinate-descent refinement on the fine lattice, which
    keeps the search tractable while staying nested-model consistent.
    """
    if not 0 <= n_breakpoints <= 5:
        raise ValueError("n_breakpoints must be between 0 and 5")
    x, y = _grid(grid_size)
    ss_tot = float(np.sum((y - y.mean()) ** 2))

    def lattice(step):
        k = np.round(np.arange(-5.0 + step, 5.0 - step / 2, step) / step) * step
        return k + 0.0  # normalize -0.0

    fine = lattice(lattice_step)

    if n_breakpoints <= 3:
        sse, knots = _kernels.best_segmented_fit(x, y, fine, n_breakpoints)
        return BreakpointFit(np.asarray(knots), sse, 1.0 - sse / ss_tot)

    ls = _SplineLS(x, y)
    coarse_sse, coarse_knots = _kernels.best_segmented_fit(x, y, lattice(0.25),
                                                           n_breakpoints)

    prev = fit_linear_breakpoints(grid_size, n_breakpoints - 1, lattice_step)
    grown_sse, grown = np.inf, None
    for extra in fine:
        if np.min(np.abs(prev.breakpoints - extra)) < lattice_step / 2:
            continue
        knots = np.sort(np.append(prev.breakpoints, extra))
        s = ls.sse(knots)
        if s < grown_sse:
            grown_sse, grown = s, knots

    best_sse, best = min((coarse_sse, np.asarray(coarse_knots)), (grown_sse, grown),
                         key=lambda t: t[0])

    # coordinate descent on the fine lattice until no knot moves
    for _ in range(20):
        moved = False
        for i in range(n_breakpoints):
            lo = best[i - 1] if i > 0 else -5.0
            hi = best[i + 1] if i + 1 < n_breakpoints else 5.0
            options = fine[(fine > lo + lattice_step / 2) & (fine < hi - lattice_step / 2)]
            for opt in options:
                trial = best.copy()
                trial[i] = opt
                s = ls.sse(trial)
                if s < best_sse - 1e-12:
                    best_sse, best = s, trial
                    moved = True
        if not moved:
            break

    return BreakpointFit(best, best_sse, 1.0 - best_sse / ss_tot)
