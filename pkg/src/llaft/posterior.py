"""Posterior summaries: means, SDs, equal-tailed and highest-density intervals.

Coefficients are summarized from their Gaussian variational factor with
equal-tailed intervals. The scale parameter's Inverse-Gamma factor is skewed,
so its interval is the highest-density interval: the shortest interval with
the requested mass, found by golden-section search over the lower tail mass
(interval length is unimodal in that mass for a unimodal density).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cavi import VariationalState
from .exceptions import NumericalError
from .numerics import InverseGammaParams, inverse_gamma_quantile, normal_quantile

__all__ = [
    "ParameterSummary",
    "summarize_coefficients",
    "summarize_scale",
    "acceleration_factor",
    "inverse_gamma_hdi",
    "hdi_from_draws",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    interval_low: float
    interval_high: float
    interval_kind: str  # "ETI" or "HDI"

    def __post_init__(self):
        if not self.interval_low < self.interval_high:
            raise ValueError("interval_low must be below interval_high")


def summarize_coefficients(state: VariationalState, level: float = 0.95,
                           names: list[str] | None = None) -> list[ParameterSummary]:
    """Per-coefficient mean, SD and equal-tailed interval mu_j +/- z * sd_j."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    if state.coef_cov is None:
        raise ValueError("state has no covariance; fit before summarizing")
    z = normal_quantile(0.5 * (1.0 + level))
    sds = np.sqrt(np.diag(state.coef_cov))
    names = names or [f"beta{j}" for j in range(len(sds))]
    out = []
    for j, (m, s) in enumerate(zip(state.coef_mean, sds)):
        out.append(ParameterSummary(
            name=names[j], mean=float(m), sd=float(s),
            interval_low=float(m - z * s), interval_high=float(m + z * s),
            interval_kind="ETI",
        ))
    return out


def inverse_gamma_hdi(params: InverseGammaParams, level: float = 0.95,
                      tol: float = 1e-8) -> tuple[float, float]:
    """Shortest interval holding `level` mass, by golden-section over the
    lower-tail mass t in [0, 1 - level]."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    eps = 1e-12
    lo, hi = eps, (1.0 - level) - eps
    if hi <= lo:
        raise ValueError("level leaves no room for a tail search")

    def length(t: float) -> float:
        return (inverse_gamma_quantile(params, t + level)
                - inverse_gamma_quantile(params, t))

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = length(c), length(d)
    for _ in range(200):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = length(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = length(d)
    else:
        raise NumericalError("HDI golden-section search did not converge")
    t = 0.5 * (a + b)
    return (inverse_gamma_quantile(params, t),
            inverse_gamma_quantile(params, t + level))


def summarize_scale(state: VariationalState, level: float = 0.95,
                    name: str = "scale") -> ParameterSummary:
    """Scale summary: mean omega/(alpha-1), SD omega/((alpha-1) sqrt(alpha-2))
    (NaN when alpha <= 2), and the highest-density interval."""
    a, w = state.scale_shape, state.scale_rate
    if a <= 1:
        raise NumericalError("scale mean undefined for shape <= 1")
    mean = w / (a - 1.0)
    sd = w / ((a - 1.0) * math.sqrt(a - 2.0)) if a > 2.0 else float("nan")
    low, high = inverse_gamma_hdi(InverseGammaParams(a, w), level)
    return ParameterSummary(name=name, mean=mean, sd=sd,
                            interval_low=low, interval_high=high,
                            interval_kind="HDI")


def acceleration_factor(summary: ParameterSummary) -> ParameterSummary:
    """Multiplicative effect on event time: exponentiates the point estimate
    and both interval endpoints (a monotone transform); the SD carries over by
    the first-order delta method."""
    mean = math.exp(summary.mean)
    return replace(
        summary,
        name=f"exp({summary.name})",
        mean=mean,
        sd=mean * summary.sd,
        interval_low=math.exp(summary.interval_low),
        interval_high=math.exp(summary.interval_high),
    )


def hdi_from_draws(draws: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    """Sample highest-density interval: the shortest window covering
    ceil(level * n) sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = len(x)
    k = int(math.ceil(level * n))
    if k < 2 or k > n:
        raise ValueError("not enough draws for the requested level")
    widths = x[k - 1:] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])
