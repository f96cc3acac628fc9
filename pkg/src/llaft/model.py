"""Log-logistic accelerated failure time model for right-censored data.

The model is log(T_i) = x_i' beta + b z_i with z_i standard logistic, so that
with y_i = log(t_i), delta_i the event indicator and r = sum(delta_i), the
log-likelihood is

    l(beta, b) = -r log b + sum_i [ delta_i z_i - (1 + delta_i) log(1 + e^{z_i}) ],
    z_i = (y_i - x_i' beta) / b.

Priors for the Bayesian treatment are beta ~ N_p(mu0, (1/v0) I) and
b ~ Inverse-Gamma(alpha0, omega0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import DataError, NumericalError
from .numerics import InverseGammaParams, inverse_gamma_log_pdf

__all__ = [
    "SurvivalDataset",
    "PriorSpec",
    "ModelParams",
    "log_likelihood",
    "log_posterior",
]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored survival data with an intercept-leading design matrix.

    Attributes
    ----------
    time : (n,) observed times t_i = min(T_i, C_i), strictly positive
    event : (n,) indicators, 1.0 = event observed, 0.0 = right censored
    covariates : (n, p) design matrix whose first column is all ones
    log_time : (n,) natural log of `time`, derived at construction
    """

    time: np.ndarray
    event: np.ndarray
    covariates: np.ndarray
    log_time: np.ndarray = field(init=False)

    def __post_init__(self):
        time = _readonly(self.time)
        event = _readonly(self.event)
        X = _readonly(self.covariates)
        if X.ndim != 2:
            raise DataError("covariates must be a 2-D array")
        n, p = X.shape
        if time.shape != (n,) or event.shape != (n,):
            raise DataError("time, event and covariates disagree on n")
        if p < 1:
            raise DataError("covariates must at least contain the intercept column")
        if n and not np.all(X[:, 0] == 1.0):
            raise DataError("first covariate column must be the intercept (all ones)")
        if np.any(time <= 0) or not np.all(np.isfinite(time)):
            raise DataError("observed times must be positive and finite")
        if not np.all((event == 0.0) | (event == 1.0)):
            raise DataError("event indicators must be 0 or 1")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "log_time", _readonly(np.log(time)))

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def r(self) -> int:
        """Number of observed (uncensored) events."""
        return int(self.event.sum())

    @classmethod
    def from_log_times(cls, log_time, event, covariates) -> "SurvivalDataset":
        return cls(np.exp(np.asarray(log_time, float)), event, covariates)


@dataclass(frozen=True)
class PriorSpec:
    """N_p(coef_mean, (1/coef_precision) I) prior on the coefficients and
    Inverse-Gamma(scale_shape, scale_rate) prior on the scale."""

    coef_mean: np.ndarray
    coef_precision: float
    scale_shape: float
    scale_rate: float

    def __post_init__(self):
        mean = _readonly(np.atleast_1d(self.coef_mean))
        if mean.ndim != 1:
            raise ValueError("coef_mean must be a vector")
        if not self.coef_precision > 0:
            raise ValueError(f"coef_precision must be positive, got {self.coef_precision}")
        if not (self.scale_shape > 0 and self.scale_rate > 0):
            raise ValueError("scale_shape and scale_rate must be positive")
        object.__setattr__(self, "coef_mean", mean)

    @property
    def scale_params(self) -> InverseGammaParams:
        return InverseGammaParams(self.scale_shape, self.scale_rate)


@dataclass(frozen=True)
class ModelParams:
    """A point (beta, b) in parameter space."""

    coefficients: np.ndarray
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "coefficients", _readonly(np.atleast_1d(self.coefficients)))


def log_likelihood(data: SurvivalDataset, params: ModelParams) -> float:
    """Exact log-likelihood at (beta, b); raises on a non-finite result."""
    if data.n == 0:
        raise DataError("log_likelihood requires a nonempty dataset")
    if params.coefficients.shape[0] != data.p:
        raise ValueError("coefficient vector does not match covariate dimension")
    value = _kernels.log_likelihood_sum(
        data.log_time, data.event, data.covariates,
        params.coefficients, math.log(params.scale),
    )
    if not math.isfinite(value):
        raise NumericalError(f"non-finite log-likelihood at scale={params.scale}")
    return value


def log_posterior(data: SurvivalDataset, params: ModelParams, prior: PriorSpec) -> float:
    """Log of likelihood times prior, all normalizing constants included."""
    beta = params.coefficients
    p = beta.shape[0]
    v0 = prior.coef_precision
    diff = beta - prior.coef_mean
    lp_beta = -0.5 * p * math.log(2.0 * math.pi / v0) - 0.5 * v0 * float(diff @ diff)
    lp_scale = inverse_gamma_log_pdf(prior.scale_params, params.scale)
    value = log_likelihood(data, params) + lp_beta + lp_scale
    if not math.isfinite(value):
        raise NumericalError("non-finite log-posterior")
    return value
