"""Synthetic-data generation and the replication study harness.

Draw streams are counter-based: every variate is a pure function of
(seed, replicate, role, index) through a SplitMix64-style bit mixer, so the
generated datasets are identical across platforms and never shift when
methods are added to a study. Uniforms come from the top 53 bits; logistic
and censoring draws invert their CDFs and normal draws go through the
rational-approximation normal quantile.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cavi import FitConfig, fit
from .exceptions import NumericalError
from .model import PriorSpec, SurvivalDataset
from .numerics import normal_quantile
from .posterior import hdi_from_draws, summarize_coefficients, summarize_scale
from .reference import fit_mle, sample_posterior

__all__ = [
    "SimulationScenario",
    "ParameterStats",
    "ReplicationReport",
    "WEAK_PRIOR",
    "STRONG_PRIOR",
    "uniform_stream",
    "generate_dataset",
    "aggregate_estimates",
    "run_replication",
    "write_report_csv",
    "write_dataset_csv",
    "report_text_table",
]

# Simulation priors for the three-covariate study model.
WEAK_PRIOR = PriorSpec(coef_mean=np.zeros(3), coef_precision=0.1,
                       scale_shape=11.0, scale_rate=10.0)
STRONG_PRIOR = PriorSpec(coef_mean=np.array([0.3, 0.1, 1.0]), coef_precision=0.15,
                         scale_shape=11.0, scale_rate=8.0)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_U30, _U27, _U31, _U11 = (np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11))

ROLE_X1, ROLE_X2, ROLE_NOISE, ROLE_CENSOR, ROLE_MCMC = range(5)


def _mix64(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps silently, which is exactly what we want
    z = (z ^ (z >> _U30)) * np.uint64(_MIX1)
    z = (z ^ (z >> _U27)) * np.uint64(_MIX2)
    return z ^ (z >> _U31)


def _mix64_int(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _stream_key(seed: int, replicate: int, role: int) -> int:
    k = _mix64_int(((seed & _MASK64) * _GOLDEN + _GOLDEN) & _MASK64)
    k = _mix64_int((k + replicate * _GOLDEN) & _MASK64)
    return _mix64_int((k + role * _GOLDEN) & _MASK64)


def uniform_stream(seed: int, replicate: int, role: int, n: int) -> np.ndarray:
    """n uniforms in (0, 1), a pure function of (seed, replicate, role)."""
    key = _stream_key(seed, replicate, role)
    idx = np.arange(1, n + 1, dtype=np.uint64)
    bits = _mix64(np.uint64(key) + idx * np.uint64(_GOLDEN))
    return ((bits >> _U11).astype(np.float64) + 0.5) * (2.0 ** -53)


def stream_seed(seed: int, replicate: int, role: int) -> int:
    """A derived integer seed (e.g. for the Metropolis sampler)."""
    return _stream_key(seed, replicate, role)


@dataclass(frozen=True)
class SimulationScenario:
    """Data-generating configuration for one study cell.

    censor_bound is the upper limit u of the Uniform(0, u) censoring times;
    zero disables censoring entirely.
    """

    n: int
    censor_bound: float = 0.0
    n_replicates: int = 500
    seed: int = 0
    true_coefficients: np.ndarray = field(
        default_factory=lambda: np.array([0.5, 0.2, 0.8]))
    true_scale: float = 0.8

    def __post_init__(self):
        if self.n < 1 or self.n_replicates < 1:
            raise ValueError("n and n_replicates must be at least 1")
        if self.censor_bound < 0:
            raise ValueError("censor_bound must be nonnegative")
        coef = np.ascontiguousarray(self.true_coefficients, dtype=float)
        coef.setflags(write=False)
        object.__setattr__(self, "true_coefficients", coef)

    @property
    def true_values(self) -> np.ndarray:
        return np.append(self.true_coefficients, self.true_scale)


def generate_dataset(scenario: SimulationScenario, replicate_index: int) -> SurvivalDataset:
    """One synthetic dataset: x1 ~ N(1, 0.2^2), x2 ~ Bernoulli(1/2),
    logistic noise, and Uniform(0, u) right censoring when u > 0."""
    n, seed = scenario.n, scenario.seed
    x1 = 1.0 + 0.2 * normal_quantile(uniform_stream(seed, replicate_index, ROLE_X1, n))
    x2 = (uniform_stream(seed, replicate_index, ROLE_X2, n) < 0.5).astype(float)
    u_noise = uniform_stream(seed, replicate_index, ROLE_NOISE, n)
    z = np.log(u_noise / (1.0 - u_noise))
    X = np.column_stack([np.ones(n), x1, x2])
    event_time = np.exp(X @ scenario.true_coefficients + scenario.true_scale * z)
    if scenario.censor_bound > 0:
        censor_time = scenario.censor_bound * uniform_stream(
            seed, replicate_index, ROLE_CENSOR, n)
        observed = np.minimum(event_time, censor_time)
        event = (event_time <= censor_time).astype(float)
    else:
        observed = event_time
        event = np.ones(n)
    return SurvivalDataset(time=observed, event=event, covariates=X)


@dataclass(frozen=True)
class ParameterStats:
    parameter: str
    bias: float
    sample_sd: float
    mse: float
    coverage_percent: float
    avg_interval_length: float


@dataclass(frozen=True)
class ReplicationReport:
    method: str
    stats: tuple
    n_replicates: int
    n_failures: int
    wall_time: float


def aggregate_estimates(estimates: np.ndarray, intervals: np.ndarray,
                        truth: np.ndarray, names: list[str]) -> tuple:
    """Bias, sample SD, MSE, closed-interval coverage and average length,
    parameter by parameter."""
    out = []
    n = estimates.shape[0]
    for j, name in enumerate(names):
        est = estimates[:, j]
        bias = float(est.mean() - truth[j])
        sd = float(est.std(ddof=1)) if n > 1 else 0.0
        mse = float(np.mean((truth[j] - est) ** 2))
        inside = (intervals[:, j, 0] <= truth[j]) & (truth[j] <= intervals[:, j, 1])
        out.append(ParameterStats(
            parameter=name,
            bias=bias,
            sample_sd=sd,
            mse=mse,
            coverage_percent=float(100.0 * inside.mean()),
            avg_interval_length=float(np.mean(intervals[:, j, 1] - intervals[:, j, 0])),
        ))
    return tuple(out)


def _fit_vb(data, prior, config, level):
    state = fit(data, prior, config)
    coef = summarize_coefficients(state, level)
    scale = summarize_scale(state, level)
    est = np.array([s.mean for s in coef] + [scale.mean])
    iv = np.array([[s.interval_low, s.interval_high] for s in coef]
                  + [[scale.interval_low, scale.interval_high]])
    return est, iv


def _fit_mle(data, level):
    res = fit_mle(data)
    est = np.append(res.coefficients, res.scale)
    iv = np.array(res.wald_intervals(level))
    return est, iv


def _fit_mcmc(data, prior, level, seed, n_iterations, burn_in):
    chain = sample_posterior(data, prior, n_iterations, burn_in, seed)
    qs = [100.0 * (1.0 - level) / 2.0, 100.0 * (1.0 + level) / 2.0]
    est = chain.draws.mean(axis=0)
    iv = [np.percentile(chain.coefficient_draws[:, j], qs)
          for j in range(chain.coefficient_draws.shape[1])]
    iv.append(hdi_from_draws(chain.scale_draws, level))
    return est, np.asarray(iv)


def run_replication(scenario: SimulationScenario, prior: PriorSpec,
                    methods=("vb", "mle"), config: FitConfig | None = None,
                    level: float = 0.95, mcmc_iterations: int = 5000,
                    mcmc_burn_in: int = 1000,
                    max_failure_rate: float = 0.01) -> list[ReplicationReport]:
    """Run the study: generate each replicate once, fit every requested
    method on it, and aggregate bias/SD/MSE/coverage/length per parameter.

    Replicates on which a method breaks down numerically are excluded from
    that method's aggregate; more than `max_failure_rate` of them fails the
    whole run.
    """
    methods = tuple(m.lower() for m in methods)
    known = {"vb", "mle", "mcmc"}
    if not set(methods) <= known:
        raise ValueError(f"unknown methods: {set(methods) - known}")
    methods = tuple(m for m in ("vb", "mle", "mcmc") if m in methods)
    config = config or FitConfig()
    p = scenario.true_coefficients.shape[0]
    names = [f"beta{j}" for j in range(p)] + ["scale"]
    truth = scenario.true_values

    per_method = {m: {"est": [], "iv": [], "failures": 0, "time": 0.0}
                  for m in methods}
    for i in range(scenario.n_replicates):
        data = generate_dataset(scenario, i)
        for m in methods:
            bucket = per_method[m]
            start = time.perf_counter()
            try:
                if m == "vb":
                    est, iv = _fit_vb(data, prior, config, level)
                elif m == "mle":
                    est, iv = _fit_mle(data, level)
                else:
                    est, iv = _fit_mcmc(data, prior, level,
                                        stream_seed(scenario.seed, i, ROLE_MCMC),
                                        mcmc_iterations, mcmc_burn_in)
            except NumericalError:
                bucket["failures"] += 1
            else:
                bucket["est"].append(est)
                bucket["iv"].append(iv)
            bucket["time"] += time.perf_counter() - start

    reports = []
    for m in methods:
        bucket = per_method[m]
        failures = bucket["failures"]
        if failures > max_failure_rate * scenario.n_replicates:
            raise NumericalError(
                f"method {m} failed on {failures}/{scenario.n_replicates} replicates")
        stats = aggregate_estimates(np.asarray(bucket["est"]),
                                    np.asarray(bucket["iv"]), truth, names)
        reports.append(ReplicationReport(
            method=m, stats=stats,
            n_replicates=scenario.n_replicates - failures,
            n_failures=failures,
            wall_time=bucket["time"],
        ))
    return reports


def _fmt(x: float) -> str:
    return repr(float(x))


def write_report_csv(path, reports, scenario: SimulationScenario,
                     prior: PriorSpec) -> None:
    """Serialize reports with a run-metadata header block. Output bytes are a
    pure function of scenario, prior and results (timings stay out)."""
    lines = [
        "# llaft replication report",
        f"# scenario: n={scenario.n} censor_bound={_fmt(scenario.censor_bound)}"
        f" replicates={scenario.n_replicates} seed={scenario.seed}",
        f"# true: coefficients={','.join(_fmt(v) for v in scenario.true_coefficients)}"
        f" scale={_fmt(scenario.true_scale)}",
        f"# prior: mean={','.join(_fmt(v) for v in prior.coef_mean)}"
        f" precision={_fmt(prior.coef_precision)}"
        f" shape={_fmt(prior.scale_shape)} rate={_fmt(prior.scale_rate)}",
        f"# methods: {','.join(r.method for r in reports)}",
        f"# failures: {' '.join(f'{r.method}={r.n_failures}' for r in reports)}",
        "method,parameter,bias,sd,mse,coverage,avg_length",
    ]
    for rep in reports:
        for s in rep.stats:
            lines.append(
                f"{rep.method},{s.parameter},{_fmt(s.bias)},{_fmt(s.sample_sd)},"
                f"{_fmt(s.mse)},{_fmt(s.coverage_percent)},{_fmt(s.avg_interval_length)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_dataset_csv(path, data: SurvivalDataset,
                      covariate_names: list[str] | None = None) -> None:
    """Write a dataset as time,status,covariates (intercept column omitted)
    at full precision, so re-ingestion reproduces it bit for bit."""
    p = data.p
    names = covariate_names or [f"x{j}" for j in range(1, p)]
    if len(names) != p - 1:
        raise ValueError("need one name per non-intercept covariate")
    lines = ["time,status," + ",".join(names)]
    for i in range(data.n):
        cov = ",".join(_fmt(v) for v in data.covariates[i, 1:])
        lines.append(f"{_fmt(data.time[i])},{int(data.event[i])},{cov}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def report_text_table(reports, scenario: SimulationScenario) -> str:
    """Fixed-width summary table, six significant digits."""
    def fmt(x):
        return f"{x:.6g}"

    header = (f"replication study: n={scenario.n}, censoring bound="
              f"{fmt(scenario.censor_bound)}, replicates={scenario.n_replicates}, "
              f"seed={scenario.seed}")
    rows = [("method", "parameter", "bias", "sd", "mse", "coverage%", "avg_len")]
    for rep in reports:
        for s in rep.stats:
            rows.append((rep.method, s.parameter, fmt(s.bias), fmt(s.sample_sd),
                         fmt(s.mse), fmt(s.coverage_percent),
                         fmt(s.avg_interval_length)))
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    body = "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths))
                     for row in rows)
    times = "  ".join(f"{r.method}: {r.wall_time:.2f}s" for r in reports)
    return f"{header}\n{body}\nwall time  {times}\n"
