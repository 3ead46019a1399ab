"""Synthetic-data experiments comparing finite-d behaviour against the asymptotic theory.

Every replicate draws from its own generator ``default_rng([seed, r])``, so a
replicate's numbers do not depend on which worker runs it or in what order,
and serial and parallel runs agree bit for bit.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _csv
from .bagging import AggregateDataset, assign_bags
from .errors import ConfigMismatch, DivergentVariance, DomainError, SingularSystem
from .estimator import conditional_bias_variance, fit_interpolating
from .privacy import DpConfig, dp_risk_theory, privatize
from .theory import theory_point


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    theta0: np.ndarray
    sigma: float


def realized_n(d: int, psi: float, k: int) -> int:
    """``psi * d`` rounded to the nearest positive multiple of ``k``."""
    return max(k, k * int(math.floor(psi * d / k + 0.5)))


def generate_synthetic(d: int, psi: float, snr: float, k: int = 1, seed=None) -> Dataset:
    """Gaussian design, unit-norm ``theta0`` and ``y = X theta0 + w``, ``w ~ N(0, 1/snr)``.

    ``snr = inf`` gives noiseless responses.  ``seed`` may be a Generator.
    """
    if int(d) != d or d < 2:
        raise DomainError(f"d must be an integer >= 2, got {d}")
    if not psi > 0 or not snr > 0:
        raise DomainError(f"psi and snr must be positive, got psi={psi}, snr={snr}")
    rng = np.random.default_rng(seed)
    n = realized_n(d, psi, k)
    theta0 = rng.standard_normal(d)
    theta0 /= np.linalg.norm(theta0)
    X = rng.standard_normal((n, d))
    sigma = 0.0 if math.isinf(snr) else 1.0 / math.sqrt(snr)
    w = rng.standard_normal(n)
    return Dataset(X, X @ theta0 + sigma * w, theta0, sigma)


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    psi: float
    k: int
    snr: float
    rho_grid: tuple
    replicates: int = 20
    seed: int = 0
    dp: DpConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "rho_grid", tuple(float(r) for r in self.rho_grid))
        if not self.rho_grid:
            raise DomainError("rho_grid must not be empty")
        if any(not 0.0 <= r <= 1.0 for r in self.rho_grid):
            raise DomainError(f"rho values must lie in [0, 1], got {self.rho_grid}")
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"d must be an integer >= 2, got {self.d}")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise DomainError(f"replicates must be a positive integer, got {self.replicates}")
        if not self.snr > 0 or not self.psi > 1:
            raise DomainError(f"need snr > 0 and psi > 1, got snr={self.snr}, psi={self.psi}")
        if self.dp is not None and (self.dp.k != self.k or self.dp.n != self.n):
            raise ConfigMismatch(
                f"DP config has (k={self.dp.k}, n={self.dp.n}), experiment has (k={self.k}, n={self.n})"
            )

    @property
    def n(self) -> int:
        return realized_n(self.d, self.psi, self.k)

    @property
    def psi_hat(self) -> float:
        return self.n / self.d

    def with_dp(self, epsilon: float, clip_constant: float, sensitivity="paper") -> ExperimentConfig:
        return replace(self, dp=DpConfig(epsilon, clip_constant, self.k, self.n, sensitivity))


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, else ``$AGGLEARN_WORKERS``, else 1."""
    if workers is None:
        workers = int(os.environ.get("AGGLEARN_WORKERS", "1"))
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    return workers


def _map_replicates(fn, cfg: ExperimentConfig, workers: int | None):
    workers = min(resolve_workers(workers), cfg.replicates)
    indices = range(cfg.replicates)
    if workers == 1:
        return [fn(cfg, r) for r in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [cfg] * cfg.replicates, indices))


def _replicate_rng(cfg: ExperimentConfig, r: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, r])


def _se(values: np.ndarray) -> float:
    if values.size < 2:
        return math.nan
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


# ---------------------------------------------------------------------------
# theory verification


def _theory_replicate(cfg: ExperimentConfig, r: int) -> np.ndarray:
    """(len(rho_grid), 2) array of conditional (bias_sq, variance); NaN where singular."""
    rng = _replicate_rng(cfg, r)
    data = generate_synthetic(cfg.d, cfg.psi, cfg.snr, cfg.k, rng)
    bags = assign_bags(cfg.n, cfg.k, rng)
    out = np.full((len(cfg.rho_grid), 2), np.nan)
    for j, rho in enumerate(cfg.rho_grid):
        try:
            cr = conditional_bias_variance(data.X, bags, rho, data.theta0, data.sigma)
        except SingularSystem:
            continue
        out[j] = cr.bias_sq, cr.variance
    return out


@dataclass(frozen=True)
class ExperimentRow:
    rho: float
    emp_bias: float
    emp_var: float
    se_bias: float
    se_var: float
    se_risk: float
    th_bias: float
    th_var: float
    status: str  # "ok", "singular" (simulation) or a theory status

    @property
    def emp_risk(self) -> float:
        return self.emp_bias + self.emp_var

    @property
    def th_risk(self) -> float:
        return self.th_bias + self.th_var


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    replicate_bias: np.ndarray = field(repr=False)  # (replicates, len(rho_grid))
    replicate_var: np.ndarray = field(repr=False)

    CSV_HEADER = (
        "rho", "emp_bias", "emp_var", "emp_risk", "se_bias", "se_var", "se_risk",
        "th_bias", "th_var", "th_risk",
    )

    @property
    def replicate_risk(self) -> np.ndarray:
        return self.replicate_bias + self.replicate_var

    def to_csv(self) -> str:
        return _csv.render(
            self.CSV_HEADER,
            (
                (r.rho, r.emp_bias, r.emp_var, r.emp_risk, r.se_bias, r.se_var, r.se_risk,
                 r.th_bias, r.th_var, r.th_risk)
                for r in self.rows
            ),
        )


def run_theory_verification(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Average exact conditional bias/variance over replicates and attach theory.

    No responses are sampled: given ``X`` and the bags, bias and variance are
    closed-form.  Theory is evaluated at the realized ``psi_hat = n / d``.
    """
    reps = np.stack(_map_replicates(_theory_replicate, cfg, workers))
    bias, var = reps[:, :, 0], reps[:, :, 1]
    rows = []
    for j, rho in enumerate(cfg.rho_grid):
        tp = theory_point(cfg.psi_hat, cfg.k, rho, cfg.snr)
        b, v = bias[:, j], var[:, j]
        status = "ok"
        if np.isnan(b).any():
            status = "singular"
            b = v = np.full_like(b, np.nan)
        elif not tp.ok:
            status = tp.status
        rows.append(
            ExperimentRow(
                rho=rho,
                emp_bias=float(np.mean(b)),
                emp_var=float(np.mean(v)),
                se_bias=_se(b),
                se_var=_se(v),
                se_risk=_se(b + v),
                th_bias=tp.bias,
                th_var=tp.variance,
                status=status,
            )
        )
    return ExperimentResult(cfg, rows, bias, var)


# ---------------------------------------------------------------------------
# private pipeline


def _dp_replicate(cfg: ExperimentConfig, r: int) -> np.ndarray:
    """Squared errors ``||theta_hat - theta0||^2`` per rho; NaN where singular."""
    rng = _replicate_rng(cfg, r)
    data = generate_synthetic(cfg.d, cfg.psi, cfg.snr, cfg.k, rng)
    bags = assign_bags(cfg.n, cfg.k, rng)
    agg = AggregateDataset(data.X, privatize(data.y, bags, cfg.dp, rng), bags)
    out = np.full(len(cfg.rho_grid), np.nan)
    for j, rho in enumerate(cfg.rho_grid):
        try:
            err = fit_interpolating(agg, rho).theta_hat - data.theta0
        except SingularSystem:
            continue
        out[j] = err @ err
    return out


@dataclass(frozen=True)
class DpExperimentRow:
    rho: float
    emp_risk: float  # mean ||theta_hat - theta0||^2 / log n
    se_risk: float
    th_risk: float  # limit of Risk / log n
    status: str


@dataclass(frozen=True)
class DpExperimentResult:
    config: ExperimentConfig
    rows: list
    replicate_sq_error: np.ndarray = field(repr=False)  # un-normalized, (replicates, len(rho_grid))

    CSV_HEADER = ("rho", "emp_risk_per_log_n", "se_risk_per_log_n", "th_risk_per_log_n", "log_n")

    def to_csv(self) -> str:
        log_n = self.config.dp.log_n
        return _csv.render(
            self.CSV_HEADER, ((r.rho, r.emp_risk, r.se_risk, r.th_risk, log_n) for r in self.rows)
        )


def run_dp_experiment(cfg: ExperimentConfig, workers: int | None = None) -> DpExperimentResult:
    """Full pipeline: generate, clip, aggregate, add noise, fit; risk normalized by ``log n``."""
    if cfg.dp is None:
        raise DomainError("run_dp_experiment needs cfg.dp")
    sigma_sq = 0.0 if math.isinf(cfg.snr) else 1.0 / cfg.snr
    if not cfg.dp.clip_constant**2 > 2.0 * (1.0 + sigma_sq):
        raise DomainError(f"need C^2 > 2(1 + sigma^2) = {2 * (1 + sigma_sq):.6g}")
    errs = np.stack(_map_replicates(_dp_replicate, cfg, workers))
    log_n = cfg.dp.log_n
    rows = []
    for j, rho in enumerate(cfg.rho_grid):
        e = errs[:, j] / log_n
        status = "singular" if np.isnan(e).any() else "ok"
        try:
            th = dp_risk_theory(cfg.psi_hat, cfg.k, rho, cfg.dp)
        except DivergentVariance:
            th, status = math.nan, "divergent_variance"
        rows.append(DpExperimentRow(rho, float(np.mean(e)), _se(e), th, status))
    return DpExperimentResult(cfg, rows, errs)

