"""Closed-form interpolating estimator for linear regression on aggregate responses.

The interpolating loss with a linear model,

    L_int(theta) = (1/m) sum_a (ybar_a - xbar_a^T theta)^2
                   + rho (1/n) ||(I - S^T S) X theta||^2,

has gradient ``(2/n) (G theta - b)`` with

    G = rho X^T X + (1 - rho) k Xbar^T Xbar,    b = k Xbar^T ybar,

where ``Xbar`` holds the bag-mean feature vectors.  This uses
``X^T S^T S X = k Xbar^T Xbar`` so no n x n matrix is ever formed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .bagging import AggregateDataset, BagAssignment, _check_rho, apply_StS, bag_means
from .errors import DomainError, LengthMismatch, SingularSystem

PIVOT_RTOL = 1e-10


@dataclass(frozen=True)
class LinearFit:
    theta_hat: np.ndarray
    rho: float
    gram_condition_estimate: float

    def to_json(self) -> str:
        return json.dumps({"rho": self.rho, "theta": self.theta_hat.tolist()})


@dataclass(frozen=True)
class ConditionalRisk:
    """Bias-variance split of ``E[||theta_hat - theta0||^2 | X]``."""

    bias_sq: float
    variance: float

    @property
    def risk(self) -> float:
        return self.bias_sq + self.variance


@dataclass(frozen=True)
class _Gram:
    cho: tuple
    xtx: np.ndarray
    bag_gram: np.ndarray  # k Xbar^T Xbar = X^T S^T S X
    xbar: np.ndarray
    condition: float

    def solve(self, rhs):
        return linalg.cho_solve(self.cho, rhs, check_finite=False)


def _factor_gram(X, assignment: BagAssignment, rho: float) -> _Gram:
    rho = _check_rho(rho)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != assignment.n:
        raise LengthMismatch(f"X must have {assignment.n} rows, got shape {X.shape}")
    xbar = bag_means(X, assignment)
    xtx = X.T @ X
    bag_gram = assignment.k * (xbar.T @ xbar)
    G = rho * xtx + (1.0 - rho) * bag_gram

    scale = np.max(np.diag(G)) if G.size else 0.0
    if not scale > 0:
        raise SingularSystem("Gram matrix has no positive diagonal entry")
    try:
        cho = linalg.cho_factor(G, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularSystem(f"Gram matrix is not positive definite (rho={rho})") from exc
    pivots = np.diag(cho[0]) ** 2
    if pivots.min() < PIVOT_RTOL * scale:
        raise SingularSystem(
            f"Gram pivot {pivots.min():.3g} below {PIVOT_RTOL:g} x max diagonal {scale:.3g}"
        )
    return _Gram(cho, xtx, bag_gram, xbar, float(pivots.max() / pivots.min()))


def fit_interpolating(agg: AggregateDataset, rho: float) -> LinearFit:
    """Minimize the interpolating loss; ``rho = 0`` is bag-level, ``rho = 1`` instance-level.

    Raises
    ------
    SingularSystem
        If the Gram matrix is numerically singular, e.g. ``rho = 0`` with
        fewer bags than features.
    """
    gram = _factor_gram(agg.features, agg.assignment, rho)
    rhs = agg.assignment.k * (gram.xbar.T @ agg.bag_means)
    theta = gram.solve(rhs)
    if not np.all(np.isfinite(theta)):
        raise SingularSystem("solution is not finite")
    return LinearFit(theta, float(rho), gram.condition)


def fit_bag_level(agg: AggregateDataset) -> LinearFit:
    d = agg.features.shape[1]
    if agg.assignment.m < d:
        raise SingularSystem(
            f"bag-level least squares needs at least d={d} bags, got m={agg.assignment.m}"
        )
    return fit_interpolating(agg, 0.0)


def fit_instance_level(agg: AggregateDataset) -> LinearFit:
    return fit_interpolating(agg, 1.0)


def normal_equations(agg: AggregateDataset, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Assembled ``(G, b)`` such that the estimator solves ``G theta = b``."""
    rho = _check_rho(rho)
    X = agg.features
    xbar = bag_means(X, agg.assignment)
    k = agg.assignment.k
    G = rho * (X.T @ X) + (1.0 - rho) * k * (xbar.T @ xbar)
    return G, k * (xbar.T @ agg.bag_means)


def interpolating_objective(theta, agg: AggregateDataset, rho: float) -> float:
    """``L_int`` of the linear predictor ``X theta`` (squared loss)."""
    f = agg.features @ np.asarray(theta, dtype=float)
    r_bag = agg.bag_means - bag_means(f, agg.assignment)
    within = f - apply_StS(f, agg.assignment)
    return float(np.mean(r_bag**2) + rho * np.mean(within**2))


def interpolating_gradient(theta, agg: AggregateDataset, rho: float) -> np.ndarray:
    G, b = normal_equations(agg, rho)
    return (2.0 / agg.assignment.n) * (G @ np.asarray(theta, dtype=float) - b)


def conditional_bias_variance(
    X, assignment: BagAssignment, rho: float, theta0, sigma: float
) -> ConditionalRisk:
    """Exact bias and variance of the interpolating estimator given ``X``.

    With ``M = (X^T E X)^{-1} X^T`` and ``Lambda = rho (I - S^T S)``::

        bias_sq  = ||M Lambda X theta0||^2
        variance = sigma^2 ||M S^T S||_F^2
                 = sigma^2 tr(G^{-1} (X^T S^T S X) G^{-1})
    """
    if sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    theta0 = np.asarray(theta0, dtype=float)
    gram = _factor_gram(X, assignment, rho)
    if theta0.shape != (gram.xtx.shape[0],):
        raise LengthMismatch(f"theta0 must have length {gram.xtx.shape[0]}")

    # X^T Lambda X = rho (X^T X - X^T S^T S X), which vanishes identically for
    # k = 1 or rho = 0; skip it there so rounding cannot leave a spurious bias
    bias_sq = 0.0
    if assignment.k > 1 and rho > 0:
        bias_vec = gram.solve(rho * ((gram.xtx - gram.bag_gram) @ theta0))
        bias_sq = float(bias_vec @ bias_vec)
    W = gram.solve(gram.bag_gram)
    variance = sigma**2 * float(np.trace(gram.solve(W.T)))
    return ConditionalRisk(bias_sq, max(variance, 0.0))


def hat_matrix(X, assignment: BagAssignment, rho: float) -> np.ndarray:
    """Dense ``B`` with ``theta_hat = B y``; O(n d) memory, meant for small checks."""
    gram = _factor_gram(X, assignment, rho)
    return gram.solve(apply_StS(np.asarray(X, dtype=float), assignment).T)


def expand_bag_means(bag_means_vec, assignment: BagAssignment) -> np.ndarray:
    """A length-n response vector whose bag means equal ``bag_means_vec``."""
    ybar = np.asarray(bag_means_vec, dtype=float)
    if ybar.shape != (assignment.m,):
        raise LengthMismatch(f"expected {assignment.m} bag means, got shape {ybar.shape}")
    return ybar[assignment.bag_of]

