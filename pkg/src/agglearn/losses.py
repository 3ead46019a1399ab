"""Bag-level, instance-level and interpolating losses for arbitrary predictions.

All losses take the per-instance prediction vector ``f = (f_theta(x_i))_i`` so
they apply to any model family.  Normalization is ``1/(mk) = 1/n`` throughout.

For the quadratic loss the instance-level loss splits exactly as::

    L_ins = L_bag + R,    R = (1/n) sum_a sum_{i in a} (f_i - fbar_a)^2

where ``R`` is the within-bag variance of the predictions.  The pairwise form
``(1/k) sum_a sum_{i,j in a} (f_i - f_j)^2`` over ordered pairs equals
``2 n R``; :func:`pairwise_regularizer` returns it for reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bagging import AggregateDataset, BagAssignment, bag_means
from .errors import DomainError, LengthMismatch, MissingBound


@dataclass(frozen=True)
class ScalarLoss:
    """A loss ``l(target, prediction) >= 0`` evaluated elementwise on arrays.

    Attributes
    ----------
    fn : callable
        Vectorized ``fn(target, prediction)``.
    convex : bool
        Whether ``fn`` is convex in the prediction.
    second_derivative_bound : float or None
        Bound ``C`` on ``|d^2 l / d prediction^2|``.
    quadratic : bool
        True only for ``(t - p)^2``; switches :func:`interpolating_loss` to the
        regularizer form.
    """

    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    convex: bool = False
    second_derivative_bound: float | None = None
    quadratic: bool = False

    def __call__(self, target, prediction):
        return self.fn(np.asarray(target, dtype=float), np.asarray(prediction, dtype=float))


def _logcosh(t, p):
    r = np.abs(p - t)
    # log(cosh r) = r + log1p(exp(-2r)) - log 2, stable for large r
    return r + np.log1p(np.exp(-2.0 * r)) - np.log(2.0)


def _pseudo_huber(t, p, delta=1.0):
    return delta**2 * (np.sqrt(1.0 + ((p - t) / delta) ** 2) - 1.0)


squared_loss = ScalarLoss(
    "squared", lambda t, p: (t - p) ** 2, convex=True, second_derivative_bound=2.0, quadratic=True
)
logcosh_loss = ScalarLoss("logcosh", _logcosh, convex=True, second_derivative_bound=1.0)
pseudo_huber_loss = ScalarLoss("pseudo_huber", _pseudo_huber, convex=True, second_derivative_bound=1.0)
# log(1 + r^2): bounded curvature (|l''| <= 2) but not convex
cauchy_loss = ScalarLoss(
    "cauchy", lambda t, p: np.log1p((p - t) ** 2), convex=False, second_derivative_bound=2.0
)


def _predictions(predictions, assignment: BagAssignment) -> np.ndarray:
    f = np.asarray(predictions, dtype=float)
    if f.shape != (assignment.n,):
        raise LengthMismatch(f"predictions must have shape ({assignment.n},), got {f.shape}")
    return f


def bag_loss(predictions, agg: AggregateDataset, loss: ScalarLoss = squared_loss) -> float:
    """Mean over bags of ``l(ybar_a, mean of predictions in bag a)``."""
    f = _predictions(predictions, agg.assignment)
    return float(np.mean(loss(agg.bag_means, bag_means(f, agg.assignment))))


def instance_loss(predictions, agg: AggregateDataset, loss: ScalarLoss = squared_loss) -> float:
    """Mean over instances of ``l(ybar_{bag(i)}, f_i)``.

    Summed bag by bag, so with ``k = 1`` it equals :func:`bag_loss` bit for bit.
    """
    f = _predictions(predictions, agg.assignment)
    per_bag = loss(agg.bag_means[:, None], f[agg.assignment.bags]).mean(axis=1)
    return float(np.mean(per_bag))


def regularizer(predictions, assignment: BagAssignment) -> float:
    """Within-bag variance of the predictions, normalized by ``1/n``.

    Deviations are taken after shifting each bag by its first member, so the
    result is exactly zero when every bag is constant.
    """
    f = _predictions(predictions, assignment)
    fb = f[assignment.bags]
    fb = fb - fb[:, :1]
    return float(np.mean((fb - fb.mean(axis=1, keepdims=True)) ** 2))


def pairwise_regularizer(predictions, assignment: BagAssignment) -> float:
    """``(1/k) sum_a sum_{i,j in a} (f_i - f_j)^2`` over ordered pairs.

    Equals ``2 * n * regularizer(predictions, assignment)``.
    """
    f = _predictions(predictions, assignment)
    fb = f[assignment.bags]
    diff = fb[:, :, None] - fb[:, None, :]
    return float(np.sum(diff**2) / assignment.k)


def interpolating_loss(
    predictions, agg: AggregateDataset, rho: float, loss: ScalarLoss = squared_loss
) -> float:
    """``L_bag + rho * R`` for the quadratic loss.

    For any other loss the convex combination ``(1 - rho) L_bag + rho L_ins``
    is returned; both coincide when the loss is quadratic.
    """
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [0, 1], got {rho}")
    if loss.quadratic:
        return bag_loss(predictions, agg, loss) + rho * regularizer(predictions, agg.assignment)
    return (1.0 - rho) * bag_loss(predictions, agg, loss) + rho * instance_loss(predictions, agg, loss)


@dataclass(frozen=True)
class LossBoundReport:
    """Both sides of the general-loss sandwich ``L_bag <= L_ins <= L_bag + (C/2) R``.

    ``upper_holds`` / ``lower_holds`` are None when the loss carries no bound /
    no convexity flag respectively.
    """

    instance: float
    bag: float
    regularizer: float
    upper_rhs: float | None
    upper_holds: bool | None
    lower_holds: bool | None

    @property
    def holds(self) -> bool:
        return all(v for v in (self.upper_holds, self.lower_holds) if v is not None)


def check_loss_bounds(
    predictions, agg: AggregateDataset, loss: ScalarLoss, rtol: float = 1e-12
) -> LossBoundReport:
    """Evaluate the curvature upper bound and the Jensen lower bound.

    A second-order Taylor expansion around the bag mean gives
    ``L_ins <= L_bag + (C/2) R`` with ``R`` from :func:`regularizer`.  In terms
    of the ordered-pair penalty ``P = pairwise_regularizer`` this reads
    ``L_ins <= L_bag + C P / (4 n)``, which implies the looser
    ``L_ins <= L_bag + C P``.  The bound is tight for the squared loss
    (``C = 2``), so comparisons carry a relative slack ``rtol``.
    """
    if loss.second_derivative_bound is None and not loss.convex:
        raise MissingBound(f"loss {loss.name!r} has neither a curvature bound nor a convexity flag")
    l_ins = instance_loss(predictions, agg, loss)
    l_bag = bag_loss(predictions, agg, loss)
    reg = regularizer(predictions, agg.assignment)
    slack = rtol * max(1.0, abs(l_ins))

    upper_rhs = upper = lower = None
    if loss.second_derivative_bound is not None:
        upper_rhs = l_bag + 0.5 * loss.second_derivative_bound * reg
        upper = l_ins <= upper_rhs + slack
    if loss.convex:
        lower = l_bag <= l_ins + slack
    return LossBoundReport(l_ins, l_bag, reg, upper_rhs, upper, lower)
