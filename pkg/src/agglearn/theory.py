"""Proportional-regime risk of the interpolating estimator.

Setting: ``n/d -> psi > 1``, isotropic Gaussian features, bags of fixed size
``k``, ``||theta0|| -> 1`` and ``sigma^2 = 1/SNR``.

Bias.  ``alpha*`` is the root in (0, 1) of::

    rho + psi / (k (1 - alpha)) - 1 = psi rho (k - 1) / (k alpha)

and ``bias = alpha*^2 + eta*^2`` with::

    eta*^2 = alpha*^2 / ( (k-1) psi / (k^2 (1-alpha*)^2)
                          - (alpha*/(1-alpha*))^2 / k - (k-1)/k )

Variance.  ``u*`` solves ``psi/(1+u) + rho psi (k-1)/(rho+u) = k`` and ``v*``
then follows from ``psi (1+v)/(1+u)^2 + rho^2 psi (k-1)/(rho+u)^2 = k``;
the variance is ``sigma^2 / v*``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateDenominator, DivergentVariance, DomainError

BISECT_XTOL = 1e-14


class Dominance(enum.Enum):
    """Returned by :func:`snr_threshold` when bag- and instance-level risks coincide."""

    EQUAL = "equal"


EQUAL = Dominance.EQUAL


def bisect(f: Callable[[float], float], lo: float, hi: float, rtol: float = BISECT_XTOL) -> float:
    """Root of a function that changes sign on ``[lo, hi]``.

    Stops when the bracket is narrower than ``rtol * |mid|`` or when the
    midpoint is no longer representable strictly inside the bracket.
    """
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise ValueError(f"no sign change on [{lo}, {hi}]: f={f_lo}, {f_hi}")
    while True:
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * abs(mid) or not lo < mid < hi:
            return mid
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid


def _check_inputs(psi: float, k: int, rho: float) -> None:
    if not psi > 1:
        raise DomainError(f"psi must exceed 1, got {psi}")
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [0, 1], got {rho}")


# ---------------------------------------------------------------------------
# bias


def bias_residual(alpha: float, psi: float, k: int, rho: float) -> float:
    """``LHS - RHS`` of the bias fixed-point equation; increasing in alpha."""
    return rho + psi / (k * (1.0 - alpha)) - 1.0 - psi * rho * (k - 1) / (k * alpha)


def bias_denominator(alpha: float, psi: float, k: int) -> float:
    ratio = alpha / (1.0 - alpha)
    return (k - 1) * psi / (k**2 * (1.0 - alpha) ** 2) - ratio**2 / k - (k - 1) / k


@dataclass(frozen=True)
class BiasSolution:
    alpha_star: float
    eta_sq: float

    @property
    def bias(self) -> float:
        return self.alpha_star**2 + self.eta_sq


def solve_bias(psi: float, k: int, rho: float) -> BiasSolution:
    """Asymptotic squared bias of the interpolating estimator (for ``||theta0|| = 1``).

    ``k = 1`` and ``rho = 0`` return exactly zero: the estimator is unbiased.

    Raises
    ------
    DegenerateDenominator
        If the eta-term denominator is not positive at the root.
    """
    _check_inputs(psi, k, rho)
    if k == 1 or rho == 0:
        return BiasSolution(0.0, 0.0)
    # LHS -> +inf at alpha -> 1, RHS -> +inf at alpha -> 0: residual goes from -inf to +inf.
    # the root scales like rho, so start the bracket at the smallest subnormal
    lo = float(np.nextafter(0.0, 1.0))
    with np.errstate(over="ignore"):  # the residual is +-inf near the endpoints, as intended
        alpha = bisect(lambda a: bias_residual(a, psi, k, rho), lo, 1.0 - np.finfo(float).epsneg)
    den = bias_denominator(alpha, psi, k)
    if not den > 0:
        raise DegenerateDenominator(
            f"bias denominator {den:.6g} <= 0 at alpha*={alpha:.6g} (psi={psi}, k={k}, rho={rho})"
        )
    return BiasSolution(alpha, alpha**2 / den)


# ---------------------------------------------------------------------------
# variance


def variance_residuals(u: float, v: float, psi: float, k: int, rho: float) -> tuple[float, float]:
    """Residuals of the two variance fixed-point equations at ``(u, v)``."""
    # w = rho / (rho + u) lies in [0, 1]; forming it first avoids underflow for tiny rho
    w = rho / (rho + u) if rho > 0 else 0.0
    first = psi / (1.0 + u) + w * psi * (k - 1) - k
    second = psi * (1.0 + v) / (1.0 + u) ** 2 + w**2 * psi * (k - 1) - k
    return first, second


@dataclass(frozen=True)
class VarianceSolution:
    u_star: float
    v_star: float
    sigma_sq: float

    @property
    def variance(self) -> float:
        return self.sigma_sq / self.v_star


def solve_u(psi: float, k: int, rho: float) -> float:
    """Root of ``psi/(1+u) + rho psi (k-1)/(rho+u) = k``.

    For ``rho > 0`` the left side falls from ``psi k > k`` at ``u = 0`` to 0,
    so the root is positive.  For ``rho = 0`` only the first term remains and
    the root ``psi/k - 1`` may be negative; it is bracketed on ``(-1, inf)``.
    """
    _check_inputs(psi, k, rho)
    f = lambda u: variance_residuals(u, 0.0, psi, k, rho)[0]
    lo = 0.0 if rho > 0 else -1.0 + 1e-12
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
    return bisect(f, lo, hi)


def solve_variance(psi: float, k: int, rho: float, sigma_sq: float = 1.0) -> VarianceSolution:
    """Limiting variance ``sigma^2 / v*``.

    Raises
    ------
    DivergentVariance
        If ``v* <= 0``; this happens at ``rho = 0`` whenever ``psi <= k``.
    """
    if sigma_sq < 0:
        raise DomainError(f"sigma_sq must be nonnegative, got {sigma_sq}")
    u = solve_u(psi, k, rho)
    w = rho / (rho + u) if rho > 0 else 0.0
    extra = w**2 * psi * (k - 1)
    v = (1.0 + u) ** 2 * (k - extra) / psi - 1.0
    if not v > 0:
        raise DivergentVariance(f"v*={v:.6g} <= 0 (psi={psi}, k={k}, rho={rho})")
    return VarianceSolution(u, v, float(sigma_sq))


# ---------------------------------------------------------------------------
# closed forms at the endpoints


def bag_level_limits(psi: float, k: int, sigma_sq: float = 1.0) -> tuple[float, float]:
    """(bias, variance) of the bag-level estimator; needs ``psi > k``."""
    if not psi > k:
        raise DivergentVariance(f"bag-level variance diverges for psi={psi} <= k={k}")
    return 0.0, sigma_sq / (psi / k - 1.0)


def instance_level_limits(psi: float, k: int, sigma_sq: float = 1.0) -> tuple[float, float]:
    """(bias, variance) of the instance-level estimator."""
    bias = (1.0 - 1.0 / k) * (1.0 + (2.0 - psi) / (k * (psi - 1.0)))
    return bias, sigma_sq / (k * (psi - 1.0))


def snr_threshold(psi, k):
    """SNR below which the instance-level estimator has the smaller risk.

    Valid for ``psi >= k > 1``; returns ``inf`` at ``psi == k`` and
    :data:`EQUAL` for ``k == 1``.  Works with :class:`fractions.Fraction`
    inputs for exact evaluation.
    """
    if k == 1:
        return EQUAL
    if k < 1 or psi < k:
        raise DomainError(f"threshold needs psi >= k > 1, got psi={psi}, k={k}")
    den = (psi - k) * (psi * (k - 1) - k + 2)
    if den == 0:
        return math.inf
    return k * ((k + 1) * psi - k) / den


# ---------------------------------------------------------------------------
# risk curves


@dataclass(frozen=True)
class TheoryPoint:
    psi: float
    k: int
    rho: float
    snr: float
    alpha_star: float = math.nan
    eta_sq: float = math.nan
    u_star: float = math.nan
    v_star: float = math.nan
    bias: float = math.nan
    variance: float = math.nan
    status: str = "ok"

    @property
    def sigma_sq(self) -> float:
        return 1.0 / self.snr

    @property
    def risk(self) -> float:
        return self.bias + self.variance

    @property
    def ok(self) -> bool:
        return self.status == "ok"


_STATUS = {DegenerateDenominator: "degenerate_denominator", DivergentVariance: "divergent_variance"}


def theory_point(psi: float, k: int, rho: float, snr: float) -> TheoryPoint:
    """Solve both fixed points; solver failures are recorded in ``status``."""
    if not snr > 0:
        raise DomainError(f"snr must be positive, got {snr}")
    _check_inputs(psi, k, rho)
    base = dict(psi=float(psi), k=int(k), rho=float(rho), snr=float(snr))
    fields = {}
    try:
        b = solve_bias(psi, k, rho)
        fields.update(alpha_star=b.alpha_star, eta_sq=b.eta_sq, bias=b.bias)
        v = solve_variance(psi, k, rho, 1.0 / snr)
        fields.update(u_star=v.u_star, v_star=v.v_star, variance=v.variance)
    except (DegenerateDenominator, DivergentVariance) as exc:
        return TheoryPoint(**base, **fields, status=_STATUS[type(exc)])
    return TheoryPoint(**base, **fields)


def risk_curve(psi: float, k: int, snr: float, rho_grid: Sequence[float]) -> list[TheoryPoint]:
    return [theory_point(psi, k, rho, snr) for rho in rho_grid]


def fixed_point_residuals(point: TheoryPoint) -> tuple[float, float, float]:
    """(bias, variance-1, variance-2) residuals at a solved point; bias is 0 when short-circuited."""
    if point.k == 1 or point.rho == 0:
        r_bias = 0.0
    else:
        r_bias = bias_residual(point.alpha_star, point.psi, point.k, point.rho)
    r1, r2 = variance_residuals(point.u_star, point.v_star, point.psi, point.k, point.rho)
    return r_bias, r1, r2


def _risk_or_inf(psi, k, rho, snr) -> float:
    p = theory_point(psi, k, rho, snr)
    return p.risk if p.ok else math.inf


@dataclass(frozen=True)
class OptimalRho:
    rho_star: float
    risk_star: float
    grid: np.ndarray = field(repr=False)
    grid_risk: np.ndarray = field(repr=False)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f: Callable[[float], float], lo: float, hi: float, xtol: float) -> float:
    """Minimizer of a unimodal function on ``[lo, hi]``."""
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > xtol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def optimal_rho(psi: float, k: int, snr: float, grid_size: int = 101, xtol: float = 1e-7) -> OptimalRho:
    """Risk-minimizing ``rho`` on [0, 1].

    A ``grid_size``-point scan locates the best cell; golden-section search then
    refines inside the two neighbouring cells.  Ties go to the smaller ``rho``,
    so ``k = 1`` (risk flat in rho) returns ``rho* = 0``.
    """
    grid = np.linspace(0.0, 1.0, grid_size)
    risks = np.array([_risk_or_inf(psi, k, r, snr) for r in grid])
    if not np.isfinite(risks).any():
        raise DivergentVariance(f"risk is infinite on the whole rho grid (psi={psi}, k={k})")
    if k == 1:
        # the estimator does not depend on rho; report the tie-break value exactly
        return OptimalRho(0.0, float(risks[0]), grid, risks)
    i = int(np.argmin(risks))
    best_rho, best = float(grid[i]), float(risks[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
    cand = golden_section(lambda r: _risk_or_inf(psi, k, r, snr), lo, hi, xtol)
    cand_risk = _risk_or_inf(psi, k, cand, snr)
    if cand_risk < best:
        best_rho, best = cand, cand_risk
    return OptimalRho(best_rho, best, grid, risks)


__all__ = [
    "BiasSolution",
    "Dominance",
    "EQUAL",
    "OptimalRho",
    "TheoryPoint",
    "VarianceSolution",
    "bag_level_limits",
    "bias_denominator",
    "bias_residual",
    "bisect",
    "fixed_point_residuals",
    "golden_section",
    "instance_level_limits",
    "optimal_rho",
    "risk_curve",
    "snr_threshold",
    "solve_bias",
    "solve_u",
    "solve_variance",
    "theory_point",
    "variance_residuals",
]
