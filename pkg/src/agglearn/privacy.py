"""Label-differentially-private release of bag-mean responses.

Mechanism: clip every response to ``[-B, B]`` with ``B = C sqrt(log n)``
(natural log), average within bags, then add independent Laplace noise of
scale ``b = sensitivity / epsilon`` to each bag mean.  With the default
sensitivity ``B / k`` this is ``b = C sqrt(log n) / (k epsilon)``.

Laplace noise is parameterized by its scale: density ``exp(-|z|/b) / (2b)``,
variance ``2 b^2``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bagging import BagAssignment, aggregate_responses
from .errors import ConfigMismatch, DivergentVariance, DomainError, LengthMismatch
from .theory import solve_variance


class SensitivityConvention(enum.Enum):
    """How far one changed label can move its bag mean.

    ``B_OVER_K`` (serialized as ``"paper"``) uses ``B / k`` and is the
    default.  ``WORST_CASE`` uses ``2B / k``, the diameter of ``[-B, B]``
    divided by ``k``.
    """

    B_OVER_K = "paper"
    WORST_CASE = "worst_case"

    @property
    def factor(self) -> float:
        return 1.0 if self is SensitivityConvention.B_OVER_K else 2.0


@dataclass(frozen=True)
class DpConfig:
    epsilon: float
    clip_constant: float
    k: int
    n: int
    sensitivity_convention: SensitivityConvention = SensitivityConvention.B_OVER_K

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if not self.clip_constant > 0:
            raise DomainError(f"clip constant must be positive, got {self.clip_constant}")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k}")
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(
            self, "sensitivity_convention", SensitivityConvention(self.sensitivity_convention)
        )

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def clip_level(self) -> float:
        """``B = C sqrt(log n)``."""
        return self.clip_constant * math.sqrt(self.log_n)

    @property
    def noise_scale(self) -> float:
        return sensitivity(self) / self.epsilon

    def to_json(self) -> str:
        return json.dumps(
            {
                "epsilon": self.epsilon,
                "C": self.clip_constant,
                "k": self.k,
                "n": self.n,
                "sensitivity": self.sensitivity_convention.value,
            }
        )

    @classmethod
    def from_dict(cls, obj: dict) -> DpConfig:
        unknown = set(obj) - {"epsilon", "C", "k", "n", "sensitivity"}
        if unknown:
            raise DomainError(f"unknown DP config fields: {sorted(unknown)}")
        return cls(
            epsilon=float(obj["epsilon"]),
            clip_constant=float(obj["C"]),
            k=int(obj["k"]),
            n=int(obj["n"]),
            sensitivity_convention=SensitivityConvention(obj.get("sensitivity", "paper")),
        )

    @classmethod
    def from_json(cls, text: str) -> DpConfig:
        return cls.from_dict(json.loads(text))


def sensitivity(cfg: DpConfig) -> float:
    """L1 sensitivity of the clipped bag-mean map under ``cfg``'s convention."""
    return cfg.sensitivity_convention.factor * cfg.clip_level / cfg.k


def clip_responses(y, bound: float) -> np.ndarray:
    return np.clip(np.asarray(y, dtype=float), -bound, bound)


def laplace_noise(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    """Laplace(0, scale) draws by inverse-CDF from uniform variates on (0, 1)."""
    # (j + 1/2) / 2^53 never hits 0 or 1
    p = (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) / 2.0**53
    return np.where(p < 0.5, scale * np.log(2.0 * p), -scale * np.log(2.0 * (1.0 - p)))


def privatize(y, assignment: BagAssignment, cfg: DpConfig, seed=None) -> np.ndarray:
    """Clip, aggregate and perturb; returns the noisy bag means.

    The noise for bag ``a`` is the ``a``-th variate of the stream seeded by
    ``seed``, so the output depends only on bag indices, never on traversal
    order.
    """
    if cfg.k != assignment.k:
        raise ConfigMismatch(f"DpConfig.k={cfg.k} but bags have size {assignment.k}")
    if cfg.n != assignment.n:
        raise ConfigMismatch(f"DpConfig.n={cfg.n} but assignment covers n={assignment.n}")
    y = np.asarray(y, dtype=float)
    if y.shape != (assignment.n,):
        raise LengthMismatch(f"y must have shape ({assignment.n},), got {y.shape}")
    clipped_means = aggregate_responses(clip_responses(y, cfg.clip_level), assignment)
    rng = np.random.default_rng(seed)
    return clipped_means + laplace_noise(cfg.noise_scale, assignment.m, rng)


def dp_risk_theory(psi: float, k: int, rho: float, cfg: DpConfig, sigma_sq: float | None = None) -> float:
    """Limit of ``Risk / log n`` for the interpolating estimator on private bag means.

    Under the default convention this is ``2 C^2 / (k epsilon^2 v*)``; the
    worst-case convention doubles the noise scale and multiplies it by 4.
    ``k`` overrides ``cfg.k`` so the same config can be swept over bag sizes.
    If ``sigma_sq`` is given, the clipping condition ``C^2 > 2 (1 + sigma^2)``
    is enforced.
    """
    if sigma_sq is not None and not cfg.clip_constant**2 > 2.0 * (1.0 + sigma_sq):
        raise DomainError(
            f"need C^2 > 2(1 + sigma^2); got C^2={cfg.clip_constant**2:.6g}, sigma^2={sigma_sq:.6g}"
        )
    v_star = solve_variance(psi, k, rho).v_star
    factor = cfg.sensitivity_convention.factor
    return 2.0 * factor**2 * cfg.clip_constant**2 / (k * cfg.epsilon**2 * v_star)


@dataclass(frozen=True)
class BagSizeChoice:
    k_star: int
    risk_star: float
    profile: list = field(repr=False)  # (k, risk or None) for k = 1..k_max


def optimal_bag_size(psi: float, rho: float, cfg: DpConfig, k_max: int) -> BagSizeChoice:
    """Bag size in ``1..k_max`` minimizing :func:`dp_risk_theory`.

    Sizes where the variance fixed point diverges appear in the profile with
    risk ``None`` and are skipped.  Ties go to the smaller ``k``.
    """
    if int(k_max) != k_max or k_max < 1:
        raise DomainError(f"k_max must be a positive integer, got {k_max}")
    profile = []
    for k in range(1, int(k_max) + 1):
        try:
            profile.append((k, dp_risk_theory(psi, k, rho, cfg)))
        except DivergentVariance:
            profile.append((k, None))
    valid = [(r, k) for k, r in profile if r is not None]
    if not valid:
        raise DivergentVariance(f"no bag size in 1..{k_max} has finite risk at psi={psi}, rho={rho}")
    risk_star, k_star = min(valid)
    return BagSizeChoice(k_star, risk_star, profile)
