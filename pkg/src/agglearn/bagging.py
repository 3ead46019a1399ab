"""Non-overlapping equal-size bags and the linear operators they induce.

With ``S`` the m x n matrix ``S[a, i] = 1/sqrt(k) * [i in bag a]``, the
projection ``S^T S`` replaces every entry by the mean of its bag.  None of the
operators here materialize ``S``; each is a single O(n) pass through the
``bags`` index table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisibilityError, DomainError, LengthMismatch


@dataclass(frozen=True)
class BagAssignment:
    """Partition of ``range(n)`` into ``m = n // k`` bags of exactly ``k`` indices.

    Attributes
    ----------
    n, k : int
        Sample count and bag size.
    bags : ndarray of shape (m, k)
        Row ``a`` holds the (0-based, sorted) sample indices of bag ``a``.
    bag_of : ndarray of shape (n,)
        Inverse map, ``bag_of[i]`` is the bag containing sample ``i``.
    """

    n: int
    k: int
    bags: np.ndarray
    bag_of: np.ndarray = field(repr=False)

    @classmethod
    def from_bags(cls, bags) -> BagAssignment:
        """Validate an explicit list of bags and build the inverse map."""
        arr = np.asarray(bags, dtype=np.intp)
        if arr.ndim != 2 or arr.size == 0:
            raise DomainError("bags must be a non-empty list of equal-size index lists")
        m, k = arr.shape
        n = m * k
        bag_of = np.full(n, -1, dtype=np.intp)
        flat = arr.ravel()
        if flat.min() < 0 or flat.max() >= n:
            raise DomainError(f"bag indices must lie in [0, {n})")
        bag_of[flat] = np.repeat(np.arange(m), k)
        if np.any(bag_of < 0) or np.unique(flat).size != n:
            raise DomainError("bags must partition range(n) with no repeated index")
        arr = np.sort(arr, axis=1)
        arr.setflags(write=False)
        bag_of.setflags(write=False)
        return cls(n=n, k=k, bags=arr, bag_of=bag_of)

    @property
    def m(self) -> int:
        return self.n // self.k

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "k": self.k, "bags": self.bags.tolist()})

    @classmethod
    def from_json(cls, text: str) -> BagAssignment:
        obj = json.loads(text)
        out = cls.from_bags(obj["bags"])
        if out.n != obj["n"] or out.k != obj["k"]:
            raise DomainError("n and k fields disagree with the bags list")
        return out


@dataclass(frozen=True)
class AggregateDataset:
    """Individual feature vectors together with per-bag mean responses."""

    features: np.ndarray
    bag_means: np.ndarray
    assignment: BagAssignment

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        ybar = np.asarray(self.bag_means, dtype=float)
        if X.ndim != 2 or X.shape[0] != self.assignment.n:
            raise LengthMismatch(
                f"features must have {self.assignment.n} rows, got shape {X.shape}"
            )
        if ybar.shape != (self.assignment.m,):
            raise LengthMismatch(
                f"bag_means must have length {self.assignment.m}, got {ybar.shape}"
            )
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "bag_means", ybar)

    @classmethod
    def from_responses(cls, X, y, assignment: BagAssignment) -> AggregateDataset:
        return cls(X, aggregate_responses(y, assignment), assignment)


def assign_bags(n: int, k: int, seed=None) -> BagAssignment:
    """Uniformly random partition of ``range(n)`` into bags of size ``k``.

    A seeded permutation is cut into consecutive blocks of ``k``.  ``seed`` may
    be anything accepted by :func:`numpy.random.default_rng`, including a
    ``Generator``.
    """
    if int(n) != n or int(k) != k or n < 1 or k < 1:
        raise DomainError(f"n and k must be positive integers, got n={n}, k={k}")
    n, k = int(n), int(k)
    if n % k:
        raise DivisibilityError(f"bag size {k} does not divide n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return BagAssignment.from_bags(perm.reshape(n // k, k))


def _check_length(v: np.ndarray, assignment: BagAssignment) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[0] != assignment.n:
        raise LengthMismatch(
            f"expected leading dimension {assignment.n}, got shape {v.shape}"
        )
    return v


def bag_means(v, assignment: BagAssignment) -> np.ndarray:
    """Per-bag mean along the first axis; works for vectors and n x d matrices."""
    v = _check_length(v, assignment)
    return v[assignment.bags].mean(axis=1)


def aggregate_responses(y, assignment: BagAssignment) -> np.ndarray:
    """Length-m vector of bag-averaged responses."""
    y = _check_length(y, assignment)
    if y.ndim != 1:
        raise LengthMismatch("responses must be a vector")
    return bag_means(y, assignment)


def apply_StS(v, assignment: BagAssignment) -> np.ndarray:
    """Replace each entry (or row) by the mean over its bag."""
    return bag_means(v, assignment)[assignment.bag_of]


def _check_rho(rho: float) -> float:
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [0, 1], got {rho}")
    return float(rho)


def apply_E(v, assignment: BagAssignment, rho: float) -> np.ndarray:
    """``(rho I + (1 - rho) S^T S) v``."""
    rho = _check_rho(rho)
    v = _check_length(v, assignment)
    return rho * v + (1.0 - rho) * apply_StS(v, assignment)


def apply_Lambda(v, assignment: BagAssignment, rho: float) -> np.ndarray:
    """``rho (I - S^T S) v``; annihilates bag-constant vectors."""
    rho = _check_rho(rho)
    v = _check_length(v, assignment)
    return rho * (v - apply_StS(v, assignment))
