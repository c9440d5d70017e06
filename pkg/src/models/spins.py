"""Spin configurations, overlaps and the SK covariance on the hypercube."""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable, Dict

import numpy as np

from utils.errors import CapacityError, DomainError, ShapeError

logger = logging.getLogger(__name__)

MAX_ENUMERATION_SITES = 24
MAX_OVERLAP_SITES = 64
MAX_PAIR_SITES = 8


@dataclass(frozen=True)
class SpinConfiguration:
    """A point of {-1, +1}^n."""

    spins: tuple

    def __post_init__(self):
        spins = tuple(int(s) for s in self.spins)
        if any(s not in (-1, 1) for s in spins):
            raise DomainError(f"spins must be -1 or +1, got {self.spins}")
        object.__setattr__(self, 'spins', spins)

    @classmethod
    def from_index(cls, index: int, n: int) -> 'SpinConfiguration':
        """Bit i of ``index`` set means spin i is -1."""
        return cls(tuple(1 - 2 * ((index >> i) & 1) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.spins)

    def overlap(self, other: 'SpinConfiguration') -> int:
        """Unnormalized overlap sum_i sigma_i sigma'_i."""
        if self.n != other.n:
            raise ShapeError(f"configurations of length {self.n} and {other.n}")
        return sum(a * b for a, b in zip(self.spins, other.spins))


def check_capacity(n: int, limit: int = MAX_ENUMERATION_SITES) -> None:
    if n < 1:
        raise DomainError(f"need at least one site, got n={n}")
    if n > limit:
        raise CapacityError(f"exact enumeration of 2^{n} configurations exceeds the limit n <= {limit}")


def all_configurations(n: int) -> np.ndarray:
    """Every configuration as rows of a (2^n, n) array of ±1, row c matching from_index(c)."""
    check_capacity(n)
    idx = np.arange(2 ** n, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(float)


def sk_covariance(sigma1, sigma2) -> float:
    """
    M_{sigma sigma'} = ((1/sqrt(n)) sum_i sigma_i sigma'_i)^2.

    Raises:
        ShapeError: If the configurations have different lengths
    """
    a = np.asarray(getattr(sigma1, 'spins', sigma1), dtype=float)
    b = np.asarray(getattr(sigma2, 'spins', sigma2), dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"configurations of shape {a.shape} and {b.shape}")
    return float(np.dot(a, b) ** 2 / a.shape[0])


def sk_factor(n: int) -> np.ndarray:
    """
    F with F F^T = M on the configuration space.

    Row sigma holds -sigma_i sigma_j / sqrt(n) over the n^2 ordered pairs (i, j),
    which is the coefficient of X_ij in the SK Hamiltonian.
    """
    S = all_configurations(n)
    return -(S[:, :, None] * S[:, None, :]).reshape(S.shape[0], n * n) / np.sqrt(n)


def sk_covariance_matrix(n: int) -> np.ndarray:
    S = all_configurations(n)
    return (S @ S.T) ** 2 / n


@dataclass(frozen=True)
class OverlapDistribution:
    """Law of S = sum_i sigma_i sigma'_i for independent uniform sigma, sigma'.

    P(S) = binom(n, (n+S)/2) / 2^n, kept as exact fractions.
    """

    n_sites: int
    weights: Dict[int, Fraction]

    @classmethod
    def exact(cls, n: int) -> 'OverlapDistribution':
        if n < 1:
            raise DomainError(f"need at least one site, got n={n}")
        if n > MAX_OVERLAP_SITES:
            raise CapacityError(f"overlap enumeration is exact up to n={MAX_OVERLAP_SITES}, got {n}")
        return _overlap_distribution(n)

    @property
    def values(self) -> np.ndarray:
        return np.array(sorted(self.weights), dtype=float)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([float(self.weights[s]) for s in sorted(self.weights)])

    def total(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))

    def expectation(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """E[fn(S)] with fn vectorized over the overlap values."""
        return float(np.dot(self.probabilities, fn(self.values)))

    def covariance_expectation(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """E[fn(M)] with M = S^2 / n."""
        return self.expectation(lambda s: fn(s * s / self.n_sites))


@lru_cache(maxsize=128)
def _overlap_distribution(n: int) -> OverlapDistribution:
    denom = 2 ** n
    weights = {2 * k - n: Fraction(comb(n, k), denom) for k in range(n + 1)}
    return OverlapDistribution(n, weights)


def brute_force_pair_expectation(n: int, fn: Callable[[np.ndarray], np.ndarray]) -> float:
    """E[fn(M_{sigma sigma'})] over all 4^n pairs, for checking the overlap reduction."""
    check_capacity(n, MAX_PAIR_SITES)
    M = sk_covariance_matrix(n)
    return float(np.mean(fn(M)))
