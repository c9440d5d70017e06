"""Centered Gaussian measures and reproducible sampling from them."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lapack

from gaussian.rng import RngStream
from utils.errors import FactorizationError, ShapeError

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-10
FACTOR_TOLERANCE = 1e-8


def factor_covariance(covariance: np.ndarray) -> np.ndarray:
    """
    Return F with F F^T = covariance.

    Cholesky is tried first; rank-deficient matrices fall back to LAPACK's
    pivoted Cholesky, which returns a rectangular factor of width rank(M).

    Raises:
        FactorizationError: If the matrix is not symmetric or not PSD within tolerance
    """
    M = np.asarray(covariance, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"covariance must be square, got shape {M.shape}")
    if not np.allclose(M, M.T, atol=PSD_TOLERANCE, rtol=0.0):
        raise FactorizationError("covariance is not symmetric")
    M = 0.5 * (M + M.T)

    scale = max(1.0, float(np.max(np.abs(np.diag(M))))) if M.size else 1.0
    min_eig = float(np.min(np.linalg.eigvalsh(M))) if M.size else 0.0
    if min_eig < -PSD_TOLERANCE * scale:
        raise FactorizationError(f"covariance is not positive semidefinite (smallest eigenvalue {min_eig:.3e})")

    try:
        factor = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        c, piv, rank, info = lapack.dpstrf(M, lower=1, tol=PSD_TOLERANCE * scale)
        if info < 0:
            raise FactorizationError(f"pivoted Cholesky failed (info={info})")
        L = np.tril(c)[:, :rank]
        factor = np.zeros((M.shape[0], rank))
        factor[piv - 1] = L
        logger.debug(f"Pivoted Cholesky used, rank {rank} of {M.shape[0]}")

    err = np.max(np.abs(factor @ factor.T - M)) if M.size else 0.0
    if err > FACTOR_TOLERANCE * scale:
        raise FactorizationError(f"factor reproduces covariance only to {err:.3e}")
    return factor


@dataclass(frozen=True)
class GaussianMeasure:
    """A centered Gaussian measure on R^n.

    With no covariance this is the standard measure gamma_n. Otherwise the
    covariance M is stored with a factor F such that F F^T = M; samples are
    z F^T for standard normal z of width ``F.shape[1]``.
    """

    dim: int
    covariance: Optional[np.ndarray] = None
    factor: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ShapeError(f"dimension must be positive, got {self.dim}")
        if self.covariance is not None:
            M = np.asarray(self.covariance, dtype=float)
            if M.shape != (self.dim, self.dim):
                raise ShapeError(f"covariance shape {M.shape} does not match dimension {self.dim}")
            object.__setattr__(self, 'covariance', M)
            if self.factor is None:
                object.__setattr__(self, 'factor', factor_covariance(M))
        if self.factor is not None and self.factor.shape[0] != self.dim:
            raise ShapeError(f"factor has {self.factor.shape[0]} rows, expected {self.dim}")

    @classmethod
    def standard(cls, dim: int) -> 'GaussianMeasure':
        return cls(dim)

    @classmethod
    def from_covariance(cls, covariance) -> 'GaussianMeasure':
        M = np.asarray(covariance, dtype=float)
        return cls(M.shape[0], covariance=M)

    @classmethod
    def from_factor(cls, factor) -> 'GaussianMeasure':
        """Measure with covariance F F^T, without refactoring it."""
        F = np.asarray(factor, dtype=float)
        if F.ndim != 2:
            raise ShapeError(f"factor must be a matrix, got shape {F.shape}")
        return cls(F.shape[0], covariance=F @ F.T, factor=F)

    @property
    def is_standard(self) -> bool:
        return self.factor is None

    @property
    def noise_dim(self) -> int:
        return self.dim if self.factor is None else self.factor.shape[1]

    def transform(self, z: np.ndarray) -> np.ndarray:
        """Map standard normal noise of width noise_dim to draws of the measure."""
        if self.factor is None:
            return z
        return z @ self.factor.T

    def draw(self, generator: np.random.Generator, size: int, antithetic: bool = False) -> np.ndarray:
        """
        Draw ``size`` points from an already positioned generator.

        Args:
            generator: numpy Generator
            size: Number of points
            antithetic: Pair every draw z with -z (size must be even)
        """
        if antithetic:
            if size % 2:
                raise ShapeError(f"antithetic sampling needs an even size, got {size}")
            half = generator.standard_normal((size // 2, self.noise_dim))
            z = np.concatenate([half, -half])
        else:
            z = generator.standard_normal((size, self.noise_dim))
        return self.transform(z)

    def factor_error(self) -> float:
        """Largest entrywise error of F F^T against M (0 for gamma_n)."""
        if self.factor is None:
            return 0.0
        return float(np.max(np.abs(self.factor @ self.factor.T - self.covariance)))


def sample(measure: GaussianMeasure, rng: RngStream, size: int = 1) -> np.ndarray:
    """
    Draw from a Gaussian measure.

    Args:
        measure: GaussianMeasure to sample
        rng: Stream the draws are taken from, starting at draw 0
        size: Number of points

    Returns:
        Array of shape (size, dim); the same (seed, stream_id) gives the same array
    """
    return measure.draw(rng.generator(), size)
