"""Free energy f_beta, its derivatives, and the carré du champ operators.

All functions act on the last axis, so a batch of points of shape
``(..., n)`` is evaluated in one call.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp, softmax

from utils.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

# Above this dimension the Hessian of f_beta is only kept in factored form.
DENSE_HESSIAN_LIMIT = 512


def validate_beta(beta: float) -> float:
    """Return beta as a float, rejecting non-positive or non-finite values."""
    beta = float(beta)
    if not np.isfinite(beta) or beta <= 0:
        raise DomainError(f"beta must be a positive finite real, got {beta}")
    return beta


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] == 0:
        raise DomainError("log-sum-exp of an empty vector is undefined")
    if not np.all(np.isfinite(x)):
        raise DomainError("input contains non-finite entries")
    return x


def log_sum_exp(x) -> Union[float, np.ndarray]:
    """
    Max-shifted log(sum(exp(x))) along the last axis.

    Args:
        x: Vector (or batch of vectors) with finite entries

    Returns:
        Scalar for a single vector, array for a batch

    Raises:
        DomainError: If the vector is empty or contains non-finite entries
    """
    x = _as_points(x)
    out = logsumexp(x, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def free_energy(x, beta: float) -> Union[float, np.ndarray]:
    """f_beta(x) = (1/beta) log sum_i exp(beta x_i)."""
    beta = validate_beta(beta)
    x = _as_points(x)
    out = logsumexp(beta * x, axis=-1) / beta
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SoftmaxState:
    """Gradient of f_beta: the Gibbs weights p_i = exp(beta x_i) / sum_k exp(beta x_k)."""

    logits: np.ndarray
    weights: np.ndarray
    log_z: Union[float, np.ndarray]
    beta: float

    @property
    def dim(self) -> int:
        return self.weights.shape[-1]


def gradient_f_beta(x, beta: float) -> SoftmaxState:
    """
    Softmax state of f_beta at x.

    Args:
        x: Point (or batch of points)
        beta: Inverse temperature

    Returns:
        SoftmaxState whose weights sum to one along the last axis
    """
    beta = validate_beta(beta)
    x = _as_points(x)
    z = beta * x
    return SoftmaxState(logits=x, weights=softmax(z, axis=-1), log_z=logsumexp(z, axis=-1), beta=beta)


@dataclass(frozen=True)
class SoftmaxHessian:
    """Hessian of f_beta, H = beta (diag(p) - p p^T), kept in factored form.

    ``matrix`` holds the dense form only while n <= DENSE_HESSIAN_LIMIT.
    """

    weights: np.ndarray
    beta: float
    matrix: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.weights.shape[-1]

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.dim > DENSE_HESSIAN_LIMIT:
            raise ShapeError(f"dense Hessian refused for n={self.dim} > {DENSE_HESSIAN_LIMIT}")
        return _dense_softmax_hessian(self.weights, self.beta)

    def frobenius_sq(self) -> Union[float, np.ndarray]:
        """||H||_F^2 = beta^2 (sum p^2 - 2 sum p^3 + (sum p^2)^2), O(n)."""
        p = self.weights
        s2 = np.sum(p * p, axis=-1)
        s3 = np.sum(p * p * p, axis=-1)
        return self.beta ** 2 * (s2 - 2.0 * s3 + s2 * s2)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        p = self.weights
        return self.beta * (p * v - p * np.sum(p * v, axis=-1, keepdims=True))


def _dense_softmax_hessian(p: np.ndarray, beta: float) -> np.ndarray:
    outer = p[..., :, None] * p[..., None, :]
    diag = np.zeros_like(outer)
    idx = np.arange(p.shape[-1])
    diag[..., idx, idx] = p
    return beta * (diag - outer)


def hessian_f_beta(state: SoftmaxState, beta: Optional[float] = None) -> SoftmaxHessian:
    """
    Hessian of f_beta from its softmax state.

    Args:
        state: Output of gradient_f_beta
        beta: Inverse temperature (defaults to the one recorded in the state)

    Returns:
        SoftmaxHessian with rows summing to zero
    """
    beta = state.beta if beta is None else validate_beta(beta)
    matrix = _dense_softmax_hessian(state.weights, beta) if state.dim <= DENSE_HESSIAN_LIMIT else None
    return SoftmaxHessian(weights=state.weights, beta=beta, matrix=matrix)


def gamma(grad) -> Union[float, np.ndarray]:
    """Carré du champ of the OU generator: Gamma(f) = |grad f|^2."""
    grad = np.asarray(grad, dtype=float)
    out = np.sum(grad * grad, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def gamma2(grad, hess) -> Union[float, np.ndarray]:
    """
    Iterated carré du champ: Gamma_2(f) = ||Hess f||_F^2 + |grad f|^2.

    Args:
        grad: Gradient of shape (..., n)
        hess: Dense Hessian of shape (..., n, n) or a SoftmaxHessian

    Raises:
        ShapeError: If the Hessian does not match the gradient
    """
    grad = np.asarray(grad, dtype=float)
    if isinstance(hess, SoftmaxHessian):
        if hess.weights.shape != grad.shape:
            raise ShapeError(f"Hessian weights {hess.weights.shape} do not match gradient {grad.shape}")
        frob = hess.frobenius_sq()
    else:
        hess = np.asarray(hess, dtype=float)
        if hess.shape != grad.shape + grad.shape[-1:]:
            raise ShapeError(f"Hessian shape {hess.shape} does not match gradient {grad.shape}")
        frob = np.sum(hess * hess, axis=(-2, -1))
    out = frob + np.sum(grad * grad, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


class SmoothFunction(ABC):
    """A test function with closed-form derivatives, evaluated on batches of points."""

    name = 'function'
    # True when the Hessian has the factored softmax form
    factored = False

    def __call__(self, x):
        return self.value(x)

    @abstractmethod
    def value(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def hessian(self, x: np.ndarray) -> np.ndarray:
        ...

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)

    def generator(self, x: np.ndarray) -> np.ndarray:
        """OU generator L f = Laplacian f - x . grad f."""
        x = np.asarray(x, dtype=float)
        return self.laplacian(x) - np.sum(x * self.gradient(x), axis=-1)

    def describe(self) -> dict:
        return {'name': self.name}


class FreeEnergy(SmoothFunction):
    """f_beta(x) = (1/beta) log sum exp(beta x_i)."""

    name = 'free_energy'
    factored = True

    def __init__(self, beta: float):
        self.beta = validate_beta(beta)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return logsumexp(self.beta * x, axis=-1) / self.beta

    def gradient(self, x):
        return softmax(self.beta * np.asarray(x, dtype=float), axis=-1)

    def hessian(self, x):
        return _dense_softmax_hessian(self.gradient(x), self.beta)

    def hessian_factored(self, x) -> SoftmaxHessian:
        return SoftmaxHessian(weights=self.gradient(x), beta=self.beta)

    def laplacian(self, x):
        p = self.gradient(x)
        return self.beta * (1.0 - np.sum(p * p, axis=-1))

    def describe(self):
        return {'name': self.name, 'beta': self.beta}


class Linear(SmoothFunction):
    """f(x) = a . x; the equality case of CD(1, infinity)."""

    name = 'linear'

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)

    def value(self, x):
        return np.asarray(x, dtype=float) @ self.a

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.a, x.shape).copy()

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = self.a.shape[0]
        return np.zeros(x.shape[:-1] + (n, n))

    def laplacian(self, x):
        return np.zeros(np.asarray(x).shape[:-1])

    def describe(self):
        return {'name': self.name, 'a': self.a.tolist()}


class Quadratic(SmoothFunction):
    """f(x) = (1/2) x^T A x with A symmetric."""

    name = 'quadratic'

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeError(f"quadratic form needs a square matrix, got {A.shape}")
        if not np.allclose(A, A.T):
            raise ShapeError("quadratic form matrix must be symmetric")
        self.A = A

    @classmethod
    def cross(cls, n: int, i: int, j: int) -> 'Quadratic':
        """f(x) = x_i x_j."""
        A = np.zeros((n, n))
        A[i, j] = A[j, i] = 1.0
        if i == j:
            A[i, i] = 2.0
        return cls(A)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum((x @ self.A) * x, axis=-1)

    def gradient(self, x):
        return np.asarray(x, dtype=float) @ self.A

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.A, x.shape[:-1] + self.A.shape).copy()

    def laplacian(self, x):
        return np.full(np.asarray(x).shape[:-1], np.trace(self.A))

    def describe(self):
        return {'name': self.name, 'A': self.A.tolist()}


class CoordinateMax(SmoothFunction):
    """f(x) = max_i x_i, with its almost-everywhere gradient e_argmax."""

    name = 'coordinate_max'

    def value(self, x):
        return np.max(np.asarray(x, dtype=float), axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        np.put_along_axis(out, np.argmax(x, axis=-1)[..., None], 1.0, axis=-1)
        return out

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        return np.zeros(x.shape[:-1] + (n, n))

    def laplacian(self, x):
        return np.zeros(np.asarray(x).shape[:-1])


class HermiteProduct(SmoothFunction):
    """Hermite eigenfunctions of the OU generator of degree 1 or 2.

    ``HermiteProduct(i)`` is x_i, ``HermiteProduct(i, j)`` is x_i x_j for i != j
    and x_i^2 - 1 for i == j. Under gamma_n, P_t multiplies them by exp(-degree t).
    """

    name = 'hermite'

    def __init__(self, i: int, j: Optional[int] = None):
        self.i = i
        self.j = j

    @property
    def degree(self) -> int:
        return 1 if self.j is None else 2

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.j is None:
            return x[..., self.i].copy()
        if self.i == self.j:
            return x[..., self.i] ** 2 - 1.0
        return x[..., self.i] * x[..., self.j]

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.j is None:
            out[..., self.i] = 1.0
        elif self.i == self.j:
            out[..., self.i] = 2.0 * x[..., self.i]
        else:
            out[..., self.i] = x[..., self.j]
            out[..., self.j] = x[..., self.i]
        return out

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        out = np.zeros(x.shape[:-1] + (n, n))
        if self.j is None:
            return out
        if self.i == self.j:
            out[..., self.i, self.i] = 2.0
        else:
            out[..., self.i, self.j] = 1.0
            out[..., self.j, self.i] = 1.0
        return out

    def describe(self):
        return {'name': self.name, 'i': self.i, 'j': self.j}
