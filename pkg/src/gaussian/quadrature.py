"""Tensor-grid Gauss–Hermite quadrature under gamma_n.

Used as an exact oracle in low dimension: integrals of Gamma, Gamma_2 and
||Hess P_t f||^2, with P_t itself evaluated by an inner quadrature.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from gaussian.functions import SmoothFunction
from utils.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

MAX_NODES = 2_000_000


@dataclass(frozen=True)
class HermiteRule:
    """Nodes and weights integrating against the standard Gaussian on R^dim."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Weighted sum over the leading (node) axis."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def hermite_rule(dim: int, order: int = 40) -> HermiteRule:
    """
    Build the tensor product of ``order``-point probabilists' Hermite rules.

    Args:
        dim: Dimension of the Gaussian
        order: Points per axis

    Returns:
        HermiteRule whose weights sum to one
    """
    if dim < 1 or order < 1:
        raise DomainError(f"dimension and order must be positive, got dim={dim}, order={order}")
    if order ** dim > MAX_NODES:
        raise ShapeError(f"{order}^{dim} quadrature nodes exceed the limit of {MAX_NODES}")
    x, w = hermegauss(order)
    w = w / np.sqrt(2.0 * np.pi)
    nodes = np.array(list(itertools.product(x, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    return HermiteRule(nodes=nodes, weights=weights)


def expect(fn: Callable[[np.ndarray], np.ndarray], dim: int, order: int = 40) -> np.ndarray:
    """E[fn(X)] for X ~ gamma_dim; fn maps an (m, dim) batch to (m, ...)."""
    rule = hermite_rule(dim, order)
    return rule.integrate(fn(rule.nodes))


def mehler_points(x: np.ndarray, t: float, rule: HermiteRule) -> np.ndarray:
    """Points x e^{-t} + sqrt(1 - e^{-2t}) y for every node y; shape (m_x, m_y, dim)."""
    x = np.atleast_2d(x)
    return np.exp(-t) * x[:, None, :] + np.sqrt(-np.expm1(-2.0 * t)) * rule.nodes[None, :, :]


def semigroup_value(f: SmoothFunction, t: float, x: np.ndarray, order: int = 40) -> np.ndarray:
    """P_t f(x) by inner quadrature over the Mehler kernel."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rule = hermite_rule(x.shape[1], order)
    values = f.value(mehler_points(x, t, rule))
    return values @ rule.weights


def decay_quantities(f: SmoothFunction, t: float, dim: int, order: int = 30,
                     inner_order: int = 30) -> Dict[str, float]:
    """
    Exact (to quadrature error) decay integrals of f under gamma_dim at time t.

    Uses grad P_t f = e^{-t} P_t(grad f) and Hess P_t f = e^{-2t} P_t(Hess f).

    Returns:
        Dict with ``I`` (integral of |grad P_t f|^2), ``hessian`` (integral of
        ||Hess P_t f||_F^2) and ``gamma2`` (their sum)
    """
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    outer = hermite_rule(dim, order)
    if t == 0:
        grad = f.gradient(outer.nodes)
        hess = f.hessian(outer.nodes)
    else:
        inner = hermite_rule(dim, inner_order)
        pts = mehler_points(outer.nodes, t, inner)
        grad = np.exp(-t) * np.einsum('k,mkd->md', inner.weights, f.gradient(pts))
        hess = np.exp(-2.0 * t) * np.einsum('k,mkab->mab', inner.weights, f.hessian(pts))
    i_val = float(outer.integrate(np.sum(grad * grad, axis=-1)))
    h_val = float(outer.integrate(np.sum(hess * hess, axis=(-2, -1))))
    return {'I': i_val, 'hessian': h_val, 'gamma2': i_val + h_val}


def variance(f: SmoothFunction, dim: int, order: int = 60) -> float:
    """Var_{gamma_dim}(f) by quadrature."""
    rule = hermite_rule(dim, order)
    v = f.value(rule.nodes)
    m = rule.integrate(v)
    return float(rule.integrate((v - m) ** 2))
