"""
Sherrington–Kirkpatrick model.

H_n(sigma) = -(1/sqrt(n)) sum_{i,j} X_ij sigma_i sigma_j over all n^2 ordered
pairs (couplings are not symmetrized), and F_{n,beta} = (1/beta) log sum_sigma
e^{beta H_n(sigma)} by exact enumeration.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np
from scipy.special import logsumexp

from criteria.checks import partial_curvature_bound
from criteria.report import LE, InequalityReport
from gaussian.functions import FreeEnergy, validate_beta
from gaussian.rng import RngStream
from models.spins import (
    OverlapDistribution,
    all_configurations,
    check_capacity,
)
from stats.estimate import EstimateWithCI, EstimatorConfig
from stats.estimators import draw_round, summarize_variance
from utils.errors import DomainError, PreconditionError, RegimeError
from utils.metrics import record_samples

logger = logging.getLogger(__name__)

SK_BETA_MAX = 0.5
GROUND_STATE_MAX_SITES = 20
DEFAULT_LOGN_GAMMA = 0.25


def naive_energies(couplings: np.ndarray) -> np.ndarray:
    """
    Energies of every configuration by direct evaluation.

    Args:
        couplings: (n, n) or (d, n, n) coupling matrices

    Returns:
        (2^n,) or (d, 2^n) energies, configuration c as in all_configurations
    """
    X = np.asarray(couplings, dtype=float)
    n = X.shape[-1]
    S = all_configurations(n)
    quad = np.einsum('ci,...ij,cj->...c', S, X, S)
    return -quad / np.sqrt(n)


def gray_code_energies(couplings: np.ndarray) -> np.ndarray:
    """
    Energies of every configuration by single spin flips along a Gray code.

    Flipping spin k changes the energy by (2/sqrt(n)) sigma_k h_k with local
    field h_k = sum_{j != k} (X_kj + X_jk) sigma_j; fields are updated in O(n)
    per flip. Vectorized over a leading axis of disorder draws.
    """
    X = np.asarray(couplings, dtype=float)
    single = X.ndim == 2
    if single:
        X = X[None]
    d, n = X.shape[0], X.shape[-1]
    check_capacity(n)
    A = X + np.swapaxes(X, -1, -2)
    idx = np.arange(n)
    A[:, idx, idx] = 0.0
    scale = 1.0 / np.sqrt(n)

    sigma = np.ones((d, n))
    field = A.sum(axis=2)
    energy = -X.sum(axis=(1, 2)) * scale
    out = np.empty((d, 2 ** n))
    out[:, 0] = energy
    code = 0
    for step in range(1, 2 ** n):
        k = (step & -step).bit_length() - 1
        s_k = sigma[:, k].copy()
        energy = energy + 2.0 * scale * s_k * field[:, k]
        sigma[:, k] = -s_k
        field -= 2.0 * s_k[:, None] * A[:, :, k]
        code ^= 1 << k
        out[:, code] = energy
    return out[0] if single else out


@dataclass(frozen=True)
class SKInstance:
    """One disorder draw of the SK couplings at inverse temperature beta."""

    n_sites: int
    couplings: np.ndarray
    beta: float

    def __post_init__(self):
        X = np.asarray(self.couplings, dtype=float)
        if X.shape != (self.n_sites, self.n_sites):
            raise DomainError(f"couplings of shape {X.shape} for n={self.n_sites}")
        object.__setattr__(self, 'couplings', X)
        object.__setattr__(self, 'beta', validate_beta(self.beta))

    @classmethod
    def draw(cls, n: int, beta: float, rng: RngStream) -> 'SKInstance':
        return cls(n, rng.generator().standard_normal((n, n)), beta)

    def energies(self, method: str = 'gray') -> np.ndarray:
        if method == 'gray':
            return gray_code_energies(self.couplings)
        if method == 'naive':
            return naive_energies(self.couplings)
        raise DomainError(f"unknown enumeration method: {method}")

    def ground_state_energy(self) -> float:
        return float(np.max(self.energies()))

    def to_dict(self) -> Dict[str, Any]:
        return {'model': 'sk', 'n': self.n_sites, 'beta': self.beta}


def sk_free_energies(energies: np.ndarray, beta: float) -> np.ndarray:
    return logsumexp(beta * energies, axis=-1) / beta


def sk_disorder_sampler(n: int, beta: float):
    """Sampler of F_{n,beta} over independent coupling draws."""
    check_capacity(n)

    def sampler(stream: RngStream, size: int) -> np.ndarray:
        X = stream.generator().standard_normal((size, n, n))
        return sk_free_energies(gray_code_energies(X), beta)

    return sampler


def sk_cbeta_exact(n: int, beta: float) -> float:
    """C_beta = E_{sigma,sigma'} exp(2 beta^2 S^2 / n), exact over the overlap law."""
    beta = validate_beta(beta)
    dist = OverlapDistribution.exact(n)
    return dist.expectation(lambda s: np.exp(2.0 * beta ** 2 * s * s / n))


def _check_sk_regime(beta: float) -> float:
    beta = validate_beta(beta)
    if beta >= SK_BETA_MAX:
        raise RegimeError(f"the SK variance bound needs 0 < beta < 1/2, got beta={beta}")
    return beta


def sk_variance_bound(n: int, beta: float, sharp: bool = False) -> float:
    """
    Var(F_{n,beta}) <= C_beta / (2 beta^2).

    With ``sharp`` the constant term of the chain is kept: (C_beta - 1) / (2 beta^2).

    Raises:
        RegimeError: If beta >= 1/2
    """
    beta = _check_sk_regime(beta)
    c = sk_cbeta_exact(n, beta)
    return (c - 1.0 if sharp else c) / (2.0 * beta ** 2)


def gaussian_limit_cbeta(beta: float) -> float:
    """E[exp(2 beta^2 Z^2)] = 1/sqrt(1 - 4 beta^2), the n -> infinity value of C_beta."""
    beta = _check_sk_regime(beta)
    return 1.0 / np.sqrt(1.0 - 4.0 * beta ** 2)


def chatterjee_ir_bound(M, nu, beta: float, r: int, t: float) -> float:
    """
    e^{-2t} sum_{i,j} M_ij^r exp(2 beta^2 e^{-2t} M_ij) nu_i nu_j.

    Raises:
        PreconditionError: If M or nu has a negative entry
    """
    beta = validate_beta(beta)
    M = np.asarray(M, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(M < 0) or np.any(nu < 0):
        raise PreconditionError("the I_r bound needs M_ij >= 0 and nu_i >= 0")
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    c = 2.0 * beta ** 2 * np.exp(-2.0 * t)
    return float(np.exp(-2.0 * t) * nu @ (M ** r * np.exp(c * M)) @ nu)


def sk_chatterjee_ir_bound(n: int, beta: float, r: int, t: float) -> float:
    """chatterjee_ir_bound for the SK covariance with uniform nu, in O(n) overlap terms."""
    beta = validate_beta(beta)
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    c = 2.0 * beta ** 2 * np.exp(-2.0 * t)
    dist = OverlapDistribution.exact(n)
    return float(np.exp(-2.0 * t) * dist.covariance_expectation(lambda m: m ** r * np.exp(c * m)))


def interpolation_time(beta: float, gamma_const: float) -> float:
    """T = (1/2) log(2 beta^2 / gamma)."""
    return 0.5 * float(np.log(2.0 * beta ** 2 / gamma_const))


def sk_logn_bound(n: int, beta: float, gamma_const: float = DEFAULT_LOGN_GAMMA) -> EstimateWithCI:
    """
    Variance bound of order n / log n at any temperature.

    With T = (1/2) log(2 beta^2 / gamma), I(0) <= n and
    I(T) <= e^{-2T} E[M e^{gamma M}] (the I_1 bound at T, clamped by
    e^{-2T} I(0)), the partial curvature bound is applied to (I(0), I(T), T).

    Raises:
        PreconditionError: If T < 0 or gamma >= 1/2 (E[M e^{gamma M}] diverges with n)
    """
    beta = validate_beta(beta)
    if n < 3:
        raise DomainError(f"the log n bound needs n >= 3, got {n}")
    if not 0 < gamma_const < 0.5:
        raise PreconditionError(f"gamma must lie in (0, 1/2) for E[M e^(gamma M)] to stay finite, got {gamma_const}")
    T = interpolation_time(beta, gamma_const)
    if T < 0:
        raise PreconditionError(f"interpolation time T = {T:.4g} < 0: need 2 beta^2 >= gamma")
    i0 = float(n)
    decay = np.exp(-2.0 * T)
    iT = decay * OverlapDistribution.exact(n).covariance_expectation(lambda m: m * np.exp(gamma_const * m))
    if iT > decay * i0:
        logger.warning(f"I(T) envelope {iT:.4g} clamped by e^(-2T) I(0) = {decay * i0:.4g}")
        iT = decay * i0
    return partial_curvature_bound(i0, iT, T)


def ground_state_relation(n: int, beta: float, cfg: EstimatorConfig, rng: RngStream) -> Dict[str, Any]:
    """
    Var(max H) <= 3 Var(F) + 6 (log 2^n / beta)^2 over disorder draws.

    Also audits the sandwich max H <= F <= max H + log(2^n) / beta on every
    draw, with F evaluated as f_beta of the energy vector.
    """
    beta = validate_beta(beta)
    if n > GROUND_STATE_MAX_SITES:
        raise DomainError(f"ground-state audit supports n <= {GROUND_STATE_MAX_SITES}, got {n}")
    log_count = n * np.log(2.0)

    f = FreeEnergy(beta)

    def sampler(stream: RngStream, size: int) -> np.ndarray:
        E = gray_code_energies(stream.generator().standard_normal((size, n, n)))
        return np.stack([E.max(axis=1), f.value(E)], axis=1)

    draws = draw_round(sampler, rng, 0, cfg.samples, cfg.batches, cfg.threads)
    record_samples('disorder', draws.shape[0])
    top, free = draws[:, 0], draws[:, 1]
    gap = free - top
    tol = 1e-12 * np.maximum(np.abs(top), max(1.0, log_count / beta))
    sandwich_failures = int(np.sum((gap < -tol) | (gap > log_count / beta + tol)))

    var_max = summarize_variance(top, cfg.batches, rng.fingerprint)
    var_free = summarize_variance(free, cfg.batches, rng.fingerprint)
    slack = 6.0 * (log_count / beta) ** 2
    rhs = EstimateWithCI(3.0 * var_free.value + slack, 3.0 * var_free.stderr, var_free.n_samples,
                         var_free.n_batches, var_free.seed_fingerprint)
    report = InequalityReport.build('ground_state', [float(beta)], [var_max], [rhs], LE, n=n)
    if sandwich_failures:
        logger.error(f"Sandwich max H <= F <= max H + log(2^n)/beta failed on {sandwich_failures} draws")
    lowest = int(np.argmin(gap))
    return {
        'n': n,
        'beta': beta,
        'draws': int(draws.shape[0]),
        'sandwich_failures': sandwich_failures,
        'min_gap': float(gap.min()),
        'max_gap': float(gap.max()),
        'tightest_lower': {'max_energy': float(top[lowest]), 'free_energy': float(free[lowest])},
        'gap_bound': float(log_count / beta),
        'var_max': var_max.to_dict(),
        'var_free_energy': var_free.to_dict(),
        'report': report,
    }
