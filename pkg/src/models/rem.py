"""
Random energy model.

Two readings are supported and every operation says which one it uses:

* ``n_coordinates``: f_beta(x) = (1/beta) log sum_i e^{beta x_i} over
  n i.i.d. standard Gaussian coordinates.
* ``rem_2n_scaled``: F_{n,beta} = (1/beta) log sum_sigma e^{beta sqrt(n) X_sigma}
  over the 2^n configurations of {-1, 1}^n.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import logsumexp, softmax

from criteria.checks import partial_curvature_bound, theorem_variance_bound
from criteria.psi import PsiFunction
from criteria.report import LE, InequalityReport
from gaussian.functions import FreeEnergy, validate_beta
from gaussian.measure import GaussianMeasure
from gaussian.rng import RngStream
from models.sk import SKInstance, interpolation_time, sk_free_energies
from models.spins import check_capacity
from semigroup.curves import DecayCurve
from semigroup.decay import i_curve
from semigroup.grid import TimeGrid
from semigroup.mehler import MehlerConfig
from stats.estimate import INCONCLUSIVE, EstimateWithCI, EstimatorConfig
from stats.estimators import (
    HypercontractiveResult,
    draw_round,
    hypercontractive_integral_from_samples,
    mc_mean,
)
from utils.errors import DomainError, RegimeError
from utils.metrics import record_samples

logger = logging.getLogger(__name__)

N_COORDINATES = 'n_coordinates'
REM_2N_SCALED = 'rem_2n_scaled'
NORMALIZATIONS = (N_COORDINATES, REM_2N_SCALED)

HIGH_TEMP_BETA_MAX = float(np.sqrt(np.log(2.0) / 2.0))
LOW_TEMP_BETA_MIN = float(2.0 * np.sqrt(np.log(2.0)))
DEFAULT_LOW_TEMP_GAMMA = 0.5

# Largest n x samples block drawn at once by the REM samplers
SAMPLER_BLOCK = 2_000_000


@dataclass(frozen=True)
class REMInstance:
    """One draw of REM energies.

    ``energies`` holds the n coordinates x_i (n_coordinates) or the
    2^n standard Gaussians X_sigma (rem_2n_scaled).
    """

    n_sites: int
    energies: np.ndarray
    beta: float
    normalization: str = REM_2N_SCALED

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise DomainError(f"unknown REM normalization: {self.normalization}")
        if self.n_sites < 1:
            raise DomainError(f"need at least one site, got n={self.n_sites}")
        x = np.asarray(self.energies, dtype=float)
        expected = self.n_sites if self.normalization == N_COORDINATES else 2 ** self.n_sites
        if x.shape != (expected,):
            raise DomainError(f"{self.normalization} needs {expected} energies, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DomainError("REM energies must be finite")
        object.__setattr__(self, 'energies', x)
        object.__setattr__(self, 'beta', validate_beta(self.beta))

    @classmethod
    def draw(cls, n: int, beta: float, rng: RngStream, normalization: str = REM_2N_SCALED) -> 'REMInstance':
        if normalization == REM_2N_SCALED:
            check_capacity(n)
        size = n if normalization == N_COORDINATES else 2 ** n
        return cls(n, rng.generator().standard_normal(size), beta, normalization)

    def hamiltonian(self) -> np.ndarray:
        """H over the summands: x_i, or sqrt(n) X_sigma."""
        if self.normalization == N_COORDINATES:
            return self.energies
        return np.sqrt(self.n_sites) * self.energies

    def to_dict(self) -> Dict[str, Any]:
        return {'model': 'rem', 'n': self.n_sites, 'beta': self.beta, 'normalization': self.normalization}


def gibbs_free_energy(instance) -> float:
    """
    (1/beta) log sum exp(beta H) by exact enumeration, for an REM or SK instance.

    Raises:
        CapacityError: If an SK instance has more than 24 sites
    """
    if isinstance(instance, SKInstance):
        check_capacity(instance.n_sites)
        return float(sk_free_energies(instance.energies(), instance.beta))
    if isinstance(instance, REMInstance):
        return float(logsumexp(instance.beta * instance.hamiltonian()) / instance.beta)
    raise DomainError(f"not a spin model instance: {type(instance).__name__}")


def rem_free_energy_sampler(n: int, beta: float, normalization: str = N_COORDINATES):
    """Sampler of REM free energies over independent energy draws."""
    beta = validate_beta(beta)
    if normalization not in NORMALIZATIONS:
        raise DomainError(f"unknown REM normalization: {normalization}")
    if normalization == REM_2N_SCALED:
        check_capacity(n)
    width = n if normalization == N_COORDINATES else 2 ** n
    scale = 1.0 if normalization == N_COORDINATES else np.sqrt(n)

    def sampler(stream: RngStream, size: int) -> np.ndarray:
        gen = stream.generator()
        out = np.empty(size)
        chunk = max(1, SAMPLER_BLOCK // width)
        for start in range(0, size, chunk):
            m = min(chunk, size - start)
            out[start:start + m] = logsumexp(beta * scale * gen.standard_normal((m, width)), axis=1) / beta
        return out

    return sampler


def rem_high_temp_bound(n: int, beta: float) -> float:
    """
    Var(f_beta) <= ((1 - beta^2) / (1 - 2 beta^2)) / n under gamma_n (n_coordinates).

    Raises:
        RegimeError: If beta >= sqrt(log 2 / 2)
    """
    beta = validate_beta(beta)
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    if beta >= HIGH_TEMP_BETA_MAX:
        raise RegimeError(f"high-temperature REM bound needs 0 < beta < sqrt(log 2 / 2) = "
                          f"{HIGH_TEMP_BETA_MAX:.4f}, got beta={beta}")
    b2 = beta ** 2
    return (1.0 - b2) / (1.0 - 2.0 * b2) / n


def rem_envelope_bound(n: int, beta: float) -> EstimateWithCI:
    """
    Variance bound for f_beta from the criterion psi at its Gronwall envelope (n_coordinates).

    |∫grad f_beta|^2 = 1/n by symmetry; the theorem integral of the envelope is
    (e^{2 beta^2} - 1 - 2 beta^2) / (2 beta^2 n), so the total is
    (e^{2 beta^2} - 1) / (2 beta^2 n).
    """
    beta = validate_beta(beta)
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    return theorem_variance_bound(1.0 / n, PsiFunction.rem_envelope(beta, n))


def _gibbs_weights_sampler(n: int, beta: float, reduce):
    def sampler(stream: RngStream, size: int) -> np.ndarray:
        gen = stream.generator()
        parts = []
        chunk = max(1, SAMPLER_BLOCK // n)
        for start in range(0, size, chunk):
            m = min(chunk, size - start)
            parts.append(reduce(softmax(beta * gen.standard_normal((m, n)), axis=1)))
        return np.concatenate(parts, axis=0)

    return sampler


def rem_low_temp_bound_estimate(n: int, beta: float, cfg: EstimatorConfig, rng: RngStream,
                                constant: float = 1.0) -> EstimateWithCI:
    """
    1/n + 4 beta^2 n C ||g||_2^2 / [1 + log(||g||_2 / ||g||_1)]^2 with g = d_1 f_beta (n_coordinates).

    ||g||_1 = E p_1 = 1/n exactly; ||g||_2^2 = E p_1^2 is estimated from the
    coordinate average of p_i^2 on each draw. The estimate is flagged
    inconclusive when the norm ratio is degenerate.
    """
    beta = validate_beta(beta)
    if n < 3:
        raise DomainError(f"the low-temperature bound needs n >= 3, got {n}")
    sampler = _gibbs_weights_sampler(n, beta, lambda p: np.mean(p ** 2, axis=1))
    m = mc_mean(sampler, cfg, rng)
    l1 = 1.0 / n
    log_term = 1.0 + 0.5 * np.log(m.value) - np.log(l1) if m.value > 0 else np.nan
    if not np.isfinite(log_term) or log_term <= 0:
        logger.warning(f"REM low-temperature bound: degenerate norm ratio (E p^2 = {m.value:.3g})")
        return EstimateWithCI(np.nan, 0.0, m.n_samples, m.n_batches, m.seed_fingerprint,
                              m.flags).with_flag(INCONCLUSIVE)
    comparator = constant * m.value / log_term ** 2
    # delta method in E p^2
    d_comp = constant / log_term ** 2 * (1.0 - 1.0 / log_term)
    factor = 4.0 * beta ** 2 * n
    return EstimateWithCI(1.0 / n + factor * comparator, factor * abs(d_comp) * m.stderr,
                          m.n_samples, m.n_batches, m.seed_fingerprint, m.flags)


def rem_hypercontractive_audit(n: int, beta: float, cfg: EstimatorConfig, rng: RngStream,
                               constant: float = 1.0, s_grid: Optional[np.ndarray] = None) -> Dict[str, Any]:
    """
    Compares ∫e^{-2s}(1-e^{-2s})||d_1 f_beta||^2_{1+e^{-2s}} ds with its comparator (n_coordinates).

    Uses a fixed sample of p_1 (no doubling) so the norm curve is one
    empirical measure.
    """
    beta = validate_beta(beta)
    if n < 2:
        raise DomainError(f"need n >= 2, got {n}")
    sampler = _gibbs_weights_sampler(n, beta, lambda p: p[:, 0])
    values = draw_round(sampler, rng, 0, cfg.samples, cfg.batches, cfg.threads)
    record_samples('gibbs_weights', values.shape[0])
    result: HypercontractiveResult = hypercontractive_integral_from_samples(
        values, cfg.batches, rng.fingerprint, s_grid, constant)
    report = InequalityReport.build('rem_hypercontractive', [float(beta)], [result.integral],
                                    [result.comparator], LE, n=n, constant=constant)
    return {'n': n, 'beta': beta, 'result': result, 'report': report}


def rem_i_curve(n: int, beta: float, grid: TimeGrid, cfg: MehlerConfig, rng: RngStream) -> DecayCurve:
    """
    I curve of F_{n,beta} in the rem_2n_scaled reading.

    F_{n,beta}(X) = sqrt(n) f_{beta sqrt(n)}(X) on 2^n coordinates, so its I
    curve is n times that of FreeEnergy(beta sqrt(n)).
    """
    beta = validate_beta(beta)
    check_capacity(n)
    measure = GaussianMeasure.standard(2 ** n)
    curve = i_curve(FreeEnergy(beta * np.sqrt(n)), measure, grid, cfg, rng)
    return curve.scaled(float(n))


def rem_low_temp_envelope(n: int, T: float, gamma_const: float) -> float:
    """min((n / 2^n) e^{-2T} e^{gamma n}, e^{-2T} n): bound on I(T) in the rem_2n_scaled reading."""
    decay = np.exp(-2.0 * T)
    log_env = np.log(n) - n * np.log(2.0) + gamma_const * n - 2.0 * T
    return float(min(np.exp(log_env), decay * n))


def rem_chatterjee_low_temp_bound(n: int, beta: float,
                                  gamma_const: float = DEFAULT_LOW_TEMP_GAMMA) -> EstimateWithCI:
    """
    Temperature-only variance bound for F_{n,beta} (rem_2n_scaled).

    T = (1/2) log(2 beta^2 / gamma), I(0) <= n, I(T) from rem_low_temp_envelope,
    then partial_curvature_bound. For gamma < log 2 the result is at most
    2T / ((1 - e^{-2T})(log 2 - gamma)) whatever n is; gamma = 1 gives
    T = (1/2) log(2 beta^2).

    Raises:
        RegimeError: If beta <= 2 sqrt(log 2)
    """
    beta = validate_beta(beta)
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    if beta <= LOW_TEMP_BETA_MIN:
        raise RegimeError(f"low-temperature REM bound needs beta > 2 sqrt(log 2) = {LOW_TEMP_BETA_MIN:.4f}, "
                          f"got beta={beta}")
    if gamma_const <= 0:
        raise DomainError(f"gamma must be positive, got {gamma_const}")
    if gamma_const >= np.log(2.0):
        logger.warning(f"gamma={gamma_const} >= log 2: the I(T) envelope grows with n")
    T = interpolation_time(beta, gamma_const)
    return partial_curvature_bound(float(n), rem_low_temp_envelope(n, T, gamma_const), T)
