"""
Ornstein–Uhlenbeck semigroup through the Mehler representation.

P_t f(x) = E f(x e^{-t} + sqrt(1 - e^{-2t}) Y), with Y drawn from the same
Gaussian measure as x. Derivatives are moved inside the expectation with
grad P_t f = e^{-t} P_t(grad f) and Hess P_t f = e^{-2t} P_t(Hess f).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from gaussian.functions import FreeEnergy, SmoothFunction
from gaussian.measure import GaussianMeasure
from gaussian.rng import RngStream
from stats.estimate import ArrayEstimate, EstimateWithCI, EstimatorConfig
from stats.estimators import summarize_columns, summarize_mean
from utils.errors import DomainError, ShapeError
from utils.metrics import record_samples

logger = logging.getLogger(__name__)


@dataclass
class MehlerConfig:
    """Sample sizes of nested semigroup estimates.

    ``inner_samples`` draws of Y per evaluation point and ``outer_samples``
    draws of x; the outer count is doubled up to ``max_outer_samples`` until
    every curve point reaches ``target_rel_ci``.
    """

    inner_samples: int = 256
    outer_samples: int = 4096
    antithetic: bool = False
    batches: int = 32
    target_rel_ci: float = 0.05
    max_outer_samples: int = 16384
    threads: Optional[int] = None

    def __post_init__(self):
        if self.inner_samples < 2 or self.outer_samples < 2:
            raise DomainError("inner and outer sample counts must both be >= 2")
        if self.antithetic and self.inner_samples % 2:
            raise DomainError(f"antithetic sampling needs an even inner count, got {self.inner_samples}")

    def outer_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            samples=self.outer_samples,
            batches=self.batches,
            target_rel_ci=self.target_rel_ci,
            max_samples=self.max_outer_samples,
            threads=self.threads,
        )


def as_function(f: Union[SmoothFunction, float]) -> SmoothFunction:
    """Accept either a SmoothFunction or an inverse temperature for f_beta."""
    if isinstance(f, SmoothFunction):
        return f
    return FreeEnergy(float(f))


def check_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"semigroup time must be a finite t >= 0, got {t}")
    return t


def mehler_weights(t: float):
    """Coefficients (e^{-t}, sqrt(1 - e^{-2t})) of the Mehler interpolation."""
    return np.exp(-t), np.sqrt(-np.expm1(-2.0 * t))


def mehler_points(x: np.ndarray, t: float, y: np.ndarray) -> np.ndarray:
    """x e^{-t} + sqrt(1 - e^{-2t}) y, broadcasting x of shape (..., n) against y."""
    a, b = mehler_weights(t)
    return a * x + b * y


def _check_point(x, measure: GaussianMeasure) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (measure.dim,):
        raise ShapeError(f"point of shape {x.shape} does not live in dimension {measure.dim}")
    return x


def _inner_draws(measure: GaussianMeasure, cfg: MehlerConfig, rng: RngStream) -> np.ndarray:
    y = measure.draw(rng.generator(), cfg.inner_samples, antithetic=cfg.antithetic)
    record_samples('nested', cfg.inner_samples)
    return y


def _pair_average(values: np.ndarray, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return values
    half = values.shape[0] // 2
    return 0.5 * (values[:half] + values[half:])


def mehler_apply(f, t: float, x, measure: GaussianMeasure, cfg: MehlerConfig,
                 rng: RngStream) -> EstimateWithCI:
    """
    Estimate P_t f(x).

    Args:
        f: SmoothFunction, or any callable on (K, n) batches
        t: Semigroup time (t = 0 returns f(x) exactly)
        x: Evaluation point
        measure: Measure of the semigroup
        cfg: Inner sample size and antithetic switch
        rng: Stream of the inner draws

    Returns:
        EstimateWithCI of the inner Monte Carlo average
    """
    t = check_time(t)
    x = _check_point(x, measure)
    if t == 0:
        return EstimateWithCI.exact(float(np.asarray(f(x[None, :]))[0]))
    y = _inner_draws(measure, cfg, rng)
    values = _pair_average(np.asarray(f(mehler_points(x, t, y)), dtype=float), cfg.antithetic)
    return summarize_mean(values, values.shape[0], rng.fingerprint)


def pt_gradient(t: float, x, f, measure: GaussianMeasure, cfg: MehlerConfig,
                rng: RngStream) -> ArrayEstimate:
    """
    Estimate grad P_t f(x) = e^{-t} P_t(grad f)(x).

    ``f`` is a SmoothFunction or the inverse temperature of f_beta.
    """
    f = as_function(f)
    t = check_time(t)
    x = _check_point(x, measure)
    if t == 0:
        g = f.gradient(x)
        return ArrayEstimate(g, np.zeros_like(g), 0, 0, 0)
    y = _inner_draws(measure, cfg, rng)
    grads = _pair_average(f.gradient(mehler_points(x, t, y)), cfg.antithetic)
    est = summarize_columns(grads, grads.shape[0], rng.fingerprint)
    scale = np.exp(-t)
    return ArrayEstimate(scale * est.value, scale * est.stderr, est.n_samples, est.n_batches,
                         est.seed_fingerprint)


def pt_hessian(t: float, x, f, measure: GaussianMeasure, cfg: MehlerConfig,
               rng: RngStream) -> ArrayEstimate:
    """Estimate Hess P_t f(x) = e^{-2t} P_t(Hess f)(x) as a dense matrix."""
    f = as_function(f)
    t = check_time(t)
    x = _check_point(x, measure)
    if t == 0:
        h = f.hessian(x)
        return ArrayEstimate(h, np.zeros_like(h), 0, 0, 0)
    y = _inner_draws(measure, cfg, rng)
    hess = _pair_average(f.hessian(mehler_points(x, t, y)), cfg.antithetic)
    est = summarize_columns(hess, hess.shape[0], rng.fingerprint)
    scale = np.exp(-2.0 * t)
    return ArrayEstimate(scale * est.value, scale * est.stderr, est.n_samples, est.n_batches,
                         est.seed_fingerprint)
