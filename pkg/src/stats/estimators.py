"""
Batch-means Monte Carlo estimators with centralized auto-doubling.

A sampler is any callable ``sampler(rng: RngStream, size: int) -> ndarray``
returning ``size`` draws (one row per draw). Round r of an estimate draws
its batches from ``rng.derive(r, b)``, so a result depends only on the
config and the root stream, never on the number of worker threads.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from gaussian.rng import RngStream
from stats.estimate import (
    LOW_PRECISION,
    ZERO_NORM,
    ArrayEstimate,
    EstimateWithCI,
    EstimatorConfig,
)
from utils.errors import DomainError
from utils.metrics import record_samples
from utils.parallel import map_ordered

logger = logging.getLogger(__name__)

Sampler = Callable[[RngStream, int], np.ndarray]


def _batched(values: np.ndarray, batches: int) -> np.ndarray:
    n = values.shape[0]
    if n % batches:
        raise DomainError(f"{n} samples cannot be split into {batches} equal batches")
    return values.reshape((batches, n // batches) + values.shape[1:])


def summarize_mean(values, batches: int, fingerprint: int = 0) -> EstimateWithCI:
    """
    Sample mean with a batch-means standard error.

    Args:
        values: One-dimensional sample
        batches: Number of contiguous batches (>= 2)
        fingerprint: Lineage of the stream the sample came from
    """
    values = np.asarray(values, dtype=float)
    means = _batched(values, batches).mean(axis=1)
    return EstimateWithCI(
        value=float(values.mean()),
        stderr=float(means.std(ddof=1) / np.sqrt(batches)),
        n_samples=values.shape[0],
        n_batches=batches,
        seed_fingerprint=fingerprint,
    )


def summarize_columns(values, batches: int, fingerprint: int = 0) -> ArrayEstimate:
    """Column means of an (N, ...) sample with batch-means standard errors."""
    values = np.asarray(values, dtype=float)
    means = _batched(values, batches).mean(axis=1)
    return ArrayEstimate(
        value=values.mean(axis=0),
        stderr=means.std(axis=0, ddof=1) / np.sqrt(batches),
        n_samples=values.shape[0],
        n_batches=batches,
        seed_fingerprint=fingerprint,
    )


def summarize_variance(values, batches: int, fingerprint: int = 0) -> EstimateWithCI:
    """Unbiased sample variance; the standard error comes from per-batch variances."""
    values = np.asarray(values, dtype=float)
    per_batch = _batched(values, batches)
    if per_batch.shape[1] < 2:
        raise DomainError("variance batches need at least two samples each")
    batch_vars = per_batch.var(axis=1, ddof=1)
    return EstimateWithCI(
        value=float(values.var(ddof=1)),
        stderr=float(batch_vars.std(ddof=1) / np.sqrt(batches)),
        n_samples=values.shape[0],
        n_batches=batches,
        seed_fingerprint=fingerprint,
    )


def draw_round(sampler: Sampler, rng: RngStream, round_index: int, size: int,
               batches: int, threads: Optional[int] = None) -> np.ndarray:
    """Draw ``size`` samples as ``batches`` independent sub-streams, in batch order."""
    per_batch = size // batches
    parts = map_ordered(
        lambda b: np.asarray(sampler(rng.derive(round_index, b), per_batch), dtype=float),
        range(batches),
        threads,
    )
    return np.concatenate(parts, axis=0)


def run_adaptive(sampler: Sampler, cfg: EstimatorConfig, rng: RngStream,
                 summarize: Callable[[np.ndarray], EstimateWithCI], kind: str):
    """
    Draw with auto-doubling until the estimate is precise enough.

    Args:
        sampler: Draw function
        cfg: Sample budget
        rng: Root stream
        summarize: Turns the full sample into an estimate
        kind: Metric label

    Returns:
        Tuple (estimate, sample); the estimate carries ``low_precision`` when
        the cap was hit before the target relative CI
    """
    values = draw_round(sampler, rng, 0, cfg.samples, cfg.batches, cfg.threads)
    est = summarize(values)
    round_index = 0
    while est.rel_ci > cfg.target_rel_ci:
        total = values.shape[0]
        if 2 * total > cfg.max_samples:
            logger.warning(f"{kind} estimate stopped at {total} samples with relative CI "
                           f"{est.rel_ci:.3g} > {cfg.target_rel_ci}")
            est = est.with_flag(LOW_PRECISION)
            break
        round_index += 1
        more = draw_round(sampler, rng, round_index, total, cfg.batches, cfg.threads)
        values = np.concatenate([values, more], axis=0)
        est = summarize(values)
        logger.debug(f"{kind} round {round_index}: n={values.shape[0]} value={est.value:.6g} "
                     f"se={est.stderr:.3g}")
    record_samples(kind, values.shape[0])
    return est, values


def mc_mean(sampler: Sampler, cfg: EstimatorConfig, rng: RngStream) -> EstimateWithCI:
    """Monte Carlo mean of a scalar sampler."""
    est, _ = run_adaptive(sampler, cfg, rng,
                          lambda v: summarize_mean(v, cfg.batches, rng.fingerprint), 'mean')
    return est


def mc_variance(sampler: Sampler, cfg: EstimatorConfig, rng: RngStream) -> EstimateWithCI:
    """
    Unbiased Monte Carlo variance of a scalar sampler.

    Returns:
        EstimateWithCI; flagged ``low_precision`` when max_samples was reached
        before the target relative CI
    """
    est, _ = run_adaptive(sampler, cfg, rng,
                          lambda v: summarize_variance(v, cfg.batches, rng.fingerprint), 'variance')
    return est


def worst_rel_ci(est: ArrayEstimate, watch: Optional[np.ndarray] = None) -> float:
    """Largest relative 95% half-width among the watched components."""
    value = est.value if watch is None else est.value[watch]
    stderr = est.stderr if watch is None else est.stderr[watch]
    noisy = stderr > 0
    if not np.any(noisy):
        return 0.0
    with np.errstate(divide='ignore'):
        return float(np.max(1.96 * stderr[noisy] / np.abs(value[noisy])))


def mc_columns(sampler: Sampler, cfg: EstimatorConfig, rng: RngStream, kind: str = 'mean',
               watch: Optional[np.ndarray] = None) -> ArrayEstimate:
    """
    Componentwise means of a vector-valued sampler, with auto-doubling.

    Args:
        sampler: Draw function returning rows of shape (k,)
        cfg: Sample budget
        rng: Root stream
        kind: Metric label
        watch: Boolean mask of the components that drive the doubling (all by default)

    Returns:
        ArrayEstimate; flagged ``low_precision`` when the cap was reached first
    """
    values = draw_round(sampler, rng, 0, cfg.samples, cfg.batches, cfg.threads)
    est = summarize_columns(values, cfg.batches, rng.fingerprint)
    round_index = 0
    while worst_rel_ci(est, watch) > cfg.target_rel_ci:
        total = values.shape[0]
        if 2 * total > cfg.max_samples:
            logger.warning(f"{kind} estimate stopped at {total} samples with relative CI "
                           f"{worst_rel_ci(est, watch):.3g} > {cfg.target_rel_ci}")
            est = replace(est, flags=est.flags + (LOW_PRECISION,))
            break
        round_index += 1
        more = draw_round(sampler, rng, round_index, total, cfg.batches, cfg.threads)
        values = np.concatenate([values, more], axis=0)
        est = summarize_columns(values, cfg.batches, rng.fingerprint)
        logger.debug(f"{kind} round {round_index}: n={values.shape[0]}")
    record_samples(kind, values.shape[0])
    return est


def _norm_from_moment(moment: EstimateWithCI, p: float) -> EstimateWithCI:
    if moment.value <= 0:
        return EstimateWithCI(0.0, 0.0, moment.n_samples, moment.n_batches,
                              moment.seed_fingerprint, moment.flags).with_flag(ZERO_NORM)
    value = moment.value ** (1.0 / p)
    # delta method: d/dm m^{1/p} = (1/p) m^{1/p - 1}
    stderr = value / (p * moment.value) * moment.stderr
    return EstimateWithCI(value, stderr, moment.n_samples, moment.n_batches,
                          moment.seed_fingerprint, moment.flags)


def lp_norms_from_samples(values, ps: Sequence[float], batches: int,
                          fingerprint: int = 0) -> List[EstimateWithCI]:
    """
    L^p norms of |X| at several exponents, all from one sample.

    Since every norm is taken under the same empirical measure, the returned
    values are exactly nondecreasing in p.
    """
    a = np.abs(np.asarray(values, dtype=float))
    out = []
    for p in ps:
        if p < 1:
            raise DomainError(f"L^p norm needs p >= 1, got {p}")
        out.append(_norm_from_moment(summarize_mean(a ** p, batches, fingerprint), p))
    return out


def lp_norm(sampler: Sampler, p: float, cfg: EstimatorConfig, rng: RngStream) -> EstimateWithCI:
    """
    (E|X|^p)^{1/p} with a delta-method standard error.

    Raises:
        DomainError: If p < 1
    """
    if p < 1:
        raise DomainError(f"L^p norm needs p >= 1, got {p}")

    def summarize(v):
        return lp_norms_from_samples(v, [p], cfg.batches, rng.fingerprint)[0]

    est, _ = run_adaptive(sampler, cfg, rng, summarize, 'lp_norm')
    if est.has_flag(ZERO_NORM):
        logger.warning(f"L^{p} norm estimate is zero: every sample vanished")
    return est


@dataclass(frozen=True)
class HypercontractiveResult:
    """The integral of e^{-2s}(1-e^{-2s}) ||g||^2_{1+e^{-2s}} and its closed-form comparator."""

    integral: EstimateWithCI
    comparator: EstimateWithCI
    l1: float
    l2: float
    constant: float

    def to_dict(self):
        return {
            'integral': self.integral.to_dict(),
            'comparator': self.comparator.to_dict(),
            'l1': self.l1,
            'l2': self.l2,
            'constant': self.constant,
        }


def default_s_grid(s_max: float = 12.0, points: int = 2401) -> np.ndarray:
    return np.linspace(0.0, s_max, points)


def _hypercontractive_pieces(norm_curve: Callable[[np.ndarray], np.ndarray], s_grid: np.ndarray,
                             constant: float):
    p = 1.0 + np.exp(-2.0 * s_grid)
    norms = np.asarray(norm_curve(p), dtype=float)
    weight = np.exp(-2.0 * s_grid) * -np.expm1(-2.0 * s_grid)
    integral = trapezoid(weight * norms ** 2, s_grid)
    # beyond the grid, ||g||_{p(s)} <= ||g||_{p(S)} since p decreases in s
    S = s_grid[-1]
    integral += norms[-1] ** 2 * (0.5 * np.exp(-2.0 * S) - 0.25 * np.exp(-4.0 * S))
    l1, l2 = (float(v) for v in norm_curve(np.array([1.0, 2.0])))
    if l1 <= 0:
        raise DomainError("||g||_1 = 0: the norm ratio of the comparator is undefined")
    comparator = constant * l2 ** 2 / (1.0 + np.log(l2 / l1)) ** 2
    return float(integral), float(comparator), l1, l2


def hypercontractive_integral(norm_curve: Callable[[np.ndarray], np.ndarray],
                              s_grid: Optional[np.ndarray] = None,
                              constant: float = 1.0) -> HypercontractiveResult:
    """
    Integrate e^{-2s}(1-e^{-2s}) ||g||^2_{1+e^{-2s}} over s >= 0.

    Args:
        norm_curve: Vectorized map p -> ||g||_p
        s_grid: Increasing quadrature grid starting at 0
        constant: Constant C of the comparator C ||g||_2^2 / [1 + log(||g||_2/||g||_1)]^2

    Raises:
        DomainError: If ||g||_1 = 0
    """
    s_grid = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    integral, comparator, l1, l2 = _hypercontractive_pieces(norm_curve, s_grid, constant)
    return HypercontractiveResult(EstimateWithCI.exact(integral), EstimateWithCI.exact(comparator),
                                  l1, l2, constant)


def empirical_norm_curve(values) -> Callable[[np.ndarray], np.ndarray]:
    """p -> (mean |X|^p)^{1/p} under the empirical measure of a sample."""
    a = np.abs(np.asarray(values, dtype=float))

    def curve(p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return np.array([np.mean(a ** q) ** (1.0 / q) for q in p])

    return curve


def hypercontractive_integral_from_samples(values, batches: int, fingerprint: int = 0,
                                           s_grid: Optional[np.ndarray] = None,
                                           constant: float = 1.0) -> HypercontractiveResult:
    """
    hypercontractive_integral for g given by samples, with batch error bars.

    The value uses the full sample; the standard error is the spread of the
    per-batch values.
    """
    s_grid = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    integral, comparator, l1, l2 = _hypercontractive_pieces(empirical_norm_curve(values), s_grid, constant)
    per_batch = np.array([_hypercontractive_pieces(empirical_norm_curve(chunk), s_grid, constant)[:2]
                          for chunk in _batched(values, batches)])
    se = per_batch.std(axis=0, ddof=1) / np.sqrt(batches)
    n = values.shape[0]
    return HypercontractiveResult(
        EstimateWithCI(integral, float(se[0]), n, batches, fingerprint),
        EstimateWithCI(comparator, float(se[1]), n, batches, fingerprint),
        l1, l2, constant,
    )
