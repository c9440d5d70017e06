"""Structural checks of the semigroup: eigen-decay, heat equation, L^2 contraction."""

import logging
from typing import Sequence

import numpy as np

from criteria.report import LE, InequalityReport, judge_equal
from gaussian.functions import HermiteProduct, SmoothFunction
from gaussian.measure import GaussianMeasure
from gaussian.rng import RngStream
from semigroup.mehler import MehlerConfig, as_function, check_time, mehler_apply, mehler_points
from stats.estimate import EstimateWithCI
from stats.estimators import summarize_mean
from utils.errors import DomainError

logger = logging.getLogger(__name__)


def hermite_decay_check(f: HermiteProduct, x, times: Sequence[float], cfg: MehlerConfig,
                        rng: RngStream) -> InequalityReport:
    """P_t h(x) = e^{-kt} h(x) for a degree-k Hermite function h under gamma_n."""
    x = np.asarray(x, dtype=float)
    measure = GaussianMeasure.standard(x.shape[0])
    exact_at_x = float(f.value(x[None, :])[0])
    lhs, rhs, verdicts = [], [], []
    for j, t in enumerate(times):
        est = mehler_apply(f, t, x, measure, cfg, rng.derive(j))
        exact = EstimateWithCI.exact(np.exp(-f.degree * t) * exact_at_x)
        lhs.append(est)
        rhs.append(exact)
        verdicts.append(judge_equal(est, exact))
    return InequalityReport.build(f'hermite_decay_deg{f.degree}', list(times), lhs, rhs, LE, verdicts)


def heat_equation_check(f, t: float, x, cfg: MehlerConfig, rng: RngStream,
                        dt: float = 1e-2) -> InequalityReport:
    """
    d/dt P_t f(x) = P_t(L f)(x) under gamma_n.

    The time derivative is a centered difference of P_{t±dt} f(x) with the
    same inner draws; P_t(Lf)(x) uses those draws as well.
    """
    f = as_function(f)
    t = check_time(t)
    if t < dt:
        raise DomainError(f"centered difference needs t >= dt, got t={t}, dt={dt}")
    x = np.asarray(x, dtype=float)
    measure = GaussianMeasure.standard(x.shape[0])
    y = measure.draw(rng.generator(), cfg.inner_samples, antithetic=cfg.antithetic)
    diff = (f.value(mehler_points(x, t + dt, y)) - f.value(mehler_points(x, t - dt, y))) / (2.0 * dt)
    gen = f.generator(mehler_points(x, t, y))
    n = diff.shape[0]
    lhs = summarize_mean(diff, n, rng.fingerprint)
    rhs = summarize_mean(gen, n, rng.fingerprint)
    return InequalityReport.build('heat_equation', [t], [lhs], [rhs], LE, [judge_equal(lhs, rhs)], dt=dt)


def contraction_check(f: SmoothFunction, t: float, measure: GaussianMeasure, cfg: MehlerConfig,
                      rng: RngStream) -> InequalityReport:
    """
    ||P_t f||_2 <= ||f||_2.

    ||P_t f||_2^2 uses the unbiased pairwise estimate of (P_t f(x))^2 from the
    inner draws; both norms share the outer points.
    """
    f = as_function(f)
    t = check_time(t)
    gen = rng.generator()
    m = cfg.outer_samples
    K = cfg.inner_samples
    x = measure.draw(gen, m)
    sq = np.empty(m)
    chunk = max(1, 2_000_000 // (K * measure.dim))
    for start in range(0, m, chunk):
        xc = x[start:start + chunk]
        y = measure.transform(gen.standard_normal((xc.shape[0], K, measure.noise_dim)))
        vals = f.value(mehler_points(xc[:, None, :], t, y))
        mean = vals.mean(axis=1)
        sq[start:start + chunk] = (K * mean ** 2 - (vals ** 2).mean(axis=1)) / (K - 1)
    batches = cfg.batches if m % cfg.batches == 0 else m
    pt_sq = summarize_mean(sq, batches, rng.fingerprint)
    f_sq = summarize_mean(f.value(x) ** 2, batches, rng.fingerprint)
    lhs = _sqrt_estimate(pt_sq)
    rhs = _sqrt_estimate(f_sq)
    return InequalityReport.build('l2_contraction', [t], [lhs], [rhs], LE)


def _sqrt_estimate(est: EstimateWithCI) -> EstimateWithCI:
    value = np.sqrt(max(est.value, 0.0))
    se = est.stderr / (2.0 * value) if value > 0 else np.sqrt(est.stderr)
    return EstimateWithCI(float(value), float(se), est.n_samples, est.n_batches, est.seed_fingerprint)
