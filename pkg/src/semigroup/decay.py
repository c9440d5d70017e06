"""
Decay curves of the semigroup by nested Monte Carlo.

For an outer point x and inner draws y_1..y_K, the inner average of
grad f(x e^{-t} + sqrt(1 - e^{-2t}) y_k) estimates P_t(grad f)(x). Its
squared norm is biased upward by the inner variance over K; every squared
quantity below is reported both raw and with the unbiased pairwise
correction (K |mean|^2 - mean |g_k|^2) / (K - 1).

All grid times reuse the same outer and inner draws, so a curve is smooth
in t and pointwise comparisons between curves are paired.
"""

import logging
from typing import Dict, Optional, Union

import numpy as np

from gaussian.functions import SmoothFunction
from gaussian.measure import GaussianMeasure
from gaussian.rng import RngStream
from semigroup.curves import (
    KIND_GAMMA2,
    KIND_HESSIAN,
    KIND_I,
    KIND_I_R,
    DecayCurve,
)
from semigroup.grid import TimeGrid
from semigroup.integrate import exp_trapezoid
from semigroup.mehler import MehlerConfig, as_function, mehler_weights
from stats.estimate import (
    TAIL_DOMINATED,
    EstimateWithCI,
    EstimatorConfig,
)
from stats.estimators import mc_columns, mc_variance
from utils.errors import DomainError, PreconditionError, ShapeError

logger = logging.getLogger(__name__)

NORMALIZATION_GAMMA = 'gamma'
NORMALIZATION_FACTOR2 = 'factor2'
NORMALIZATIONS = (NORMALIZATION_GAMMA, NORMALIZATION_FACTOR2)

# Floats held by one chunk of nested draws
CHUNK_BUDGET = 2_000_000
TAIL_WARNING_FRACTION = 0.10


def _chunk_size(per_point: int) -> int:
    return max(1, CHUNK_BUDGET // max(per_point, 1))


def _inner_noise(gen: np.random.Generator, m: int, cfg: MehlerConfig, width: int) -> np.ndarray:
    if cfg.antithetic:
        half = gen.standard_normal((m, cfg.inner_samples // 2, width))
        return np.concatenate([half, -half], axis=1)
    return gen.standard_normal((m, cfg.inner_samples, width))


def _pairs(values: np.ndarray, antithetic: bool) -> np.ndarray:
    """Average antithetic partners along the inner axis (axis 1)."""
    if not antithetic:
        return values
    half = values.shape[1] // 2
    return 0.5 * (values[:, :half] + values[:, half:])


def _project_vectors(g: np.ndarray, factor: Optional[np.ndarray]) -> np.ndarray:
    # |g F|^2 = g^T M g
    return g if factor is None else g @ factor


def _project_matrices(h: np.ndarray, factor: Optional[np.ndarray]) -> np.ndarray:
    # ||F^T H F||_F^2 = tr((M H)^2)
    return h if factor is None else np.einsum('ia,...ij,jb->...ab', factor, h, factor)


def corrected_square(samples: np.ndarray):
    """
    Raw and unbiased squared norm of the mean over axis 1.

    Args:
        samples: Array (m, K, ...) of K i.i.d. inner values per outer point

    Returns:
        Tuple (raw, corrected), each of shape (m,)
    """
    K = samples.shape[1]
    flat = samples.reshape(samples.shape[0], K, -1)
    mean = flat.mean(axis=1)
    raw = np.sum(mean * mean, axis=-1)
    mean_sq = np.sum(flat * flat, axis=-1).mean(axis=1)
    return raw, (K * raw - mean_sq) / (K - 1)


def softmax_gram(weights: np.ndarray, beta: float) -> np.ndarray:
    """
    Frobenius inner products <H_k, H_l> of softmax Hessians H = beta (diag p - p p^T).

    With G = P P^T and A = P (P∘P)^T, <H_k, H_l> = beta^2 (G - A - A^T + G∘G)_kl,
    which costs O(K^2 n) instead of O(K n^2).

    Args:
        weights: Softmax weights of shape (m, K, n)
        beta: Inverse temperature
    """
    G = weights @ np.swapaxes(weights, -1, -2)
    A = weights @ np.swapaxes(weights * weights, -1, -2)
    return beta ** 2 * (G - A - np.swapaxes(A, -1, -2) + G * G)


def hessian_square_terms(f: SmoothFunction, points: np.ndarray, algorithm: str = 'dense',
                         antithetic: bool = False, factor: Optional[np.ndarray] = None):
    """
    Raw and corrected ||mean_k Hess f(z_k)||_F^2 for inner points z of shape (m, K, n).

    ``dense`` averages full Hessians; ``pairwise`` works from the Gram matrix of
    the softmax Hessians and needs a factored f under the standard measure.
    Both return the same numbers up to rounding.
    """
    if algorithm == 'dense':
        hess = _project_matrices(f.hessian(points), factor)
        return corrected_square(_pairs(hess, antithetic))
    if algorithm != 'pairwise':
        raise DomainError(f"unknown Hessian algorithm: {algorithm}")
    if not f.factored or factor is not None:
        raise DomainError("the pairwise algorithm needs f_beta under the standard measure")
    gram = softmax_gram(f.gradient(points), f.beta)
    if antithetic:
        m, K = gram.shape[0], gram.shape[1]
        h = K // 2
        gram = gram.reshape(m, 2, h, 2, h).sum(axis=(1, 3)) / 4.0
    K = gram.shape[1]
    raw = gram.sum(axis=(1, 2)) / K ** 2
    mean_sq = np.trace(gram, axis1=1, axis2=2) / K
    return raw, (K * raw - mean_sq) / (K - 1)


def choose_algorithm(f: SmoothFunction, measure: GaussianMeasure, cfg: MehlerConfig,
                     algorithm: str = 'auto') -> str:
    if algorithm != 'auto':
        return algorithm
    if f.factored and measure.is_standard and measure.dim > cfg.inner_samples:
        return 'pairwise'
    return 'dense'


def _gamma_sampler(f: SmoothFunction, measure: GaussianMeasure, times: np.ndarray, cfg: MehlerConfig,
                   with_hessian: bool, algorithm: str):
    """Rows [I, I_raw, (H, H_raw, Gamma2, Gamma2_raw)] x grid for each outer draw."""
    G = len(times)
    K = cfg.inner_samples
    n = measure.dim
    factor = measure.factor
    per_point = K * n * (n if with_hessian and algorithm == 'dense' else max(K // n, 1) + 1)
    chunk = _chunk_size(per_point)
    blocks = 6 if with_hessian else 2

    def sampler(rng: RngStream, size: int) -> np.ndarray:
        gen = rng.generator()
        out = np.empty((size, blocks * G))
        for start in range(0, size, chunk):
            m = min(chunk, size - start)
            x = measure.transform(gen.standard_normal((m, measure.noise_dim)))
            y = measure.transform(_inner_noise(gen, m, cfg, measure.noise_dim))
            rows = out[start:start + m]
            for j, t in enumerate(times):
                if t == 0:
                    g = _project_vectors(f.gradient(x), factor)
                    i_raw = i_cor = np.sum(g * g, axis=-1)
                    if with_hessian:
                        h = _project_matrices(f.hessian(x), factor)
                        h_raw = h_cor = np.sum(h * h, axis=(-2, -1))
                else:
                    a, b = mehler_weights(t)
                    pts = a * x[:, None, :] + b * y
                    grads = _pairs(_project_vectors(f.gradient(pts), factor), cfg.antithetic)
                    i_raw, i_cor = corrected_square(grads)
                    i_raw, i_cor = np.exp(-2.0 * t) * i_raw, np.exp(-2.0 * t) * i_cor
                    if with_hessian:
                        h_raw, h_cor = hessian_square_terms(f, pts, algorithm, cfg.antithetic, factor)
                        h_raw, h_cor = np.exp(-4.0 * t) * h_raw, np.exp(-4.0 * t) * h_cor
                rows[:, j] = i_cor
                rows[:, G + j] = i_raw
                if with_hessian:
                    rows[:, 2 * G + j] = h_cor
                    rows[:, 3 * G + j] = h_raw
                    rows[:, 4 * G + j] = i_cor + h_cor
                    rows[:, 5 * G + j] = i_raw + h_raw
        return out

    return sampler


def _curve_from_block(est, block: int, G: int, grid: TimeGrid, kind: str, meta: dict) -> DecayCurve:
    def ests(offset):
        return tuple(est[offset + j] for j in range(G))

    return DecayCurve(grid, ests(2 * block * G), kind, raw=ests((2 * block + 1) * G), meta=meta)


def gamma_curves(f: Union[SmoothFunction, float], measure: GaussianMeasure, grid: TimeGrid,
                 cfg: MehlerConfig, rng: RngStream, algorithm: str = 'auto',
                 with_hessian: bool = True) -> Dict[str, DecayCurve]:
    """
    I(t), the Hessian integral and the Gamma_2 integral of P_t f from one pass.

    I(t) = e^{-2t} E|P_t(grad f)|^2_M, Hessian(t) = e^{-4t} E||P_t(Hess f)||^2_M
    and Gamma2(t) = Hessian(t) + I(t), where the norms are taken in the metric
    of the measure's covariance (Euclidean under gamma_n). t = 0 is evaluated
    analytically at each outer point.

    Args:
        f: SmoothFunction, or the inverse temperature of f_beta
        measure: Measure of the semigroup
        grid: Time grid
        cfg: Nested sample sizes
        rng: Root stream
        algorithm: ``dense``, ``pairwise`` or ``auto``
        with_hessian: Skip the Hessian and Gamma2 curves when False

    Returns:
        Dict keyed by curve kind
    """
    f = as_function(f)
    times = grid.array
    G = len(times)
    algorithm = choose_algorithm(f, measure, cfg, algorithm) if with_hessian else 'none'
    logger.info(f"Decay curves: n={measure.dim}, grid={G} points, inner={cfg.inner_samples}, "
                f"outer={cfg.outer_samples}, hessian={algorithm}")
    sampler = _gamma_sampler(f, measure, times, cfg, with_hessian, algorithm)
    blocks = 6 if with_hessian else 2
    watch = np.zeros(blocks * G, dtype=bool)
    watch[:G] = True
    if with_hessian:
        watch[2 * G:3 * G] = True
    est = mc_columns(sampler, cfg.outer_config(), rng, kind='nested', watch=watch)
    meta = {'inner_samples': cfg.inner_samples, 'antithetic': cfg.antithetic, 'function': f.describe()}
    curves = {KIND_I: _curve_from_block(est, 0, G, grid, KIND_I, meta)}
    if with_hessian:
        meta = dict(meta, algorithm=algorithm)
        curves[KIND_HESSIAN] = _curve_from_block(est, 1, G, grid, KIND_HESSIAN, meta)
        curves[KIND_GAMMA2] = _curve_from_block(est, 2, G, grid, KIND_GAMMA2, meta)
    return curves


def i_curve(f, measure: GaussianMeasure, grid: TimeGrid, cfg: MehlerConfig,
            rng: RngStream) -> DecayCurve:
    """I(t) = integral of Gamma(P_t f); nonincreasing in t."""
    return gamma_curves(f, measure, grid, cfg, rng, with_hessian=False)[KIND_I]


def gamma2_integral_curve(f, measure: GaussianMeasure, grid: TimeGrid, cfg: MehlerConfig,
                          rng: RngStream, algorithm: str = 'auto') -> DecayCurve:
    """t -> integral of Gamma_2(P_t f)."""
    return gamma_curves(f, measure, grid, cfg, rng, algorithm)[KIND_GAMMA2]


def _check_coupling(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"covariance must be square, got {M.shape}")
    if np.any(M < 0):
        raise PreconditionError("I_r curves need an entrywise nonnegative covariance (M_ij >= 0)")
    return M


def i_r_curve(f, M: Union[np.ndarray, GaussianMeasure], r: int, grid: TimeGrid, cfg: MehlerConfig,
              rng: RngStream, normalization: str = NORMALIZATION_GAMMA) -> DecayCurve:
    """
    I_r(t) under the Gaussian measure with covariance M.

    ``gamma``: I_r(t) = e^{-2t} E[grad f^T M^{∘r} P_{2t}(grad f)], which equals
    the integral of Gamma(P_t f) for r = 1.
    ``factor2``: I_r(t) = 2 e^{-2t} E[grad f^T M^{∘r} P_t(grad f)].

    The estimator is linear in the inner average, so no bias correction applies.

    Raises:
        PreconditionError: If M has a negative entry or r < 1
    """
    f = as_function(f)
    if normalization not in NORMALIZATIONS:
        raise DomainError(f"unknown normalization: {normalization}")
    if int(r) != r or r < 1:
        raise PreconditionError(f"r must be a positive integer, got {r}")
    measure = M if isinstance(M, GaussianMeasure) else GaussianMeasure.from_covariance(M)
    cov = np.eye(measure.dim) if measure.covariance is None else measure.covariance
    Mr = _check_coupling(cov) ** int(r)
    times = grid.array
    G = len(times)
    K = cfg.inner_samples
    n = measure.dim
    chunk = _chunk_size(K * n)
    if normalization == NORMALIZATION_GAMMA:
        sem_times, prefactor = 2.0 * times, np.exp(-2.0 * times)
    else:
        sem_times, prefactor = times, 2.0 * np.exp(-2.0 * times)

    def sampler(stream: RngStream, size: int) -> np.ndarray:
        gen = stream.generator()
        out = np.empty((size, G))
        for start in range(0, size, chunk):
            m = min(chunk, size - start)
            x = measure.transform(gen.standard_normal((m, measure.noise_dim)))
            y = measure.transform(_inner_noise(gen, m, cfg, measure.noise_dim))
            d0 = f.gradient(x)
            left = d0 @ Mr
            for j, s in enumerate(sem_times):
                if s == 0:
                    avg = d0
                else:
                    a, b = mehler_weights(s)
                    avg = f.gradient(a * x[:, None, :] + b * y).mean(axis=1)
                out[start:start + m, j] = prefactor[j] * np.sum(left * avg, axis=-1)
        return out

    logger.info(f"I_{r} curve: n={n}, normalization={normalization}, grid={G} points")
    est = mc_columns(sampler, cfg.outer_config(), rng, kind='nested')
    values = tuple(est[j] for j in range(G))
    meta = {'normalization': normalization, 'inner_samples': K, 'function': f.describe()}
    return DecayCurve(grid, values, KIND_I_R, r=int(r), meta=meta)


def integrate_variance(curve: DecayCurve) -> EstimateWithCI:
    """
    2 * integral of an I curve over [0, inf).

    The grid part uses exp_trapezoid. Between the last point and the grid's
    tail_T the curve is continued as I(t_last) e^{-2(t - t_last)}; beyond
    T = tail_T the remainder is taken as e^{-2T} times the total, i.e.
    Var = Q / (1 - e^{-2T}). The estimate is flagged ``tail_dominated`` when
    that remainder exceeds 10% of the total.
    """
    t = curve.t
    if t[0] != 0:
        raise DomainError("variance quadrature needs a grid starting at t = 0")
    T = float(curve.grid.tail_T)
    if T <= 0:
        raise DomainError("variance quadrature needs a grid reaching beyond t = 0")
    q, w = exp_trapezoid(t, curve.estimates)
    gap = T - float(t[-1])
    if gap > 0:
        w_gap = -0.5 * np.expm1(-2.0 * gap)
        q += w_gap * float(curve.estimates[-1])
        w[-1] += w_gap
    q_se = float(np.sum(w * curve.stderrs))
    denom = -np.expm1(-2.0 * T)
    value = 2.0 * q / denom
    stderr = 2.0 * q_se / denom
    first = curve.values[0]
    est = EstimateWithCI(value, stderr, first.n_samples, first.n_batches, first.seed_fingerprint)
    tail = value - 2.0 * q
    if value > 0 and tail > TAIL_WARNING_FRACTION * value:
        logger.warning(f"Variance quadrature is tail dominated: tail {tail:.4g} of total {value:.4g} "
                       f"at T={T}")
        est = est.with_flag(TAIL_DOMINATED)
    return est


def variance_dynamical(f, measure: GaussianMeasure, cfg: MehlerConfig, rng: RngStream,
                       grid: Optional[TimeGrid] = None) -> EstimateWithCI:
    """Var(f) = 2 * integral of I(s) ds, from a nested I curve."""
    grid = TimeGrid.geometric() if grid is None else grid
    return integrate_variance(i_curve(f, measure, grid, cfg, rng))


def direct_variance(f, measure: GaussianMeasure, cfg: EstimatorConfig, rng: RngStream) -> EstimateWithCI:
    """Plain Monte Carlo variance of f(X), X drawn from the measure."""
    f = as_function(f)
    return mc_variance(lambda stream, size: f.value(measure.draw(stream.generator(), size)), cfg, rng)


def _agrees(a: EstimateWithCI, b: EstimateWithCI, k: float = 3.0) -> bool:
    return abs(a.value - b.value) <= k * np.hypot(a.stderr, b.stderr) + 1e-12 * max(abs(a.value), abs(b.value))


def normalization_report(f, measure: GaussianMeasure, grid: TimeGrid, cfg: MehlerConfig,
                         var_cfg: EstimatorConfig, rng: RngStream) -> dict:
    """
    Which I_1 normalization satisfies Var = 2 * integral of I_1?

    Both curves share the root stream, and the direct variance uses a
    separate derived stream.
    """
    f = as_function(f)
    direct = direct_variance(f, measure, var_cfg, rng.derive(1))
    report = {'direct_variance': direct.to_dict(), 'normalizations': {}}
    for norm in NORMALIZATIONS:
        curve = i_r_curve(f, measure, 1, grid, cfg, rng.derive(0), normalization=norm)
        dyn = integrate_variance(curve)
        ok = _agrees(dyn, direct)
        report['normalizations'][norm] = {'variance': dyn.to_dict(), 'satisfies_identity': ok}
        logger.info(f"Normalization {norm}: 2*int I_1 = {dyn.value:.6g} +/- {dyn.stderr:.2g}, "
                    f"direct {direct.value:.6g} -> {'consistent' if ok else 'inconsistent'}")
    return report
