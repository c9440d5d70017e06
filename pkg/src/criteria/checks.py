"""Checkers and bound evaluators for the semigroup inequalities."""

import logging
from typing import Optional, Union

import numpy as np

from criteria.psi import PsiFunction, theorem_integral
from criteria.report import (
    GE,
    LE,
    VERDICT_INCONCLUSIVE,
    InequalityReport,
    add_estimates,
)
from gaussian.rng import RngStream
from semigroup.curves import DecayCurve
from semigroup.integrate import exp_trapezoid
from stats.estimate import EstimateWithCI
from utils.errors import DomainError, PreconditionError

logger = logging.getLogger(__name__)

Number = Union[float, EstimateWithCI]

# Below this log-ratio the bracket of the partial curvature bound uses its series
SERIES_CUTOFF = 1e-8


def _as_estimate(x: Number) -> EstimateWithCI:
    return x if isinstance(x, EstimateWithCI) else EstimateWithCI.exact(float(x))


def check_integrated_cd(curve_gamma2: DecayCurve, curve_gamma: DecayCurve,
                        name: str = 'integrated_cd') -> InequalityReport:
    """
    ∫Γ₂(P_t f) >= ∫Γ(P_t f) at every grid time.

    Raises:
        GridMismatchError: If the curves are sampled on different grids
    """
    curve_gamma2.grid.require_same(curve_gamma.grid)
    return InequalityReport.build(name, curve_gamma.grid.points, curve_gamma2.values,
                                  curve_gamma.values, relation=GE)


def check_ic(curve_gamma2: DecayCurve, curve_gamma: DecayCurve, psi: PsiFunction,
             name: str = 'ic') -> InequalityReport:
    """
    ∫Γ₂(P_t f) <= ∫Γ(P_t f) + psi(t) at every grid time.

    Raises:
        GridMismatchError: If the curves (or a sampled psi) use different grids
    """
    curve_gamma2.grid.require_same(curve_gamma.grid)
    psi_vals = psi.estimates_on(curve_gamma.grid)
    rhs = [add_estimates(g, p) for g, p in zip(curve_gamma.values, psi_vals)]
    return InequalityReport.build(name, curve_gamma.grid.points, curve_gamma2.values, rhs,
                                  relation=LE, psi=psi.describe())


def check_hessian_form(curve_hessian: DecayCurve, curve_gamma: DecayCurve, beta: float,
                       name: str = 'ic_hessian_form') -> InequalityReport:
    """∫||Hess P_t f_beta||^2 <= 2 beta^2 e^{-2t} ∫|grad P_t f_beta|^2, the form the IC criterion takes for f_beta."""
    curve_hessian.grid.require_same(curve_gamma.grid)
    factors = 2.0 * beta ** 2 * np.exp(-2.0 * curve_gamma.t)
    rhs = [e.scaled(float(c)) for e, c in zip(curve_gamma.values, factors)]
    return InequalityReport.build(name, curve_gamma.grid.points, curve_hessian.values, rhs,
                                  relation=LE, beta=beta)


def theorem_variance_bound(mean_grad_norm_sq: Number, psi: PsiFunction) -> EstimateWithCI:
    """
    Var(f) <= |∫grad f|^2 + 4 ∫_0^∞ e^{-2t} ∫_t^∞ e^{2s} psi(s) ds dt.

    Args:
        mean_grad_norm_sq: |∫grad f dgamma_n|^2, exact or estimated
        psi: Criterion function satisfied by f

    Raises:
        NonIntegrablePsiError: If psi fails the integrability condition
    """
    return add_estimates(_as_estimate(mean_grad_norm_sq), theorem_integral(psi))


def cel_bound(curve_i: DecayCurve, T: float) -> EstimateWithCI:
    """
    Var(f) <= 2/(1 - e^{-2T}) ∫_0^T I(t) dt.

    Raises:
        DomainError: If T is not a positive grid time
    """
    if T <= 0:
        raise DomainError(f"truncation time must be positive, got {T}")
    idx = curve_i.grid.index_of(T)
    if curve_i.t[0] != 0:
        raise DomainError("the truncated bound needs a curve starting at t = 0")
    t = curve_i.t[:idx + 1]
    q, w = exp_trapezoid(t, curve_i.estimates[:idx + 1])
    factor = 2.0 / -np.expm1(-2.0 * T)
    se = float(np.sum(w * curve_i.stderrs[:idx + 1]))
    first = curve_i.values[0]
    return EstimateWithCI(factor * q, factor * se, first.n_samples, first.n_batches, first.seed_fingerprint,
                          first.flags)


def baudoin_wang_check(curve_i: DecayCurve, T: float, name: str = 'baudoin_wang') -> InequalityReport:
    """
    I(s) <= I(0)^{1 - s/T} I(T)^{s/T} for every grid time s in [0, T].

    Every point is reported inconclusive when I(0) or I(T) is not positive.
    """
    idx = curve_i.grid.index_of(T)
    if T <= 0 or curve_i.t[0] != 0:
        raise DomainError("the log-convexity check needs 0 = t_0 < T on the grid")
    i0, iT = curve_i.values[0], curve_i.values[idx]
    points = curve_i.grid.points[:idx + 1]
    lhs = list(curve_i.values[:idx + 1])
    if i0.value <= 0 or iT.value <= 0:
        logger.warning(f"{name}: I(0)={i0.value:.3g}, I(T)={iT.value:.3g}; log-convexity cannot be judged")
        rhs = [EstimateWithCI.exact(np.nan)] * len(points)
        return InequalityReport.build(name, points, lhs, rhs, LE, [VERDICT_INCONCLUSIVE] * len(points), T=T)
    rhs = []
    for s in points:
        theta = s / T
        value = i0.value ** (1.0 - theta) * iT.value ** theta
        se = value * ((1.0 - theta) * i0.stderr / i0.value + theta * iT.stderr / iT.value)
        rhs.append(EstimateWithCI(value, se, i0.n_samples, i0.n_batches, i0.seed_fingerprint))
    return InequalityReport.build(name, points, lhs, rhs, LE, T=T)


def log_ratio_bracket(x: float) -> float:
    """(1 - e^{-x}) / x, continuously extended by 1 at x = 0."""
    if x < SERIES_CUTOFF:
        return 1.0 - x / 2.0 + x * x / 6.0
    return float(-np.expm1(-x) / x)


def partial_curvature_bound(I0: Number, IT: Number, T: float) -> EstimateWithCI:
    """
    Var(f) <= (2T I(0) / (1 - e^{-2T})) [1/log a - 1/(a log a)], a = I(0)/I(T).

    The bracket times I(0) is the logarithmic mean (I0 - IT)/log(I0/IT), so the
    bound is scale-equivariant and reduces to I(0) for exponential decay.

    Raises:
        PreconditionError: If T < 0, a value is not positive, or I(T) > I(0)
    """
    i0, iT = _as_estimate(I0), _as_estimate(IT)
    if T < 0:
        raise PreconditionError(f"interpolation time must be >= 0, got T={T}")
    if i0.value <= 0 or iT.value <= 0:
        raise PreconditionError(f"I(0) and I(T) must be positive, got {i0.value}, {iT.value}")
    if iT.value > i0.value:
        raise PreconditionError(f"a = I(0)/I(T) = {i0.value / iT.value:.6g} < 1")
    c = 1.0 if T == 0 else 2.0 * T / -np.expm1(-2.0 * T)
    x = float(np.log(i0.value / iT.value))
    value = c * i0.value * log_ratio_bracket(x)
    if x < 1e-6:
        d0 = d1 = 0.5
    else:
        mean = value / c
        d0 = (1.0 - mean / i0.value) / x
        d1 = (mean / iT.value - 1.0) / x
    se = c * (abs(d0) * i0.stderr + abs(d1) * iT.stderr)
    return EstimateWithCI(value, se, max(i0.n_samples, iT.n_samples), max(i0.n_batches, iT.n_batches),
                          i0.seed_fingerprint or iT.seed_fingerprint)


def simplex_lemma_sides(mu: np.ndarray, u: np.ndarray, v: np.ndarray):
    """
    Both sides of sum_j (∫u_j v dmu)^2 <= (∫v dmu)^2 for a discrete measure.

    Args:
        mu: Probability weights on the support, shape (m,)
        u: Values u_j(x), shape (m, n), with u >= 0 and row sums <= 1
        v: Nonnegative values v(x), shape (m,)
    """
    lhs = float(np.sum(((mu * v) @ u) ** 2))
    rhs = float(np.dot(mu, v) ** 2)
    return lhs, rhs


def simplex_smoothing_check(rng: RngStream, trials: int, max_dim: int = 20, max_support: int = 50,
                            name: str = 'simplex_lemma') -> InequalityReport:
    """
    Randomized audit of sum_j (∫u_j v dmu)^2 <= (∫v dmu)^2.

    Each trial draws a discrete measure on at most ``max_support`` points,
    u with values in the sub-simplex of R^n (n <= max_dim) and v >= 0.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    gen = rng.generator()
    lhs, rhs = [], []
    for _ in range(trials):
        m = int(gen.integers(1, max_support + 1))
        n = int(gen.integers(1, max_dim + 1))
        mu = gen.dirichlet(np.ones(m))
        # drop the slack coordinate of a Dirichlet vector: u_j >= 0, sum_j u_j <= 1
        u = gen.dirichlet(np.ones(n + 1), size=m)[:, :n]
        v = gen.exponential(size=m) * (gen.random(size=m) < 0.8)
        a, b = simplex_lemma_sides(mu, u, v)
        lhs.append(EstimateWithCI.exact(a))
        rhs.append(EstimateWithCI.exact(b))
    return InequalityReport.build(name, list(range(trials)), lhs, rhs, LE, trials=trials)


def bound_dominates(bound: EstimateWithCI, variance: EstimateWithCI, name: str,
                    label: Optional[float] = None) -> InequalityReport:
    """One-point report of variance <= bound."""
    return InequalityReport.build(name, [0.0 if label is None else label], [variance], [bound], LE)
