"""
Criterion functions psi for the inverse integrated curvature condition.

The variance theorem needs the double integral
    4 ∫_0^∞ e^{-2t} ∫_t^∞ e^{2s} psi(s) ds dt = 2 ∫_0^∞ (e^{2s} - 1) psi(s) ds
to be finite. Closed forms are decided symbolically; sampled psi is decided
from its decay rate on the last grid segment.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy import integrate

from semigroup.curves import DecayCurve
from semigroup.grid import TimeGrid
from stats.estimate import TAIL_NOT_NEGLIGIBLE, EstimateWithCI
from utils.errors import DomainError, NonIntegrablePsiError

logger = logging.getLogger(__name__)

FORM_ZERO = 'zero'
FORM_EXPONENTIAL = 'exponential'
FORM_REM_ENVELOPE = 'rem_envelope'
FORM_SAMPLED = 'sampled'

TAIL_TOLERANCE = 1e-6
CONDITION = "condition (2) of the variance theorem: ∫_0^∞ e^{-2t} ∫_t^∞ e^{2s} psi(s) ds dt < ∞"


@dataclass(frozen=True)
class PsiFunction:
    """psi(t) = 0, c e^{-k t}, the REM envelope, or a sampled curve."""

    form: str
    params: Dict[str, float] = field(default_factory=dict)
    curve: Optional[DecayCurve] = None

    @classmethod
    def zero(cls) -> 'PsiFunction':
        return cls(FORM_ZERO)

    @classmethod
    def exponential(cls, c: float, rate: float) -> 'PsiFunction':
        return cls(FORM_EXPONENTIAL, {'c': float(c), 'rate': float(rate)})

    @classmethod
    def rem_envelope(cls, beta: float, n: int) -> 'PsiFunction':
        """(2 beta^2 / n) e^{-4t} exp(2 beta^2 e^{-2t}): 2 beta^2 e^{-2t} I(t) with I at its Gronwall envelope."""
        return cls(FORM_REM_ENVELOPE, {'beta': float(beta), 'n': int(n)})

    @classmethod
    def sampled(cls, curve: DecayCurve) -> 'PsiFunction':
        return cls(FORM_SAMPLED, {}, curve)

    @classmethod
    def from_i_curve(cls, curve: DecayCurve, beta: float) -> 'PsiFunction':
        """psi(t) = 2 beta^2 e^{-2t} I(t), the criterion satisfied by f_beta."""
        factors = 2.0 * beta ** 2 * np.exp(-2.0 * curve.t)
        values = tuple(e.scaled(float(c)) for e, c in zip(curve.values, factors))
        return cls.sampled(DecayCurve(curve.grid, values, curve.kind, meta={'psi': 'free_energy', 'beta': beta}))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == FORM_ZERO:
            return np.zeros_like(t)
        if self.form == FORM_EXPONENTIAL:
            return self.params['c'] * np.exp(-self.params['rate'] * t)
        if self.form == FORM_REM_ENVELOPE:
            c = 2.0 * self.params['beta'] ** 2
            return c / self.params['n'] * np.exp(-4.0 * t + c * np.exp(-2.0 * t))
        return self._interpolate(t)

    def _interpolate(self, t: np.ndarray) -> np.ndarray:
        """Log-linear interpolation on the grid, exponential extrapolation beyond it."""
        grid = self.curve.t
        vals = self.curve.estimates
        if np.all(vals > 0):
            out = np.exp(np.interp(t, grid, np.log(vals)))
            rate = self.tail_rate()
            beyond = t > grid[-1]
            out = np.where(beyond, vals[-1] * np.exp(-rate * (t - grid[-1])), out)
            return out
        return np.interp(t, grid, vals, right=0.0)

    def tail_rate(self) -> float:
        """Decay rate of a sampled psi on its last grid segment."""
        if self.form != FORM_SAMPLED:
            raise DomainError("tail rate is only defined for sampled psi")
        t = self.curve.t
        v = self.curve.estimates
        if len(t) < 2 or v[-1] <= 0 or v[-2] <= 0:
            return np.inf
        return float(-np.log(v[-1] / v[-2]) / (t[-1] - t[-2]))

    def estimates_on(self, grid: TimeGrid):
        """psi at each grid time as EstimateWithCI (exact for closed forms)."""
        if self.form == FORM_SAMPLED:
            grid.require_same(self.curve.grid)
            return self.curve.values
        return tuple(EstimateWithCI.exact(float(v)) for v in self(grid.array))

    def check_integrable(self) -> None:
        """
        Raise unless the double integral of the variance theorem is finite.

        Raises:
            NonIntegrablePsiError: Naming the failed condition
        """
        if self.form == FORM_EXPONENTIAL:
            if self.params['c'] != 0 and self.params['rate'] <= 2.0:
                raise NonIntegrablePsiError(
                    f"psi = {self.params['c']} e^(-{self.params['rate']} t) violates {CONDITION}: "
                    f"the inner integral ∫_t^∞ e^(2s) psi(s) ds diverges for decay rates <= 2")
        elif self.form == FORM_SAMPLED:
            rate = self.tail_rate()
            if rate <= 2.0:
                raise NonIntegrablePsiError(
                    f"sampled psi decays at rate {rate:.3g} <= 2 on its last segment, violating {CONDITION}")

    def describe(self) -> Dict[str, Any]:
        return {'form': self.form, **self.params}


def theorem_integral(psi: PsiFunction) -> EstimateWithCI:
    """
    4 ∫_0^∞ e^{-2t} ∫_t^∞ e^{2s} psi(s) ds dt.

    Closed forms: 4c / (k (k - 2)) for c e^{-kt}, and (e^c - 1 - c)/(c n)
    with c = 2 beta^2 for the REM envelope. A sampled psi is integrated in
    the Fubini form 2 ∫ (e^{2s} - 1) psi(s) ds with an exponential tail; the
    estimate is flagged when that tail exceeds 1e-6 of the total.

    Raises:
        NonIntegrablePsiError: If the integral diverges
    """
    psi.check_integrable()
    if psi.form == FORM_ZERO:
        return EstimateWithCI.exact(0.0)
    if psi.form == FORM_EXPONENTIAL:
        c, k = psi.params['c'], psi.params['rate']
        return EstimateWithCI.exact(0.0 if c == 0 else 4.0 * c / (k * (k - 2.0)))
    if psi.form == FORM_REM_ENVELOPE:
        c = 2.0 * psi.params['beta'] ** 2
        return EstimateWithCI.exact((np.expm1(c) - c) / (c * psi.params['n']))

    t = psi.curve.t
    vals = psi.curve.estimates
    ses = psi.curve.stderrs
    weight = np.expm1(2.0 * t)
    body = integrate.trapezoid(weight * vals, t)
    h = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    body_se = float(np.sum(w * weight * ses))
    k = psi.tail_rate()
    S = t[-1]
    tail = 0.0 if not np.isfinite(k) else max(vals[-1], 0.0) * (np.exp(2.0 * S) / (k - 2.0) - 1.0 / k)
    total = 2.0 * (body + tail)
    first = psi.curve.values[0]
    est = EstimateWithCI(total, 2.0 * body_se, first.n_samples, first.n_batches, first.seed_fingerprint)
    if total != 0 and abs(2.0 * tail / total) > TAIL_TOLERANCE:
        logger.warning(f"psi tail beyond t={S} is {2.0 * tail:.3g} of {total:.3g}; the grid is too short")
        est = est.with_flag(TAIL_NOT_NEGLIGIBLE)
    return est


def theorem_integral_quadrature(psi: PsiFunction, upper: float = 40.0) -> float:
    """The nested form of the theorem integral by adaptive quadrature, truncated at ``upper``."""
    psi.check_integrable()

    def inner(s, t):
        return 4.0 * np.exp(2.0 * (s - t)) * float(psi(s))

    value, _ = integrate.dblquad(inner, 0.0, upper, lambda t: t, lambda t: upper,
                                 epsabs=1e-13, epsrel=1e-11)
    return float(value)
