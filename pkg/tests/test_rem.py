import numpy as np
import pytest
from scipy.special import logsumexp

from gaussian.functions import FreeEnergy
from gaussian.measure import GaussianMeasure
from gaussian.rng import stream_from_seed
from models.rem import (
    HIGH_TEMP_BETA_MAX,
    LOW_TEMP_BETA_MIN,
    N_COORDINATES,
    REM_2N_SCALED,
    REMInstance,
    gibbs_free_energy,
    rem_chatterjee_low_temp_bound,
    rem_envelope_bound,
    rem_free_energy_sampler,
    rem_high_temp_bound,
    rem_hypercontractive_audit,
    rem_i_curve,
    rem_low_temp_bound_estimate,
    rem_low_temp_envelope,
)
from semigroup.decay import i_curve
from semigroup.grid import TimeGrid
from semigroup.mehler import MehlerConfig
from stats.estimate import INCONCLUSIVE, EstimatorConfig
from stats.estimators import mc_variance
from utils.errors import DomainError, RegimeError


def test_high_temperature_bound_value():
    assert np.isclose(rem_high_temp_bound(100, 0.3), 0.91 / 0.82 / 100)
    assert np.isclose(rem_high_temp_bound(100, 0.3), 0.0110976, rtol=1e-5)


@pytest.mark.parametrize('beta', [HIGH_TEMP_BETA_MAX, 0.7, 2.0])
def test_high_temperature_regime(beta):
    with pytest.raises(RegimeError):
        rem_high_temp_bound(10, beta)


def test_envelope_bound_closed_form():
    beta, n = 0.5, 10
    c = 2 * beta ** 2
    assert np.isclose(rem_envelope_bound(n, beta).value, np.expm1(c) / (c * n))


def test_chatterjee_low_temperature_bound_value():
    n, beta, gamma = 6, 2.0, 0.5
    T = np.log(4.0)
    it = n * 2.0 ** -n * np.exp(gamma * n) * np.exp(-2 * T)
    expected = 2 * T / (1 - np.exp(-2 * T)) * (n - it) / np.log(n / it)
    assert np.isclose(rem_chatterjee_low_temp_bound(n, beta).value, expected, rtol=1e-12)
    assert np.isclose(expected, 4.426, rtol=1e-3)


def test_chatterjee_low_temperature_bound_is_uniform_in_n():
    beta, gamma = 2.0, 0.5
    T = 0.5 * np.log(2 * beta ** 2 / gamma)
    ceiling = 2 * T / ((1 - np.exp(-2 * T)) * (np.log(2.0) - gamma))
    values = [rem_chatterjee_low_temp_bound(n, beta, gamma).value for n in (4, 8, 16, 32, 64, 128)]
    errMsg = "the low-temperature bound must not grow with n"
    assert max(values) <= ceiling, errMsg


def test_chatterjee_low_temperature_regime():
    with pytest.raises(RegimeError):
        rem_chatterjee_low_temp_bound(8, LOW_TEMP_BETA_MIN)
    with pytest.raises(DomainError):
        rem_chatterjee_low_temp_bound(8, 2.0, 0.0)


def test_low_temperature_envelope_clamps():
    assert rem_low_temp_envelope(4, 1.0, 0.1) == pytest.approx(4 * 2.0 ** -4 * np.exp(0.4) * np.exp(-2.0))
    # gamma above log 2 lets the envelope exceed e^{-2T} n
    assert rem_low_temp_envelope(40, 1.0, 1.0) == pytest.approx(40 * np.exp(-2.0))


def test_instance_validation_and_free_energy():
    rng = stream_from_seed(1)
    direct = REMInstance.draw(5, 1.5, rng, N_COORDINATES)
    assert direct.energies.shape == (5,)
    assert np.isclose(gibbs_free_energy(direct), FreeEnergy(1.5).value(direct.energies))
    scaled = REMInstance.draw(4, 0.8, rng)
    assert scaled.energies.shape == (16,)
    expected = logsumexp(0.8 * 2.0 * scaled.energies) / 0.8
    assert np.isclose(gibbs_free_energy(scaled), expected)
    with pytest.raises(DomainError):
        REMInstance(3, np.zeros(3), 1.0, REM_2N_SCALED)
    with pytest.raises(DomainError):
        REMInstance(3, np.array([0.0, np.inf, 1.0]), 1.0, N_COORDINATES)
    with pytest.raises(DomainError):
        gibbs_free_energy(object())


def test_free_energy_sampler_is_reproducible():
    sampler = rem_free_energy_sampler(20, 1.0)
    a = sampler(stream_from_seed(2), 100)
    b = sampler(stream_from_seed(2), 100)
    assert np.array_equal(a, b)
    assert a.shape == (100,)


@pytest.mark.slow
def test_high_temperature_bound_dominates_monte_carlo_variance():
    n, beta = 32, 0.3
    var = mc_variance(rem_free_energy_sampler(n, beta), EstimatorConfig(samples=8192, batches=32),
                      stream_from_seed(3))
    errMsg = "Monte Carlo variance exceeds the high-temperature bound"
    assert var.value <= rem_high_temp_bound(n, beta) + 3 * var.stderr, errMsg
    assert var.value <= rem_envelope_bound(n, beta).value + 3 * var.stderr


def test_low_temperature_estimate():
    cfg = EstimatorConfig(samples=1024, batches=16)
    bound = rem_low_temp_bound_estimate(16, 2.0, cfg, stream_from_seed(4))
    assert np.isfinite(bound.value)
    assert not bound.has_flag(INCONCLUSIVE)
    assert bound.value > 1.0 / 16
    with pytest.raises(DomainError):
        rem_low_temp_bound_estimate(2, 2.0, cfg, stream_from_seed(4))


def test_hypercontractive_audit():
    cfg = EstimatorConfig(samples=1024, batches=16)
    audit = rem_hypercontractive_audit(8, 2.0, cfg, stream_from_seed(5), s_grid=np.linspace(0.0, 8.0, 401))
    result = audit['result']
    assert audit['report'].name == 'rem_hypercontractive'
    assert result.integral.value <= result.l2 ** 2 / 4.0 * (1 + 1e-4)
    assert result.l1 > 0


def test_scaled_i_curve_is_n_times_rescaled_free_energy():
    n, beta = 3, 0.6
    grid = TimeGrid.geometric(t_max=3.0, points=6)
    cfg = MehlerConfig(inner_samples=8, outer_samples=64, batches=8, max_outer_samples=64)
    scaled = rem_i_curve(n, beta, grid, cfg, stream_from_seed(6))
    plain = i_curve(FreeEnergy(beta * np.sqrt(n)), GaussianMeasure.standard(2 ** n), grid, cfg,
                    stream_from_seed(6))
    assert np.allclose(scaled.estimates, n * plain.estimates)
    assert np.allclose(scaled.stderrs, n * plain.stderrs)
