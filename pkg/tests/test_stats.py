import numpy as np
import pytest

from gaussian.functions import FreeEnergy
from gaussian.measure import GaussianMeasure
from gaussian.rng import stream_from_seed
from stats.estimate import LOW_PRECISION, ZERO_NORM, EstimateWithCI, EstimatorConfig
from stats.estimators import (
    hypercontractive_integral,
    hypercontractive_integral_from_samples,
    lp_norm,
    lp_norms_from_samples,
    mc_columns,
    mc_mean,
    mc_variance,
    summarize_mean,
    summarize_variance,
)
from utils.errors import DomainError


def normal_sampler(scale=1.0, loc=0.0):
    def sampler(stream, size):
        return loc + scale * stream.generator().standard_normal(size)
    return sampler


def test_summarize_mean_batch_error():
    est = summarize_mean(np.arange(8.0), 2)
    # batch means 1.5 and 5.5
    assert est.value == 3.5
    assert np.isclose(est.stderr, 2.0)
    assert est.n_samples == 8 and est.n_batches == 2


def test_unequal_batches_are_rejected():
    with pytest.raises(DomainError):
        summarize_mean(np.arange(10.0), 3)
    with pytest.raises(DomainError):
        summarize_variance(np.arange(4.0), 4)


def test_estimator_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(samples=100, batches=32)
    with pytest.raises(ValueError):
        EstimatorConfig(batches=1, samples=4)
    assert EstimatorConfig(samples=64, batches=8, max_samples=10).max_samples == 64


def test_mc_mean_covers_truth(small_estimator):
    est = mc_mean(normal_sampler(loc=2.0), small_estimator, stream_from_seed(3))
    errMsg = "mean estimate is more than 5 standard errors from 2"
    assert abs(est.value - 2.0) < 5 * est.stderr, errMsg
    assert est.rel_ci <= small_estimator.target_rel_ci


def test_mc_variance_covers_truth(small_estimator):
    est = mc_variance(normal_sampler(scale=2.0), small_estimator, stream_from_seed(4))
    assert abs(est.value - 4.0) < 5 * est.stderr


def test_low_precision_flag_when_budget_runs_out():
    cfg = EstimatorConfig(samples=64, batches=8, target_rel_ci=0.01, max_samples=128)
    est = mc_mean(normal_sampler(), cfg, stream_from_seed(5))
    assert est.has_flag(LOW_PRECISION)
    assert est.n_samples == 128


def test_results_do_not_depend_on_thread_count():
    base = EstimatorConfig(samples=512, batches=16, max_samples=512)
    one = mc_variance(normal_sampler(), EstimatorConfig(samples=512, batches=16, max_samples=512, threads=1),
                      stream_from_seed(6))
    four = mc_variance(normal_sampler(), EstimatorConfig(samples=512, batches=16, max_samples=512, threads=4),
                       stream_from_seed(6))
    errMsg = "thread count changed the estimate"
    assert one == four, errMsg
    assert base == EstimatorConfig(samples=512, batches=16, max_samples=512, threads=4)


def test_mc_columns_componentwise():
    def sampler(stream, size):
        z = stream.generator().standard_normal((size, 2))
        return np.column_stack([1.0 + z[:, 0], 3.0 + 0.1 * z[:, 1]])

    est = mc_columns(sampler, EstimatorConfig(samples=4096, batches=16), stream_from_seed(7))
    assert est.shape == (2,)
    assert abs(est[0].value - 1.0) < 5 * est[0].stderr
    assert abs(est[1].value - 3.0) < 5 * est[1].stderr


@pytest.mark.parametrize('beta', [0.5, 2.0])
def test_mean_gibbs_weight_is_uniform(small_estimator, beta):
    n = 5
    f = FreeEnergy(beta)
    measure = GaussianMeasure.standard(n)

    def first_weight(stream, size):
        return f.gradient(measure.draw(stream.generator(), size))[:, 0]

    est = mc_mean(first_weight, small_estimator, stream_from_seed(9))
    errMsg = "E[d_i f_beta] under gamma_n is not 1/n"
    assert abs(est.value - 1.0 / n) < 5 * est.stderr, errMsg

    cols = mc_columns(lambda stream, size: f.gradient(measure.draw(stream.generator(), size)),
                      small_estimator, stream_from_seed(10))
    assert all(abs(cols[i].value - 1.0 / n) < 5 * cols[i].stderr for i in range(n)), errMsg


def test_lp_norms_are_monotone_in_p():
    values = np.random.default_rng(8).exponential(size=4096)
    norms = [e.value for e in lp_norms_from_samples(values, [1.0, 1.25, 1.5, 2.0, 3.0], 16)]
    errMsg = "empirical L^p norms must be nondecreasing in p"
    assert all(a <= b + 1e-15 for a, b in zip(norms, norms[1:])), errMsg
    assert np.isclose(norms[0], np.mean(values))


def test_lp_norm_domain_and_zero_flag():
    cfg = EstimatorConfig(samples=64, batches=8)
    with pytest.raises(DomainError):
        lp_norm(normal_sampler(), 0.5, cfg, stream_from_seed(9))
    est = lp_norm(lambda stream, size: np.zeros(size), 2.0, cfg, stream_from_seed(9))
    assert est.value == 0.0
    assert est.has_flag(ZERO_NORM)


def test_hypercontractive_integral_of_constant():
    # ||g||_p = c for every p: the integral is c^2 (1/2 - 1/4)
    c = 1.7
    result = hypercontractive_integral(lambda p: np.full(np.shape(p), c), constant=2.0)
    assert np.isclose(result.integral.value, c ** 2 / 4.0, rtol=1e-4)
    assert np.isclose(result.comparator.value, 2.0 * c ** 2)
    assert result.l1 == result.l2 == c


def test_hypercontractive_integral_from_samples_is_below_l2_bound():
    values = np.random.default_rng(10).beta(0.5, 4.0, size=2048)
    result = hypercontractive_integral_from_samples(values, 16, s_grid=np.linspace(0.0, 10.0, 801))
    errMsg = "norms at p <= 2 cannot exceed ||g||_2"
    assert result.integral.value <= result.l2 ** 2 / 4.0 * (1 + 1e-4), errMsg
    assert result.l1 <= result.l2
    assert result.integral.stderr > 0


def test_hypercontractive_integral_needs_nonzero_l1():
    with pytest.raises(DomainError):
        hypercontractive_integral(lambda p: np.zeros(np.shape(p)))


def test_estimate_helpers():
    e = EstimateWithCI(2.0, 0.5, 10, 2, 0)
    assert e.ci() == (2.0 - 0.98, 2.0 + 0.98)
    assert e.scaled(-2.0).stderr == 1.0
    assert e.with_flag('x').with_flag('x').flags == ('x',)
    assert EstimateWithCI.exact(3.0).rel_ci == 0.0
    with pytest.raises(ValueError):
        EstimateWithCI(1.0, -1.0, 1, 1, 0)
