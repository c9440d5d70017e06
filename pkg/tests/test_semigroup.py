import numpy as np
import pytest

from criteria.report import HOLDS, VIOLATED
from gaussian.functions import CoordinateMax, FreeEnergy, HermiteProduct, Linear, Quadratic
from gaussian.measure import GaussianMeasure
from gaussian.quadrature import decay_quantities
from gaussian.rng import stream_from_seed
from semigroup.curves import KIND_GAMMA2, KIND_HESSIAN, KIND_I, KIND_K, DecayCurve
from semigroup.decay import (
    corrected_square,
    direct_variance,
    gamma2_integral_curve,
    gamma_curves,
    hessian_square_terms,
    i_curve,
    i_r_curve,
    integrate_variance,
    normalization_report,
    variance_dynamical,
)
from semigroup.grid import TimeGrid
from semigroup.integrate import exp_trapezoid
from semigroup.mehler import MehlerConfig, mehler_apply, pt_gradient, pt_hessian
from semigroup.properties import contraction_check, heat_equation_check, hermite_decay_check
from stats.estimate import TAIL_DOMINATED, EstimatorConfig
from utils.errors import DomainError, GridMismatchError, PreconditionError


def test_geometric_grid():
    grid = TimeGrid.geometric(t_max=5.0, points=8)
    assert len(grid) == 8
    assert grid.points[0] == 0.0
    assert np.isclose(grid.points[-1], 5.0)
    assert grid.tail_T == 5.0


@pytest.mark.parametrize('points', [[0.0, 1.0, 1.0], [-0.1, 1.0], []])
def test_bad_grids(points):
    with pytest.raises(DomainError):
        TimeGrid.from_points(points) if points else TimeGrid(tuple(), 1.0)


def test_grid_lookup_and_truncation():
    grid = TimeGrid.from_spec({'kind': 'explicit', 'points': [0.0, 0.5, 1.0, 2.0]})
    assert grid.index_of(1.0) == 2
    with pytest.raises(DomainError):
        grid.index_of(0.7)
    assert grid.truncated(1.0).points == (0.0, 0.5, 1.0)
    with pytest.raises(GridMismatchError):
        grid.require_same(TimeGrid.uniform(2.0, 4))


def test_exp_trapezoid_is_exact_for_exponentials():
    t = np.linspace(0.0, 3.0, 7)
    q, w = exp_trapezoid(t, 2.0 * np.exp(-3.0 * t))
    assert np.isclose(q, 2.0 / 3.0 * (1.0 - np.exp(-9.0)), rtol=1e-12)
    assert np.isclose(w.sum(), 3.0)
    assert exp_trapezoid([0.0, 1.0], [1.0, 0.0])[0] == 0.5


def test_corrected_square_of_constant_inner_values():
    samples = np.tile(np.array([3.0, 4.0]), (5, 8, 1))
    raw, cor = corrected_square(samples)
    assert np.allclose(raw, 25.0)
    assert np.allclose(cor, 25.0)


@pytest.mark.parametrize('shape', [
    (3, 6, 5),
    pytest.param((2, 64, 32), marks=pytest.mark.slow),
])
def test_pairwise_hessian_algorithm_matches_dense(shape):
    f = FreeEnergy(1.1)
    pts = np.random.default_rng(1).standard_normal(shape)
    dense = hessian_square_terms(f, pts, 'dense')
    pairwise = hessian_square_terms(f, pts, 'pairwise')
    errMsg = "Gram-matrix Hessian norms differ from dense ones"
    assert np.allclose(dense[0], pairwise[0]) and np.allclose(dense[1], pairwise[1]), errMsg
    with pytest.raises(DomainError):
        hessian_square_terms(Linear(np.ones(shape[-1])), pts, 'pairwise')


def test_mehler_apply_linear(small_mehler):
    a = np.array([1.0, -1.0, 2.0])
    x = np.array([0.3, 0.4, -0.5])
    measure = GaussianMeasure.standard(3)
    f = Linear(a)
    at_zero = mehler_apply(f, 0.0, x, measure, small_mehler, stream_from_seed(1))
    assert np.isclose(at_zero.value, f.value(x)) and at_zero.stderr == 0.0
    est = mehler_apply(f, 0.7, x, measure, small_mehler, stream_from_seed(1))
    assert abs(est.value - np.exp(-0.7) * a @ x) < 5 * est.stderr
    with pytest.raises(DomainError):
        mehler_apply(f, -1.0, x, measure, small_mehler, stream_from_seed(1))


def test_semigroup_derivatives_commute():
    cfg = MehlerConfig(inner_samples=64, outer_samples=64, antithetic=True)
    x = np.array([0.5, -1.0])
    measure = GaussianMeasure.standard(2)
    q = Quadratic.cross(2, 0, 1)
    g = pt_gradient(0.4, x, q, measure, cfg, stream_from_seed(2))
    # antithetic pairs cancel the noise of a linear gradient exactly
    assert np.allclose(g.value, np.exp(-0.8) * np.array([x[1], x[0]]))
    h = pt_hessian(0.4, x, q, measure, cfg, stream_from_seed(2))
    assert np.allclose(h.value, np.exp(-0.8) * q.A)


def test_i_curve_of_linear_function_is_exact(short_grid, small_mehler):
    a = np.ones(4) / 2.0
    curve = i_curve(Linear(a), GaussianMeasure.standard(4), short_grid, small_mehler, stream_from_seed(3))
    assert curve.kind == KIND_I
    assert np.allclose(curve.estimates, np.exp(-2.0 * curve.t), rtol=1e-10)
    var = integrate_variance(curve)
    errMsg = "Var = 2 * integral of I fails for an exponential curve"
    assert np.isclose(var.value, 1.0, rtol=1e-10), errMsg
    assert not var.has_flag(TAIL_DOMINATED)


def test_i_curve_of_free_energy_is_nonincreasing(small_mehler):
    grid = TimeGrid.geometric(t_max=4.0, points=12)
    curve = i_curve(FreeEnergy(1.0), GaussianMeasure.standard(6), grid, small_mehler, stream_from_seed(13))
    values, se = curve.estimates, curve.stderrs
    errMsg = "I(t) increased between grid points beyond the Monte Carlo error"
    for k in range(len(grid) - 1):
        assert values[k + 1] <= values[k] + 5 * np.hypot(se[k], se[k + 1]), errMsg
    assert values[-1] < values[0], errMsg


def test_gamma2_curve_of_linear_function_equals_i(short_grid, small_mehler):
    # Hess f = 0, so Gamma_2(P_t f) = Gamma(P_t f) = e^{-2t}|a|^2
    curve = gamma2_integral_curve(Linear(np.array([0.6, 0.8])), GaussianMeasure.standard(2), short_grid,
                                  small_mehler, stream_from_seed(3))
    assert curve.kind == KIND_GAMMA2
    assert np.allclose(curve.estimates, np.exp(-2.0 * curve.t), rtol=1e-10)


def test_short_horizon_is_tail_dominated(small_mehler):
    grid = TimeGrid.uniform(0.5, 6)
    var = variance_dynamical(Linear(np.ones(2)), GaussianMeasure.standard(2), small_mehler,
                             stream_from_seed(4), grid)
    assert np.isclose(var.value, 2.0, rtol=1e-10)
    assert var.has_flag(TAIL_DOMINATED)


def test_variance_quadrature_integrates_to_tail_horizon():
    grid = TimeGrid.from_points([0.0, 0.5, 1.0], tail_T=4.0)
    curve = DecayCurve.from_function(grid, lambda t: np.exp(-2.0 * t))
    var = integrate_variance(curve)
    errMsg = "quadrature ignored the grid's tail horizon"
    assert np.isclose(var.value, 1.0, rtol=1e-10), errMsg
    assert not var.has_flag(TAIL_DOMINATED), errMsg
    short = integrate_variance(DecayCurve.from_function(TimeGrid.from_points([0.0, 0.5, 1.0]),
                                                        lambda t: np.exp(-2.0 * t)))
    assert np.isclose(short.value, 1.0, rtol=1e-10)
    assert short.has_flag(TAIL_DOMINATED)


def test_gamma_curves_of_product_match_quadrature(short_grid, small_mehler):
    f = Quadratic.cross(2, 0, 1)
    curves = gamma_curves(f, GaussianMeasure.standard(2), short_grid, small_mehler, stream_from_seed(5))
    assert set(curves) == {KIND_I, KIND_HESSIAN, KIND_GAMMA2}
    # the Hessian is constant, so its curve carries no Monte Carlo noise
    assert np.allclose(curves[KIND_HESSIAN].estimates, 2.0 * np.exp(-4.0 * short_grid.array))
    exact = np.array([decay_quantities(f, t, 2, order=8, inner_order=8)['I'] for t in short_grid.points])
    z = np.abs(curves[KIND_I].estimates - exact) / np.maximum(curves[KIND_I].stderrs, 1e-15)
    errMsg = "nested I curve is more than 5 standard errors from quadrature"
    assert np.all(z < 5), errMsg
    gamma2 = curves[KIND_GAMMA2].estimates
    assert np.allclose(gamma2, curves[KIND_I].estimates + curves[KIND_HESSIAN].estimates)


def test_i_r_curve_preconditions(short_grid, small_mehler):
    M = np.array([[1.0, -0.5], [-0.5, 1.0]])
    with pytest.raises(PreconditionError):
        i_r_curve(1.0, M, 1, short_grid, small_mehler, stream_from_seed(6))
    with pytest.raises(PreconditionError):
        i_r_curve(1.0, np.eye(2), 0, short_grid, small_mehler, stream_from_seed(6))
    with pytest.raises(DomainError):
        i_r_curve(1.0, np.eye(2), 1, short_grid, small_mehler, stream_from_seed(6), normalization='other')


def test_normalization_report_singles_out_gamma(small_mehler, small_estimator):
    grid = TimeGrid.geometric(t_max=8.0, points=16)
    f = Linear(np.ones(3) / np.sqrt(3.0))
    report = normalization_report(f, GaussianMeasure.standard(3), grid, small_mehler, small_estimator,
                                  stream_from_seed(7))
    norms = report['normalizations']
    assert np.isclose(norms['gamma']['variance']['value'], 1.0, rtol=1e-6)
    assert np.isclose(norms['factor2']['variance']['value'], 2.0, rtol=1e-6)
    assert not norms['factor2']['satisfies_identity']


@pytest.mark.parametrize('f, n', [
    (FreeEnergy(0.7), 4),
    pytest.param(FreeEnergy(0.5), 16, marks=pytest.mark.slow),
    pytest.param(CoordinateMax(), 8, marks=pytest.mark.slow),
])
def test_dynamical_and_direct_variance_agree(f, n, small_mehler, small_estimator):
    grid = TimeGrid.geometric(t_max=6.0, points=16)
    measure = GaussianMeasure.standard(n)
    direct = direct_variance(f, measure, small_estimator, stream_from_seed(8))
    dyn = variance_dynamical(f, measure, small_mehler, stream_from_seed(9), grid)
    errMsg = "dynamical variance far from direct variance"
    assert abs(dyn.value - direct.value) < 5 * np.hypot(dyn.stderr, direct.stderr) + 0.02 * direct.value, errMsg


def test_decay_curve_rescalings(short_grid):
    curve = DecayCurve.from_function(short_grid, lambda t: np.exp(-2.0 * t))
    k = curve.to_k()
    assert k.kind == KIND_K
    assert np.allclose(k.estimates, 1.0)
    with pytest.raises(DomainError):
        k.to_k()
    rows = curve.csv_rows()
    assert rows[0] == {'t': 0.0, 'estimate': 1.0, 'stderr': 0.0, 'kind': 'I', 'r': ''}


def test_first_degree_hermite_decay_is_exact_with_antithetic_pairs():
    cfg = MehlerConfig(inner_samples=16, outer_samples=16, antithetic=True)
    report = hermite_decay_check(HermiteProduct(0), np.array([0.8, -0.2]), [0.1, 1.0, 3.0], cfg,
                                 stream_from_seed(10))
    assert report.verdicts == (HOLDS, HOLDS, HOLDS)


@pytest.mark.parametrize('h', [HermiteProduct(0, 2), HermiteProduct(2, 2)])
def test_second_degree_hermite_decay(h):
    cfg = MehlerConfig(inner_samples=8192, outer_samples=16, antithetic=True)
    times = [0.1, 0.5, 1.0, 2.0]
    report = hermite_decay_check(h, np.array([0.8, -0.2, 1.3]), times, cfg, stream_from_seed(14))
    assert report.name == 'hermite_decay_deg2'
    errMsg = "P_t h(x) is not e^{-2t} h(x) for a degree-2 Hermite function"
    for t, lhs, rhs in zip(times, report.lhs, report.rhs):
        assert np.isclose(rhs.value, np.exp(-2.0 * t) * h.value(np.array([[0.8, -0.2, 1.3]]))[0])
        assert abs(lhs.value - rhs.value) <= 5 * lhs.stderr + 1e-12, errMsg


def test_heat_equation_and_contraction(small_mehler):
    cfg = MehlerConfig(inner_samples=4096, outer_samples=256, antithetic=True)
    heat = heat_equation_check(Linear(np.array([1.0, 2.0])), 0.5, np.array([0.4, -0.3]), cfg,
                               stream_from_seed(11))
    assert heat.verdicts[0] != VIOLATED
    with pytest.raises(DomainError):
        heat_equation_check(Linear(np.ones(2)), 0.001, np.zeros(2), cfg, stream_from_seed(11))
    contraction = contraction_check(FreeEnergy(1.0), 0.5, GaussianMeasure.standard(3), small_mehler,
                                    stream_from_seed(12))
    assert not contraction.violated
    assert contraction.lhs[0].value <= contraction.rhs[0].value + 5 * contraction.rhs[0].stderr
