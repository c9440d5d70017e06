"""
Subcommand implementations.

Every command takes the validated manifest and a RunContext and returns a
CommandResult: a JSON body, CSV rows with their columns, and the inequality
reports whose verdicts decide the exit status.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

from config.config_loader import BETA_SQRT_LOG_N, ExperimentManifest
from criteria import report as report_mod
from criteria.checks import (
    baudoin_wang_check,
    bound_dominates,
    cel_bound,
    check_hessian_form,
    check_ic,
    check_integrated_cd,
    partial_curvature_bound,
    simplex_smoothing_check,
)
from criteria.psi import PsiFunction
from criteria.report import LE, InequalityReport, judge, judge_equal
from gaussian.functions import (
    CoordinateMax,
    FreeEnergy,
    HermiteProduct,
    Linear,
    Quadratic,
    SmoothFunction,
)
from gaussian.measure import GaussianMeasure
from gaussian.rng import RngStream
from models.poincare import poincare_audit
from models.rem import (
    N_COORDINATES,
    REM_2N_SCALED,
    rem_chatterjee_low_temp_bound,
    rem_envelope_bound,
    rem_free_energy_sampler,
    rem_high_temp_bound,
    rem_low_temp_bound_estimate,
)
from models.sk import (
    ground_state_relation,
    sk_chatterjee_ir_bound,
    sk_disorder_sampler,
    sk_logn_bound,
    sk_variance_bound,
)
from models.spins import sk_factor
from semigroup import curves as curve_mod
from semigroup.decay import (
    NORMALIZATION_GAMMA,
    direct_variance,
    gamma_curves,
    i_curve,
    i_r_curve,
    variance_dynamical,
)
from semigroup.grid import TimeGrid
from semigroup.mehler import MehlerConfig
from semigroup.properties import contraction_check, heat_equation_check, hermite_decay_check
from stats.estimate import EstimateWithCI, EstimatorConfig
from stats.estimators import mc_variance
from utils.errors import ManifestError

logger = logging.getLogger(__name__)

BOUNDS_COLUMNS = ('n', 'mc_var', 'mc_se', 'bound', 'slack')
VARIANCE_COLUMNS = ('n', 'direct_var', 'direct_se', 'dynamical_var', 'dynamical_se', 'poincare_bound',
                    'poincare_se', 'var_log_n', 'identity_verdict', 'poincare_verdict')
PROPERTY_TIMES = (0.1, 0.5, 1.0, 2.0)


@dataclass
class RunContext:
    rng: RngStream
    estimator: EstimatorConfig
    mehler: MehlerConfig
    grid: TimeGrid


@dataclass
class CommandResult:
    body: Dict[str, Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    columns: Tuple[str, ...] = report_mod.CSV_COLUMNS
    reports: List[InequalityReport] = field(default_factory=list)

    @property
    def violated(self) -> bool:
        return any(r.violated for r in self.reports)


def _require_param(params: Dict[str, Any], key: str, command: str) -> Any:
    if key not in params:
        raise ManifestError(f'params.{key}', f"is required by {command}")
    return params[key]


def build_target(params: Dict[str, Any], command: str) -> Tuple[SmoothFunction, GaussianMeasure]:
    """The test function and measure named by ``function``/``model``, ``n`` and ``beta``."""
    n = int(_require_param(params, 'n', command))
    beta = float(params.get('beta', 0.5))
    if params.get('model') == 'sk':
        return FreeEnergy(beta), GaussianMeasure.from_factor(sk_factor(n))
    function = params.get('function', 'rem')
    measure = GaussianMeasure.standard(n)
    if function == 'rem':
        return FreeEnergy(beta), measure
    if function == 'max':
        return CoordinateMax(), measure
    if function == 'linear':
        return Linear(np.ones(n) / np.sqrt(n)), measure
    if n < 2:
        raise ManifestError('params.n', "the quadratic test function x_0 x_1 needs n >= 2")
    return Quadratic.cross(n, 0, 1), measure


def grid_with(grid: TimeGrid, times: Sequence[float]) -> TimeGrid:
    """The grid with every time in ``times`` added as a point."""
    points = sorted(set(grid.points) | {float(t) for t in times})
    return TimeGrid.from_points(points, max(grid.tail_T, points[-1]))


def _report_rows(reports: Sequence[InequalityReport]) -> List[Dict[str, Any]]:
    return [row for r in reports for row in r.csv_rows()]


def ic_check(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """IC(1, psi) for f_beta with psi = 2 beta^2 e^{-2t} I(t), plus its Hessian form."""
    params = manifest.params
    if params.get('model', 'rem') != 'rem':
        raise ManifestError('params.model', "ic-check is stated for the rem free energy under gamma_n")
    n = int(_require_param(params, 'n', manifest.command))
    beta = float(_require_param(params, 'beta', manifest.command))
    curves = gamma_curves(FreeEnergy(beta), GaussianMeasure.standard(n), ctx.grid, ctx.mehler, ctx.rng)
    psi = PsiFunction.from_i_curve(curves[curve_mod.KIND_I], beta)
    reports = [
        check_ic(curves[curve_mod.KIND_GAMMA2], curves[curve_mod.KIND_I], psi),
        check_hessian_form(curves[curve_mod.KIND_HESSIAN], curves[curve_mod.KIND_I], beta),
    ]
    body = {'reports': reports, 'curves': curves}
    return CommandResult(body, _report_rows(reports), reports=reports)


def cd_check(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """Integrated CD(1, inf): ∫Γ₂(P_t f) >= ∫Γ(P_t f)."""
    f, measure = build_target(manifest.params, manifest.command)
    curves = gamma_curves(f, measure, ctx.grid, ctx.mehler, ctx.rng)
    reports = [check_integrated_cd(curves[curve_mod.KIND_GAMMA2], curves[curve_mod.KIND_I])]
    return CommandResult({'reports': reports, 'curves': curves}, _report_rows(reports), reports=reports)


def _property_reports(f: SmoothFunction, measure: GaussianMeasure, ctx: RunContext) -> List[InequalityReport]:
    if not measure.is_standard:
        return []
    n = measure.dim
    x = measure.draw(ctx.rng.derive(90).generator(), 1)[0]
    reports = [
        hermite_decay_check(HermiteProduct(0), x, PROPERTY_TIMES, ctx.mehler, ctx.rng.derive(91)),
        hermite_decay_check(HermiteProduct(0, 0), x, PROPERTY_TIMES, ctx.mehler, ctx.rng.derive(92)),
        heat_equation_check(f, 0.5, x, ctx.mehler, ctx.rng.derive(93)),
        contraction_check(f, 0.5, measure, ctx.mehler, ctx.rng.derive(94)),
    ]
    logger.info(f"Semigroup property checks run at n={n}")
    return reports


def semigroup_curve(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """One decay curve (I, K, I_r, J_r, Gamma2 or Hessian) as plot-ready rows."""
    params = manifest.params
    kind = params.get('kind', curve_mod.KIND_I)
    f, measure = build_target(params, manifest.command)
    reports: List[InequalityReport] = []
    if kind in (curve_mod.KIND_I, curve_mod.KIND_K):
        curve = i_curve(f, measure, ctx.grid, ctx.mehler, ctx.rng)
        if kind == curve_mod.KIND_K:
            curve = curve.to_k()
    elif kind in (curve_mod.KIND_GAMMA2, curve_mod.KIND_HESSIAN):
        curve = gamma_curves(f, measure, ctx.grid, ctx.mehler, ctx.rng)[kind]
    else:
        r = int(params.get('r', 1))
        normalization = params.get('normalization', NORMALIZATION_GAMMA)
        curve = i_r_curve(f, measure, r, ctx.grid, ctx.mehler, ctx.rng, normalization=normalization)
        if params.get('model') == 'sk' and normalization == NORMALIZATION_GAMMA:
            n, beta = int(params['n']), float(params.get('beta', 0.5))
            bounds = [EstimateWithCI.exact(sk_chatterjee_ir_bound(n, beta, r, t)) for t in ctx.grid.points]
            reports.append(InequalityReport.build(f'chatterjee_i{r}', ctx.grid.points, curve.values, bounds,
                                                  LE, n=n, beta=beta))
        if kind == curve_mod.KIND_J_R:
            curve = curve.to_j()
    if params.get('properties', False):
        reports.extend(_property_reports(f, measure, ctx))
    body = {'curve': curve, 'reports': reports}
    return CommandResult(body, curve.csv_rows(), curve_mod.CSV_COLUMNS, reports)


def variance_table(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """Dynamical vs direct variance next to the Poincaré bound, per n."""
    params = manifest.params
    ns = [int(n) for n in _require_param(params, 'ns', manifest.command)]
    rows, directs, dynamics, identity, poincare = [], [], [], [], []
    for k, n in enumerate(ns):
        f, measure = build_target(dict(params, n=n), manifest.command)
        direct = direct_variance(f, measure, ctx.estimator, ctx.rng.derive(k, 0))
        dynamical = variance_dynamical(f, measure, ctx.mehler, ctx.rng.derive(k, 1), ctx.grid)
        audit = poincare_audit(f, n, ctx.estimator, ctx.rng.derive(k, 2))
        verdict = judge_equal(dynamical, direct)
        poincare.append(audit['report'])
        directs.append(direct)
        dynamics.append(dynamical)
        identity.append(verdict)
        rows.append({
            'n': n,
            'direct_var': direct.value,
            'direct_se': direct.stderr,
            'dynamical_var': dynamical.value,
            'dynamical_se': dynamical.stderr,
            'poincare_bound': audit['gradient_energy'].value,
            'poincare_se': audit['gradient_energy'].stderr,
            'var_log_n': audit['var_log_n'].value,
            'identity_verdict': verdict,
            'poincare_verdict': audit['report'].verdicts[0],
        })
    reports = [InequalityReport.build('variance_identity', ns, dynamics, directs, LE, identity)] + poincare
    return CommandResult({'rows': rows, 'reports': reports}, rows, VARIANCE_COLUMNS, reports)


def _bound_and_sampler(model: str, regime: str, n: int, beta: float, params: Dict[str, Any],
                       ctx: RunContext, k: int) -> Tuple[EstimateWithCI, Callable]:
    gamma = params.get('gamma')
    if model == 'sk':
        if regime == 'high':
            bound = EstimateWithCI.exact(sk_variance_bound(n, beta, sharp=bool(params.get('sharp', False))))
        else:
            bound = sk_logn_bound(n, beta) if gamma is None else sk_logn_bound(n, beta, gamma)
        return bound, sk_disorder_sampler(n, beta)
    if regime == 'chatterjee':
        bound = rem_chatterjee_low_temp_bound(n, beta) if gamma is None \
            else rem_chatterjee_low_temp_bound(n, beta, gamma)
        return bound, rem_free_energy_sampler(n, beta, REM_2N_SCALED)
    if regime == 'high':
        bound = EstimateWithCI.exact(rem_high_temp_bound(n, beta))
    elif regime == 'envelope':
        bound = rem_envelope_bound(n, beta)
    else:
        bound = rem_low_temp_bound_estimate(n, beta, ctx.estimator, ctx.rng.derive(k, 1),
                                            float(params.get('constant', 1.0)))
    return bound, rem_free_energy_sampler(n, beta, N_COORDINATES)


def bounds_table(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """Monte Carlo variance against a model's variance bound, per n."""
    params = manifest.params
    model = params.get('model', 'rem')
    regime = params.get('regime', 'high')
    ns = [int(n) for n in _require_param(params, 'ns', manifest.command)]
    beta_param = _require_param(params, 'beta', manifest.command)
    rows, variances, bounds = [], [], []
    for k, n in enumerate(ns):
        beta = float(np.sqrt(np.log(n))) if beta_param == BETA_SQRT_LOG_N else float(beta_param)
        bound, sampler = _bound_and_sampler(model, regime, n, beta, params, ctx, k)
        var = mc_variance(sampler, ctx.estimator, ctx.rng.derive(k, 0))
        variances.append(var)
        bounds.append(bound)
        rows.append({
            'n': n,
            'beta': beta,
            'mc_var': var.value,
            'mc_se': var.stderr,
            'bound': bound.value,
            'bound_se': bound.stderr,
            'slack': bound.value - var.value,
            'var_log_n': var.value * np.log(n),
            'verdict': judge(var, bound, LE),
        })
        logger.info(f"{model}/{regime} n={n}: Var={var.value:.4g} +/- {var.stderr:.2g}, bound={bound.value:.4g}")
    reports = [InequalityReport.build(f'bounds_{model}_{regime}', ns, variances, bounds, LE,
                                      model=model, regime=regime)]
    return CommandResult({'rows': rows, 'reports': reports}, rows, BOUNDS_COLUMNS, reports)


def bw_check(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """Log-convexity of I between 0 and T."""
    params = manifest.params
    T = float(_require_param(params, 'T', manifest.command))
    f, measure = build_target(params, manifest.command)
    grid = grid_with(ctx.grid, [T])
    curve = i_curve(f, measure, grid, ctx.mehler, ctx.rng)
    reports = [baudoin_wang_check(curve, T)]
    return CommandResult({'reports': reports, 'curve': curve}, _report_rows(reports), reports=reports)


def cel_check(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """Var(f) <= 2/(1 - e^{-2T}) ∫_0^T I at each truncation time T."""
    params = manifest.params
    Ts = [float(T) for T in _require_param(params, 'Ts', manifest.command)]
    f, measure = build_target(params, manifest.command)
    grid = grid_with(ctx.grid, Ts)
    curve = i_curve(f, measure, grid, ctx.mehler, ctx.rng.derive(0))
    variance = direct_variance(f, measure, ctx.estimator, ctx.rng.derive(1))
    bounds = [cel_bound(curve, T) for T in Ts]
    reports = [InequalityReport.build('cel', Ts, [variance] * len(Ts), bounds, LE)]
    body = {'reports': reports, 'curve': curve, 'variance': variance}
    return CommandResult(body, _report_rows(reports), reports=reports)


def partial_bound(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """Partial curvature bound, from given (I(0), I(T), T) or from a sampled I curve."""
    params = manifest.params
    T = float(_require_param(params, 'T', manifest.command))
    if 'i0' in params or 'it' in params:
        i0 = float(_require_param(params, 'i0', manifest.command))
        iT = float(_require_param(params, 'it', manifest.command))
        bound = partial_curvature_bound(i0, iT, T)
        row = {'name': 'partial_curvature', 't': T, 'lhs': np.nan, 'lhs_se': np.nan,
               'rhs': bound.value, 'rhs_se': bound.stderr, 'verdict': ''}
        return CommandResult({'bound': bound, 'i0': i0, 'it': iT, 'T': T}, [row])
    f, measure = build_target(params, manifest.command)
    grid = grid_with(ctx.grid, [T])
    curve = i_curve(f, measure, grid, ctx.mehler, ctx.rng.derive(0))
    bound = partial_curvature_bound(curve.values[0], curve.at(T), T)
    variance = direct_variance(f, measure, ctx.estimator, ctx.rng.derive(1))
    reports = [bound_dominates(bound, variance, 'partial_curvature', T)]
    body = {'bound': bound, 'variance': variance, 'reports': reports, 'curve': curve}
    return CommandResult(body, _report_rows(reports), reports=reports)


def ground_state(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """Var(max H) <= 3 Var(F) + 6 (log 2^n / beta)^2 for SK, with the pointwise sandwich."""
    params = manifest.params
    n = int(params.get('n', 10))
    beta = float(params.get('beta', 0.25))
    result = ground_state_relation(n, beta, ctx.estimator, ctx.rng)
    tightest = result['tightest_lower']
    lower = InequalityReport.build('sandwich_lower', [beta], [EstimateWithCI.exact(tightest['max_energy'])],
                                   [EstimateWithCI.exact(tightest['free_energy'])], LE,
                                   min_gap=result['min_gap'], failures=result['sandwich_failures'])
    upper = InequalityReport.build('sandwich_upper', [beta], [EstimateWithCI.exact(result['max_gap'])],
                                   [EstimateWithCI.exact(result['gap_bound'])], LE,
                                   failures=result['sandwich_failures'])
    reports = [result['report'], lower, upper]
    body = {k: v for k, v in result.items() if k != 'report'}
    body['reports'] = reports
    return CommandResult(body, _report_rows(reports), reports=reports)


def simplex_lemma(manifest: ExperimentManifest, ctx: RunContext) -> CommandResult:
    """Randomized audit of the simplex smoothing lemma."""
    params = manifest.params
    report = simplex_smoothing_check(ctx.rng, int(params.get('trials', 1000)),
                                     int(params.get('max_dim', 20)), int(params.get('max_support', 50)))
    return CommandResult({'reports': [report]}, report.csv_rows(), reports=[report])


COMMAND_HANDLERS: Dict[str, Callable[[ExperimentManifest, RunContext], CommandResult]] = {
    'ic-check': ic_check,
    'cd-check': cd_check,
    'semigroup-curve': semigroup_curve,
    'variance-table': variance_table,
    'bounds-table': bounds_table,
    'bw-check': bw_check,
    'cel-check': cel_check,
    'partial-bound': partial_bound,
    'ground-state': ground_state,
    'simplex-lemma': simplex_lemma,
}
