import numpy as np
import pytest

from criteria.psi import PsiFunction, theorem_integral, theorem_integral_quadrature
from semigroup.curves import DecayCurve
from semigroup.grid import TimeGrid
from stats.estimate import TAIL_NOT_NEGLIGIBLE
from utils.errors import DomainError, NonIntegrablePsiError


def test_exponential_closed_form():
    assert theorem_integral(PsiFunction.exponential(1.0, 4.0)).value == 0.5
    assert np.isclose(theorem_integral(PsiFunction.exponential(3.0, 6.0)).value, 4 * 3.0 / (6.0 * 4.0))
    assert theorem_integral(PsiFunction.zero()).value == 0.0
    assert theorem_integral(PsiFunction.exponential(0.0, 1.0)).value == 0.0


@pytest.mark.parametrize('rate', [2.0, 1.0, 0.0])
def test_slow_exponentials_are_not_integrable(rate):
    with pytest.raises(NonIntegrablePsiError):
        theorem_integral(PsiFunction.exponential(1.0, rate))


def test_closed_forms_match_nested_quadrature():
    for psi in (PsiFunction.exponential(1.0, 4.0), PsiFunction.rem_envelope(0.5, 4)):
        closed = theorem_integral(psi).value
        errMsg = f"closed form {closed} disagrees with quadrature for {psi.describe()}"
        assert np.isclose(closed, theorem_integral_quadrature(psi), rtol=1e-6), errMsg


def test_rem_envelope_value():
    c = 2 * 0.5 ** 2
    assert np.isclose(theorem_integral(PsiFunction.rem_envelope(0.5, 4)).value, (np.exp(c) - 1 - c) / (c * 4))


def test_sampled_psi_matches_closed_form():
    grid = TimeGrid.uniform(8.0, 801)
    curve = DecayCurve.from_function(grid, lambda t: np.exp(-4.0 * t))
    psi = PsiFunction.sampled(curve)
    assert np.isclose(psi.tail_rate(), 4.0)
    result = theorem_integral(psi)
    assert np.isclose(result.value, 0.5, rtol=1e-3)
    assert not result.has_flag(TAIL_NOT_NEGLIGIBLE)
    assert np.isclose(psi(9.0), np.exp(-36.0), rtol=1e-9)


def test_short_sampled_psi_flags_its_tail():
    grid = TimeGrid.uniform(1.0, 101)
    psi = PsiFunction.sampled(DecayCurve.from_function(grid, lambda t: np.exp(-4.0 * t)))
    result = theorem_integral(psi)
    assert result.has_flag(TAIL_NOT_NEGLIGIBLE)
    # the exponential tail makes the total exact anyway
    assert np.isclose(result.value, 0.5, rtol=1e-3)


def test_slowly_decaying_sample_is_rejected():
    grid = TimeGrid.uniform(4.0, 41)
    psi = PsiFunction.sampled(DecayCurve.from_function(grid, lambda t: np.exp(-1.5 * t)))
    with pytest.raises(NonIntegrablePsiError):
        theorem_integral(psi)


def test_psi_from_i_curve():
    grid = TimeGrid.uniform(2.0, 5)
    i = DecayCurve.from_function(grid, lambda t: np.exp(-2.0 * t))
    psi = PsiFunction.from_i_curve(i, 0.5)
    assert np.allclose(psi.curve.estimates, 0.5 * np.exp(-4.0 * grid.array))
    with pytest.raises(DomainError):
        PsiFunction.zero().tail_rate()
