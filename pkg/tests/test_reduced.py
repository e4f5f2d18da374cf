import math

import numpy as np
import pytest
from scipy import integrate, special

from polybubble.core import Case, DoubleCircleConfig, make_regime, make_space_spec
from polybubble.lattice import a1_limit, a2_limit
from polybubble.potentials import builtin_model
from polybubble.quadrature import POWER_MSTAR, POWER_TWO, moment
from polybubble.reduced import (B1_constant, B2_constant, B3_constant, IllConditionedFitError,
                                NoRootInBracketError, SignConditionError, b1_lambda_sweep,
                                balance_sweep, gradient_index, interaction_constants,
                                lattice_sums_raw, mass_leading_order, moment_constants,
                                pullback_index, solve_balance, t_closed_form, taylor_moment)


def _radial_integral(N, power, gamma, amp):
    """int_{R^N} (amp (1 + |y|^2)^{-gamma/2})^power dy by 1-D quadrature."""
    area = 2 * math.pi ** (N / 2) / special.gamma(N / 2)
    f = lambda r: r ** (N - 1) * amp ** power * (1 + r * r) ** (-gamma * power / 2)
    return area * integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]


@pytest.mark.parametrize("N,m", [(6, 1), (7, 1), (10, 2), (11, 2)])
def test_constants_against_radial_quadrature(N, m):
    sp = make_space_spec(N, m)
    g, amp = sp.gamma, sp.bubble_amplitude
    assert B1_constant(sp) == pytest.approx(m * _radial_integral(N, 2, g, amp), rel=1e-10)
    p = sp.m_star_f - 1
    assert B3_constant(sp) == pytest.approx(g / 2 * amp * _radial_integral(N, p, g, amp), rel=1e-10)
    assert B2_constant(sp) == 1 / (math.factorial(2 * m - 1) * sp.m_star)


def test_pullback_and_taylor_moment():
    assert pullback_index((2, 0, 0, 0)) == (2, 0, 0, 0, 0, 0)
    assert pullback_index((0, 2, 0, 0)) == (0, 0, 0, 2, 0, 0)
    sp = make_space_spec(6, 1)
    # -c |z|^2 pulled back: -c (y1^2 + y4^2 + y5^2 + y6^2) = -c (4/6) |y|^2 by symmetry
    val = taylor_moment(sp, builtin_model(sp, c=0.5).taylor_2m)
    ref = -0.5 * 4 * moment(sp, POWER_MSTAR, (2, 0, 0, 0, 0, 0))
    assert val == pytest.approx(ref, rel=1e-12)


def test_moment_constant_sign_condition():
    sp = make_space_spec(6, 1)
    pot = builtin_model(sp, v0=1.0, c=0.5)
    val = moment_constants(sp, pot)
    assert val > B1_constant(sp)          # c > 0 only adds to V0 B1
    with pytest.raises(SignConditionError):
        moment_constants(sp, builtin_model(sp, v0=0.01, c=-1.0))
    assert moment_constants(sp, builtin_model(sp, v0=0.01, c=-1.0), allow_violation=True) < 0


def test_interaction_constants_scale_with_radius():
    sp = make_space_spec(6, 1)
    b3, b4 = interaction_constants(sp, 1.0)
    assert b3 == pytest.approx(B3_constant(sp) * a1_limit(sp.gamma))
    assert b4 == pytest.approx(B3_constant(sp) * a2_limit(sp.gamma))
    b3h, _ = interaction_constants(sp, 2.0)
    assert b3h == pytest.approx(b3 / 2 ** sp.gamma)


def test_lattice_sums_raw_small_cases():
    same, cross = lattice_sums_raw(1.0, 0.5, 2, 2.0)
    assert same == pytest.approx(1 / 4)
    assert cross == pytest.approx(1 / 1.0 + 1 / 5.0)
    assert lattice_sums_raw(1.0, 0.5, 1, 2.0)[0] == 0.0


@pytest.mark.parametrize("N,m", [(6, 1), (10, 2)])
def test_gradient_index_nonzero(N, m):
    sp = make_space_spec(N, m)
    assert gradient_index(builtin_model(sp)) == 1
    assert gradient_index(builtin_model(sp, c=-0.5)) == 1


def test_narrow_sweep_rejected():
    sp = make_space_spec(6, 1)
    with pytest.raises(IllConditionedFitError):
        b1_lambda_sweep(sp, builtin_model(sp), [10, 11, 12, 13, 14])
    with pytest.raises(IllConditionedFitError):
        b1_lambda_sweep(sp, builtin_model(sp), [10, 100])


def test_case2_balance_root_and_closed_form():
    sp = make_space_spec(6, 1)
    reg = make_regime(sp, Case.CASE2, L0=0.01, L1=100)
    s = solve_balance(sp, builtin_model(sp), reg, 128)
    c = s.constants
    assert s.t_model == pytest.approx(t_closed_form(Case.CASE2, c["B1_tilde"], c["B3_tilde"], sp, reg),
                                      rel=1e-10)
    assert abs(s.residuals["de_lam"]) < 1e-10
    assert s.residuals["ball_ok"]
    assert s.t == pytest.approx(s.t_model, rel=0.05)


def test_case3_needs_large_vertical_spacing():
    sp = make_space_spec(6, 1)
    pot = builtin_model(sp)
    with pytest.raises(NoRootInBracketError):
        solve_balance(sp, pot, make_regime(sp, Case.CASE3, L0=0.01, L1=100), 128)
    s = solve_balance(sp, pot, make_regime(sp, Case.CASE3, M2=2.0, L0=0.01, L1=100), 128)
    assert s.lam > 0


def test_balance_sweep_slope_case2():
    sp = make_space_spec(6, 1)
    reg = make_regime(sp, Case.CASE2, L0=0.01, L1=100)
    sols, fit = balance_sweep(sp, builtin_model(sp), reg, [64, 128, 256, 512, 1024])
    assert fit.exponent == pytest.approx(float(reg.k_exponent), rel=0.03)
    assert all(s.k == k for s, k in zip(sols, [64, 128, 256, 512, 1024]))


def test_mass_formula_single_point():
    sp = make_space_spec(6, 1)
    cfg = DoubleCircleConfig(1.0, 0.5, (0.0,) * 3, 1, 40.0)
    lhs, pred, err = mass_leading_order(sp, cfg, lambda r, w: 1.0 + 0 * r, POWER_TWO, log2_n=13)
    assert err < 1e-3 * lhs
    assert lhs / pred == pytest.approx(1.0, abs=0.1)
    lhs, pred, err = mass_leading_order(sp, cfg, lambda r, w: 2.0 + 0 * r, POWER_MSTAR, log2_n=13)
    assert lhs / pred == pytest.approx(1.0, abs=0.02)
