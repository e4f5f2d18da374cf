import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as si

from polybubble.core import DoubleCircleConfig, generate_centers, make_space_spec
from polybubble.lattice import (Branch, ScheduleMismatchError, a1_limit, a2_limit, branch_of, branch_scaling,
                                cross_bound_constant, cross_circle_sum, fit_A_constants, hk_const_bracket,
                                interaction_inequality_check, same_circle_sum, sub_limit)


def _brute(cfg, gamma):
    c = generate_centers(cfg)
    k = cfg.k
    d_same = np.linalg.norm(c[1:k] - c[0], axis=1)
    d_cross = np.linalg.norm(c[k:] - c[0], axis=1)
    return np.sum(d_same ** -gamma), np.sum(d_cross ** -gamma)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(2, 200), h=st.floats(0.05, 0.95), gamma=st.floats(0.3, 8.0))
def test_sums_match_pairwise_distances(k, h, gamma):
    cfg = DoubleCircleConfig(1.2, h, (0.1, 0.0, 0.0), k, 1.0)
    s, c = _brute(cfg, gamma)
    assert math.isclose(same_circle_sum(cfg, gamma).value, s, rel_tol=1e-10)
    assert math.isclose(cross_circle_sum(cfg, gamma).value, c, rel_tol=1e-10)


def test_two_points_per_circle():
    # k = 2: the partner sits at distance 2R
    cfg = DoubleCircleConfig(1.0, 0.6, (0.0,) * 3, 2, 1.0)
    assert math.isclose(same_circle_sum(cfg, 4.0).value, (2 * 0.8) ** -4)


def test_same_sum_needs_two_points():
    with pytest.raises(ValueError):
        same_circle_sum(DoubleCircleConfig(1.0, 0.5, (0.0,) * 3, 1, 1.0), 4.0)


def test_branch_of():
    assert branch_of(4) is Branch.SUPER
    assert branch_of(1) is Branch.CRIT
    assert branch_of(0.5) is Branch.SUB


def test_limit_constants():
    assert math.isclose(a1_limit(4.0), 2 * (math.pi ** 4 / 90) / (2 * math.pi) ** 4)
    # sub-critical limit equals int_0^1 (2 sin(pi x))^{-gamma} dx
    g = 0.4
    v, _ = si.quad(lambda x: (2 * math.sin(math.pi * x)) ** -g, 0, 1)
    assert math.isclose(sub_limit(g), v, rel_tol=1e-9)
    # A2 = (1/pi) int_R (4 t^2 + 4)^{-gamma/2} dt from the sum over j near 0 and k
    for g in (2.5, 4.0, 7.0):
        v, _ = si.quad(lambda t: (4 * t * t + 4) ** (-g / 2), -np.inf, np.inf)
        assert math.isclose(a2_limit(g), v / math.pi, rel_tol=1e-9)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 4.0, 6.0, 7.0])
def test_branch_scaling_within_three_percent(gamma):
    rep = branch_scaling(gamma)
    assert rep.passed_3pct, (rep.estimate, rep.predicted)


def test_fit_A_constants():
    sp = make_space_spec(6, 1)
    A1, A2 = fit_A_constants(sp)
    assert abs(A1.exponent - 4) <= 0.02 * 4
    assert math.isclose(A1.coefficient, a1_limit(4), rel_tol=1e-6)
    assert min(A1.meta["difference_ratios"]) >= 2.0
    # A2 converges towards its limit along h = k^{-1/2}
    rem = np.abs(A2.meta["remainder"])
    assert rem[-1] < rem[0] and rem[-1] < 0.05


def test_schedule_mismatch():
    with pytest.raises(ScheduleMismatchError):
        fit_A_constants(make_space_spec(6, 1), h_schedule=lambda k: 1.0 / k)


def test_hk_constant_bracket_bounded():
    v = hk_const_bracket(make_space_spec(6, 1), 3.0)
    assert np.all(np.isfinite(v)) and v.max() / v.min() < 1.5


def test_cross_bound_constant_nonnegative():
    cfg = DoubleCircleConfig(1.0, 0.1, (0.0,) * 3, 64, 1.0)
    assert cross_bound_constant(cfg, 4.0) >= 0.0


@settings(max_examples=25, deadline=None)
@given(d=st.floats(0.5, 100.0), k1=st.floats(1.0, 4.0), k2=st.floats(1.0, 4.0), frac=st.floats(0.0, 1.0))
def test_interaction_inequality_bounded(d, k1, k2, frac):
    sigma = frac * min(k1, k2)
    xi = np.zeros(4)
    xj = np.array([d, 0.0, 0.0, 0.0])
    r = interaction_inequality_check(xi, xj, k1, k2, sigma, samples=800)
    assert r <= 2.0 ** (k1 + k2) + 1e-9


def test_interaction_inequality_input_checks():
    with pytest.raises(ValueError):
        interaction_inequality_check(np.zeros(3), np.zeros(3), 2, 2, 1)
    with pytest.raises(ValueError):
        interaction_inequality_check(np.zeros(3), np.ones(3), 2, 2, 3)
