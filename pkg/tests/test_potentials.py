import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polybubble.core import make_space_spec
from polybubble.potentials import builtin_model, radial_power_taylor


def test_taylor_of_radial_power():
    t = radial_power_taylor(2, 2, 1.0)        # (a^2 + b^2)^2
    assert t == {(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0}


@pytest.mark.parametrize("N,m", [(6, 1), (10, 2)])
def test_builtin_critical_point_and_flatness(N, m):
    sp = make_space_spec(N, m)
    pot = builtin_model(sp, r0=1.2, y0_2=np.full(N - 3, 0.1), b=0.2, bw=0.1)
    g = pot.grad("Q", pot.r0, pot.w0)
    assert np.max(np.abs(g)) < 1e-14
    assert pot.check_flatness() < 1.0


def test_gradient_against_finite_differences():
    sp = make_space_spec(6, 1)
    pot = builtin_model(sp, v1=0.3, v2=0.2, b=0.1, bw=0.2)
    r, w = 1.07, np.array([0.03, -0.02, 0.01])
    h = 1e-6
    for which, fn in (("V", pot.V), ("Q", pot.Q_dev)):
        g = pot.grad(which, r, w)
        assert math.isclose(g[0], (fn(r + h, w) - fn(r - h, w)) / (2 * h), rel_tol=1e-6, abs_tol=1e-10)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (fn(r, w + e) - fn(r, w - e)) / (2 * h)
            assert math.isclose(g[1 + i], fd, rel_tol=1e-6, abs_tol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=6, max_size=6))
def test_cartesian_gradient_chain_rule(v):
    sp = make_space_spec(6, 1)
    pot = builtin_model(sp, v1=0.4, b=0.3)
    y = np.array([1.0, 0.2, 0.1, 0.0, 0.0, 0.0]) + np.array(v)
    g = pot.grad_at("Q", y[None])[0]
    h = 1e-6
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        fd = (pot.Q_at(y + e) - pot.Q_at(y - e)) / (2 * h)
        assert math.isclose(g[i], fd, rel_tol=1e-5, abs_tol=1e-9)


def test_hessian_of_Q_is_degenerate_at_flat_point():
    sp = make_space_spec(10, 2)
    pot = builtin_model(sp)
    H = pot.hess_Q(pot.r0, pot.w0)
    assert np.max(np.abs(H)) < 1e-8


def test_builtin_parameter_checks():
    sp = make_space_spec(6, 1)
    with pytest.raises(ValueError):
        builtin_model(sp, c=0.8, b=0.3)
    with pytest.raises(ValueError):
        builtin_model(sp, p=0)
    with pytest.raises(ValueError):
        builtin_model(sp, v0=0.1, v1=0.5)
    with pytest.raises(ValueError):
        builtin_model(sp, y0_2=(0.0,))


def test_taylor_only_for_exact_flatness():
    sp = make_space_spec(6, 1)
    assert builtin_model(sp).taylor_2m
    assert builtin_model(sp, p=2).taylor_2m == {}
