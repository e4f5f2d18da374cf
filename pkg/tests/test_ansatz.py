import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polybubble.ansatz import AnsatzSpec, CutoffSpec, eval_ansatz, smoothstep, star_sum
from polybubble.bubble import eval_bubble
from polybubble.core import DoubleCircleConfig, make_space_spec


@pytest.mark.parametrize("order", [3, 5, 7])
def test_smoothstep_endpoints(order):
    S = smoothstep(order)
    assert math.isclose(S(0.0), 0.0, abs_tol=1e-14) and math.isclose(S(1.0), 1.0)
    for j in range(1, (order + 1) // 2 + 1):
        d = S.deriv(j)
        assert abs(d(0.0)) < 1e-10 and abs(d(1.0)) < 1e-10
    x = np.linspace(0, 1, 101)
    assert np.all(np.diff(S(x)) >= -1e-10)  # cancellation in high-degree coefficients


def _shell_points(cut, n, seed):
    rng = np.random.default_rng(seed)
    N = cut.space.N
    s = cut.delta * (0.9 + 1.2 * rng.random(n))
    v = rng.standard_normal((n, N - 2))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    R = cut.r0 + s * v[:, 0]
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return np.concatenate([R[:, None] * d, np.asarray(cut.y0_2) + s[:, None] * v[:, 1:]], axis=1)


def test_cutoff_values_and_support():
    sp = make_space_spec(6, 1)
    cut = CutoffSpec.default(sp, 1.0)
    y = _shell_points(cut, 500, 0)
    v = cut.value(y)
    s = cut.s_dist(y)
    assert np.all((v >= -1e-14) & (v <= 1 + 1e-14))
    assert np.allclose(v[s <= cut.delta], 1.0)
    far = np.array([[1.0 + 3 * cut.delta, 0, 0, 0, 0, 0]])
    assert cut.value(far)[0] == 0.0


@pytest.mark.parametrize("N,m", [(6, 1), (10, 2)])
def test_cutoff_laplacian_tower_against_finite_differences(N, m):
    sp = make_space_spec(N, m)
    cut = CutoffSpec(1.0, tuple([0.02] + [0.0] * (N - 4)), 0.1, sp)
    y = _shell_points(cut, 5, 1)
    h = 1e-4
    for l in range(2 * m):
        f = lambda z: cut.neg_lap_power(z, l)
        lap = np.zeros(len(y))
        for i in range(N):
            e = np.zeros(N)
            e[i] = h
            lap += (f(y + e) - 2 * f(y) + f(y - e)) / h ** 2
        ref = cut.neg_lap_power(y, l + 1)
        scale = np.abs(ref).max()
        assert np.max(np.abs(-lap - ref)) < 1e-4 * scale


def test_cutoff_validation():
    sp = make_space_spec(6, 1)
    with pytest.raises(ValueError):
        CutoffSpec(1.0, (0.0,) * 3, 0.6, sp)
    with pytest.raises(ValueError):
        CutoffSpec(1.0, (0.0,) * 2, 0.1, sp)
    with pytest.raises(ValueError):
        CutoffSpec(1.0, (0.0,) * 3, 0.1, sp, order=2)


def test_ansatz_centers_must_sit_where_cutoff_is_one():
    sp = make_space_spec(6, 1)
    cut = CutoffSpec.default(sp, 1.0)
    with pytest.raises(ValueError):
        AnsatzSpec(DoubleCircleConfig(1.5, 0.5, (0.0,) * 3, 4, 10.0), cut)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(1, 12), lam=st.floats(1.0, 100.0))
def test_star_sum_is_sum_of_bubbles(k, lam):
    sp = make_space_spec(6, 1)
    cfg = DoubleCircleConfig(1.0, 0.5, (0.0,) * 3, k, lam)
    a = AnsatzSpec(cfg, CutoffSpec.default(sp, 1.0), with_cutoff=False)
    y = np.random.default_rng(k).normal(size=(7, 6))
    ref = sum(eval_bubble(b, y) for b in a.bubbles())
    assert np.allclose(star_sum(a, y), ref, rtol=1e-13)
    assert np.allclose(eval_ansatz(a, y), ref, rtol=1e-13)


def test_ansatz_with_cutoff():
    sp = make_space_spec(6, 1)
    cut = CutoffSpec.default(sp, 1.0)
    a = AnsatzSpec(DoubleCircleConfig(1.0, 0.5, (0.0,) * 3, 3, 10.0), cut)
    y = _shell_points(cut, 50, 2)
    assert np.allclose(eval_ansatz(a, y), cut.value(y) * star_sum(a, y))
