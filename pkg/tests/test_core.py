import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polybubble.core import (Case, DegenerateProjectionError, DimensionTooSmallError, DoubleCircleConfig,
                             RegimeMismatchError, generate_centers, make_regime, make_space_spec,
                             rotate_plane, sector_of)


def test_space_constants():
    sp = make_space_spec(6, 1)
    assert sp.m_star == Fraction(3)
    assert sp.gamma == 4
    # P_{1,6} = (N-2)N
    assert sp.p_const == 24
    sp2 = make_space_spec(10, 2)
    assert sp2.m_star == Fraction(10, 3)
    assert sp2.p_const == 6 * 8 * 10 * 12


@pytest.mark.parametrize("N,m", [(5, 1), (9, 2), (6, 2), (3, 1)])
def test_dimension_too_small(N, m):
    with pytest.raises(DimensionTooSmallError, match="dimension-too-small"):
        make_space_spec(N, m)


def test_regime_exponents():
    sp = make_space_spec(6, 1)
    r1 = make_regime(sp, Case.CASE1, iota=0.5)
    assert r1.k_exponent == Fraction(8)       # (N-2m)/(N-4m-nu) = 4 / iota
    assert r1.beta1 == Fraction(3, 8)
    r2 = make_regime(sp, "Case2", a=0.5)
    assert r2.k_exponent == Fraction(2)
    assert make_regime(sp, "Case3").a == 0.0


@pytest.mark.parametrize("kw", [dict(iota=0.0), dict(iota=2.0), dict(iota=None)])
def test_case1_needs_admissible_iota(kw):
    with pytest.raises(ValueError):
        make_regime(make_space_spec(6, 1), Case.CASE1, **kw)


def test_case2_needs_a_in_unit_interval():
    with pytest.raises(ValueError):
        make_regime(make_space_spec(6, 1), Case.CASE2, a=1.0)
    with pytest.raises(ValueError):
        make_regime(make_space_spec(6, 1), Case.CASE3, a=0.2)


def test_h_bar_by_case():
    sp = make_space_spec(6, 1)
    lam = 1e4
    r1 = make_regime(sp, Case.CASE1, iota=0.5, M1=0.3)
    assert math.isclose(math.sqrt(1 - r1.h_bar(lam) ** 2), 0.3 * lam ** (-3 / 8), rel_tol=1e-9)
    r2 = make_regime(sp, Case.CASE2, a=0.5, M2=1.0)
    assert math.isclose(r2.h_bar(lam), 0.5 + lam ** (-0.5), rel_tol=1e-12)
    r3 = make_regime(sp, Case.CASE3, M2=2.0)
    assert math.isclose(r3.h_bar(lam), 2.0 * lam ** (-0.5), rel_tol=1e-12)
    with pytest.raises(RegimeMismatchError):
        r3.h_bar(1.0)       # 2 lam^{-1/2} = 2 is not an admissible height


def test_regime_roundtrip_t():
    r = make_regime(make_space_spec(6, 1), Case.CASE2, a=0.5)
    assert math.isclose(r.t_of(64, r.lam(64, 0.7)), 0.7)


def test_centers_geometry():
    cfg = DoubleCircleConfig(1.3, 0.4, (0.2, -0.1, 0.0), 5, 10.0)
    c = generate_centers(cfg)
    assert c.shape == (10, 6)
    assert np.allclose(np.linalg.norm(c[:, :3], axis=1), 1.3)
    assert np.allclose(c[:5, 2], 1.3 * 0.4) and np.allclose(c[5:, 2], -1.3 * 0.4)
    assert np.allclose(c[:, 3:], [0.2, -0.1, 0.0])


def test_config_rejects_endpoints():
    with pytest.raises(ValueError):
        DoubleCircleConfig(1.0, 1.0, (0.0,) * 3, 4, 1.0)
    cfg = DoubleCircleConfig.for_testing(1.0, 0.0, (0.0,) * 3, 4)
    assert np.allclose(generate_centers(cfg)[:4], generate_centers(cfg)[4:])


@settings(max_examples=50, deadline=None)
@given(k=st.integers(2, 40), h=st.floats(0.05, 0.95), j=st.integers(0, 39))
def test_rotation_permutes_centers(k, h, j):
    cfg = DoubleCircleConfig(1.0, h, (0.0, 0.0, 0.0), k, 1.0)
    c = generate_centers(cfg)
    rot = rotate_plane(c, 2 * math.pi * (j % k) / k)
    d = np.linalg.norm(rot[:, None, :] - c[None, :, :], axis=2)
    assert np.all(d.min(axis=1) < 1e-9)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, 30), j=st.integers(0, 29))
def test_sector_of_center(k, j):
    cfg = DoubleCircleConfig(1.0, 0.5, (0.0, 0.0, 0.0), k, 1.0)
    c = generate_centers(cfg)
    jj = j % k
    assert sector_of(c[jj], cfg) == (jj + 1, 1)
    assert sector_of(c[k + jj], cfg) == (jj + 1, -1)


def test_sector_degenerate_projection():
    cfg = DoubleCircleConfig(1.0, 0.5, (0.0, 0.0, 0.0), 3, 1.0)
    with pytest.raises(DegenerateProjectionError):
        sector_of([0.0, 0.0, 1.0, 0.0, 0.0, 0.0], cfg)
