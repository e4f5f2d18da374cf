import warnings

import numpy as np
import pytest

jnp = pytest.importorskip("jax.numpy")

from jax_reference import make_defect
from polybubble.ansatz import AnsatzSpec, CutoffSpec, smoothstep
from polybubble.ansatz_error import (DOUBLE_STAR, STAR, SampleOutsideSupportWarning, WeightedNorm,
                                     assemble_error_term, error_scaling_fit, structured_samples,
                                     weighted_norm)
from polybubble.bubble import eval_bubble
from polybubble.core import Case, DoubleCircleConfig, generate_centers, make_regime, make_space_spec
from polybubble.potentials import builtin_model


@pytest.mark.parametrize("N,m", [(6, 1), (10, 2)])
def test_error_term_matches_autodiff_reference(N, m):
    sp = make_space_spec(N, m)
    r0, c, b, v0, v1 = 1.0, 0.5, 0.2, 1.0, 0.3
    cfg = DoubleCircleConfig(r0, 0.6, (0.0,) * (N - 3), 3, 8.0)
    cut = CutoffSpec.default(sp, r0)
    a = AnsatzSpec(cfg, cut)
    pot = builtin_model(sp, r0, c=c, b=b, v0=v0, v1=v1)

    def V(R, w):
        return v0 + v1 * jnp.tanh(R - r0)

    def Qd(R, w):
        s2 = (R - r0) ** 2 + jnp.sum(w ** 2)
        return (-c + b * (R - r0)) * s2 ** m / (1 + s2 ** (m + 1))

    E = make_defect(sp, generate_centers(cfg), cfg.lam, r0, np.zeros(N - 3), cut.delta,
                    smoothstep(cut.order).coef, V, Qd)
    pts = structured_samples(cfg, cut, 200, 1)[::10][:20]
    br = assemble_error_term(a, pot, pts)
    ref = np.array([float(E(jnp.asarray(p))) for p in pts])
    scale = np.abs(ref).max()
    rel = np.abs(br.total - ref) / np.maximum(np.abs(ref), 1e-12 * scale)
    assert np.max(rel) <= 1e-6


def _setup(N=6, m=1, k=1, lam=20.0, **kw):
    sp = make_space_spec(N, m)
    cfg = DoubleCircleConfig(1.0, 0.5, (0.0,) * (N - 3), k, lam)
    cut = CutoffSpec.default(sp, 1.0)
    return sp, cfg, cut, AnsatzSpec(cfg, cut), builtin_model(sp, **kw)


@pytest.mark.parametrize("N,m", [(6, 1), (10, 2)])
def test_cutoff_terms_vanish_where_cutoff_is_one(N, m):
    sp, cfg, cut, a, pot = _setup(N, m, k=2)
    pts = structured_samples(cfg, cut, 400, 0)
    inner = pts[cut.value(pts) == 1.0]
    inner = inner[cut.s_dist(inner) < cut.delta * 0.99]
    assert len(inner) > 10
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SampleOutsideSupportWarning)
        br = assemble_error_term(a, pot, inner)
    for name in ("I3", "I4", "I5"):
        assert np.all(getattr(br, name) == 0.0)


def test_single_bubble_flat_Q_zero_V():
    # k=1 (one bubble per circle), Q = 1, V = 0: I12 and I2 vanish identically,
    # and I11 is the pure cutoff term on the transition shell
    sp, cfg, cut, a, pot = _setup(k=1, c=0.0, v0=0.0)
    pts = structured_samples(cfg, cut, 600, 0)
    br = assemble_error_term(a, pot, pts)
    assert np.all(br.I12 == 0.0) and np.all(br.I2 == 0.0)
    p = sp.m_star_f - 1.0
    xi = cut.value(pts)
    U = [eval_bubble(b, pts) for b in a.bubbles()]
    expect = xi ** p * (U[0] + U[1]) ** p - xi * (U[0] ** p + U[1] ** p)
    assert np.allclose(br.I11, expect, rtol=1e-9, atol=1e-12 * np.abs(expect).max())
    # where xi is 0 the interaction term is 0; where xi is 1 only the bubble overlap remains
    assert np.all(br.I11[xi == 0.0] == 0.0)


def test_Q_deviation_term():
    sp, cfg, cut, a, pot = _setup(k=3, b=0.2, v1=0.3)
    pts = structured_samples(cfg, cut, 300, 2)
    br = assemble_error_term(a, pot, pts)
    p = sp.m_star_f - 1.0
    powsum = sum(eval_bubble(b, pts) ** p for b in a.bubbles())
    assert np.allclose(br.I12, pot.Qdev_at(pts) * cut.value(pts) * powsum, rtol=1e-12, atol=0)
    zs = sum(eval_bubble(b, pts) for b in a.bubbles())
    assert np.allclose(br.I2, pot.V_at(pts) * cut.value(pts) * zs, rtol=1e-12)


def test_warns_without_shell_points():
    sp, cfg, cut, a, pot = _setup()
    x = generate_centers(cfg)[0]
    with pytest.warns(SampleOutsideSupportWarning):
        br = assemble_error_term(a, pot, x[None] + 1e-3)
    assert br.I3[0] == br.I4[0] == br.I5[0] == 0.0


def test_unsupported_order_and_uncut_ansatz():
    sp = make_space_spec(14, 3)
    cfg = DoubleCircleConfig(1.0, 0.5, (0.0,) * 11, 2, 10.0)
    a = AnsatzSpec(cfg, CutoffSpec.default(sp, 1.0))
    with pytest.raises(NotImplementedError):
        assemble_error_term(a, builtin_model(sp), np.zeros((1, 14)))
    sp, cfg, cut, _, pot = _setup()
    with pytest.raises(ValueError):
        assemble_error_term(AnsatzSpec(cfg, cut, with_cutoff=False), pot, np.zeros((1, 6)))


def test_weighted_norm_of_weight_is_one():
    sp = make_space_spec(6, 1)
    reg = make_regime(sp, Case.CASE2)
    cfg = DoubleCircleConfig(1.0, 0.5, (0.0,) * 3, 4, 30.0)
    for kind in (STAR, DOUBLE_STAR):
        nrm = WeightedNorm(kind, cfg, reg, 300)
        est, arg = weighted_norm(nrm.weight, nrm)
        assert est == pytest.approx(1.0, rel=1e-12)
        est2, _ = weighted_norm(lambda y: 3.0 * nrm.weight(y), nrm)
        assert est2 == pytest.approx(3.0 * est)
    with pytest.raises(ValueError):
        WeightedNorm("sup", cfg, reg)


def test_weight_decays_away_from_centers():
    sp = make_space_spec(6, 1)
    reg = make_regime(sp, Case.CASE2)
    cfg = DoubleCircleConfig(1.0, 0.5, (0.0,) * 3, 4, 30.0)
    nrm = WeightedNorm(DOUBLE_STAR, cfg, reg)
    x = generate_centers(cfg)[0]
    w = nrm.weight(x + np.outer([0, 1e-2, 1e-1], np.eye(6)[5]))
    assert np.all(np.diff(w) < 0)
    assert w[0] == pytest.approx(cfg.lam ** nrm.lam_power, rel=0.05)


def test_structured_samples_symmetric_subset():
    sp, cfg, cut, a, pot = _setup(k=4)
    sym = structured_samples(cfg, cut, 400, 0, symmetric=True)
    full = structured_samples(cfg, cut, 400, 0, symmetric=False)
    assert sym.shape[1] == full.shape[1] == 6
    assert len(full) > len(sym)


def test_error_fit_requires_case1():
    sp = make_space_spec(6, 1)
    with pytest.raises(ValueError):
        error_scaling_fit(sp, builtin_model(sp), make_regime(sp, Case.CASE2), [2, 3, 4])
