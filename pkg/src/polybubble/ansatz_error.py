"""The defect E_k of the ansatz and the weighted sup norms used to measure it.

E_k = Q Z^{m*-1} - (-Delta)^m Z - V Z with Z = xi Z*, split as

    E_k = I1 - I2 - I3 + I4 + I5,   I1 = I11 + I12,

I11 = Q [(xi Z*)^{m*-1} - xi sum_j U_j^{m*-1}]   (interaction)
I12 = (Q - 1) xi sum_j U_j^{m*-1}                  (deviation of Q)
I2  = V Z
and I3, I4, I5 the commutator of (-Delta)^m with the cutoff.  From the
Leibniz rule for Delta^m(xi Z*):

  m = 1:  I3 = Z* (-Delta xi),            I4 = 2 grad xi . grad Z*,          I5 = 0
  m = 2:  I3 = Z* Delta^2 xi + 2 Delta xi Delta Z*,
          I4 = 4 [grad(-Delta xi) . grad Z* + grad xi . grad(-Delta Z*)],
          I5 = a_1 sum_ij d_ij xi d_ij Z*  with a_1 = -4.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import distance

from .ansatz import AnsatzSpec, CutoffSpec, star_sum
from .bubble import eval_bubble
from .core import Case, DoubleCircleConfig, RegimeParams, SpaceSpec, generate_centers
from .fitting import ExpansionFit, loglog_fit
from .potentials import PotentialModel

SUPPORTED_M = (1, 2)
I5_COEFFICIENT = {1: 0.0, 2: -4.0}


class SampleOutsideSupportWarning(UserWarning):
    pass


# ------------------------------------------------------------------- norms

STAR = "star"
DOUBLE_STAR = "double_star"


@dataclass(frozen=True)
class WeightedNorm:
    kind: str
    cfg: DoubleCircleConfig
    regime: RegimeParams
    sample_budget: int = 4000

    def __post_init__(self):
        if self.kind not in (STAR, DOUBLE_STAR):
            raise ValueError(f"unknown norm kind {self.kind!r}")

    @property
    def space(self) -> SpaceSpec:
        return self.regime.space

    @property
    def decay(self) -> float:
        sp = self.space
        sgn = -1 if self.kind == STAR else 1
        return (sp.N + sgn * 2 * sp.m) / 2.0 + float(self.regime.tau)

    @property
    def lam_power(self) -> float:
        sp = self.space
        sgn = -1 if self.kind == STAR else 1
        return (sp.N + sgn * 2 * sp.m) / 2.0

    def weight(self, y) -> np.ndarray:
        """lam^{(N -+ 2m)/2} sum_j (1 + lam |y - x_j|)^{-decay}."""
        lam = self.cfg.lam
        d = distance.cdist(np.atleast_2d(y), generate_centers(self.cfg))
        return lam ** self.lam_power * np.sum((1.0 + lam * d) ** (-self.decay), axis=1)


def structured_samples(cfg: DoubleCircleConfig, cutoff: CutoffSpec | None, budget: int = 4000,
                       seed: int = 0, symmetric: bool = True) -> np.ndarray:
    """Sample points for sup-norm estimates.

    Dense log-spaced shells (radii 10^-2/lam up to the cutoff scale) around
    the centers, points on the segments to the nearest neighbours, and
    points on the cutoff transition shell.  With symmetric=True only the
    neighbourhood of x_1^+ is sampled, which suffices for fields invariant
    under the configuration's symmetry group.
    """
    rng = np.random.default_rng(seed)
    centers = generate_centers(cfg)
    k, N, lam = cfg.k, cfg.N, cfg.lam
    own = [0] if symmetric else list(range(2 * k))
    outer = cutoff.delta if cutoff is not None else 1.0
    n_shell = max(16, budget // (2 * len(own)))
    n_seg = max(8, budget // (8 * len(own)))
    pts = []
    for j in own:
        x = centers[j]
        u = np.linspace(-2.0, math.log10(max(lam * 2 * outer, 1e-1)), n_shell)
        dirs = rng.standard_normal((n_shell, N))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts.append(x + (10.0 ** u / lam)[:, None] * dirs)
        others = np.delete(centers, j, axis=0)
        if len(others):
            near = others[np.argsort(np.linalg.norm(others - x, axis=1))[:3]]
            t = np.linspace(0.0, 1.0, n_seg + 2)[1:-1]
            for xo in near:
                seg = x + t[:, None] * (xo - x)
                jit = rng.standard_normal(seg.shape) * (0.2 / lam)
                pts.append(seg)
                pts.append(seg + jit)
    if cutoff is not None:
        # transition shell: y' directions over the fundamental domain of the
        # symmetry group (or the whole sphere), s = dist to (r0, y0'') in [delta, 2 delta]
        n_ann = max(16, budget // 2)
        s = cutoff.delta * (1.0 + rng.random(n_ann))
        v = rng.standard_normal((n_ann, N - 2))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        R = cutoff.r0 + s * v[:, 0]
        if symmetric:
            phi = (rng.random(n_ann) - 0.5) * 2 * np.pi / k
            ct = rng.random(n_ann)
        else:
            phi = rng.random(n_ann) * 2 * np.pi
            ct = 2 * rng.random(n_ann) - 1
        st = np.sqrt(1 - ct * ct)
        d = np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=1)
        y2 = np.asarray(cutoff.y0_2) + s[:, None] * v[:, 1:]
        pts.append(np.concatenate([R[:, None] * d, y2], axis=1))
    return np.concatenate(pts)


def weighted_norm(f, norm: WeightedNorm, points=None, seed: int = 0, symmetric: bool = True,
                  cutoff: CutoffSpec | None = None):
    """(estimate, argmax) of sup |f| / weight over structured samples.

    This is a lower bound for the true supremum over R^N.
    """
    if points is None:
        points = structured_samples(norm.cfg, cutoff, norm.sample_budget, seed, symmetric)
    vals = np.abs(np.asarray(f(points), dtype=float))
    ratio = vals / norm.weight(points)
    i = int(np.argmax(ratio))
    return float(ratio[i]), points[i]


# ------------------------------------------------------------- error terms

@dataclass
class ErrorTermBreakdown:
    points: np.ndarray
    I11: np.ndarray
    I12: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    I4: np.ndarray
    I5: np.ndarray
    norms: dict = field(default_factory=dict)

    @property
    def I1(self) -> np.ndarray:
        return self.I11 + self.I12

    @property
    def total(self) -> np.ndarray:
        return self.I1 - self.I2 - self.I3 + self.I4 + self.I5


def _interaction_power(a: AnsatzSpec, y, p: float):
    """((sum_j U_j)^p - sum_j U_j^p, sum_j U_j, sum_j U_j^p), stable when one bubble dominates."""
    vals = np.stack([eval_bubble(b, y) for b in a.bubbles()], axis=-1)
    imax = np.argmax(vals, axis=-1)
    top = np.take_along_axis(vals, imax[..., None], axis=-1)[..., 0]
    rest = vals.copy()
    np.put_along_axis(rest, imax[..., None], 0.0, axis=-1)
    S = rest.sum(axis=-1)
    powsum_rest = (rest ** p).sum(axis=-1)
    diff = top ** p * np.expm1(p * np.log1p(S / top)) - powsum_rest
    return diff, top + S, top ** p + powsum_rest


def assemble_error_term(a: AnsatzSpec, pot: PotentialModel, points) -> ErrorTermBreakdown:
    sp = a.space
    m = sp.m
    if m not in SUPPORTED_M:
        raise NotImplementedError(f"error-term assembly supports m in {SUPPORTED_M}")
    if not a.with_cutoff:
        raise ValueError("error terms are defined for the cut-off ansatz")
    y = np.atleast_2d(np.asarray(points, dtype=float))
    cut = a.cutoff
    p = sp.m_star_f - 1.0
    diff, zs, powsum = _interaction_power(a, y, p)
    xi = cut.value(y)
    Q = pot.Q_at(y)
    I11 = Q * (xi ** p * diff + (xi ** p - xi) * powsum)
    I12 = pot.Qdev_at(y) * xi * powsum
    I2 = pot.V_at(y) * xi * zs

    sigma, _ = cut.coords(y)
    shell = (sigma > cut.delta ** 2) & (sigma < 4 * cut.delta ** 2)
    if not np.any(shell):
        warnings.warn("no sample point lies on the cutoff transition shell; I3-I5 vanish there",
                      SampleOutsideSupportWarning)
    I3, I4, I5 = (np.zeros(len(y)) for _ in range(3))
    if np.any(shell):
        ys = y[shell]
        gxi = cut.grad_neg_lap_power(ys, 0)
        gz = star_sum(a, ys, 0, "grad")
        if m == 1:
            I3[shell] = zs[shell] * cut.neg_lap_power(ys, 1)
            I4[shell] = 2.0 * np.einsum("ij,ij->i", gxi, gz)
        else:
            xi1 = cut.neg_lap_power(ys, 1)
            xi2 = cut.neg_lap_power(ys, 2)
            z1 = star_sum(a, ys, 1)
            I3[shell] = zs[shell] * xi2 + 2.0 * xi1 * z1
            I4[shell] = 4.0 * (np.einsum("ij,ij->i", cut.grad_neg_lap_power(ys, 1), gz)
                               + np.einsum("ij,ij->i", gxi, star_sum(a, ys, 1, "grad")))
            I5[shell] = I5_COEFFICIENT[2] * np.einsum(
                "ijk,ijk->i", cut.hess_neg_lap_power(ys, 0), star_sum(a, ys, 0, "hess"))
    return ErrorTermBreakdown(points=y, I11=I11, I12=I12, I2=I2, I3=I3, I4=I4, I5=I5)


def error_field(a: AnsatzSpec, pot: PotentialModel):
    return lambda y: assemble_error_term(a, pot, y).total


def breakdown_norms(br: ErrorTermBreakdown, norm: WeightedNorm) -> dict:
    w = norm.weight(br.points)
    out = {}
    for name in ("I11", "I12", "I2", "I3", "I4", "I5", "total"):
        v = getattr(br, name)
        out[name] = float(np.max(np.abs(v) / w))
    br.norms = out
    return out


# ------------------------------------------------------------ slope sweeps

def case1_config(regime: RegimeParams, k: int, t: float, pot: PotentialModel) -> DoubleCircleConfig:
    lam = regime.lam(k, t)
    return DoubleCircleConfig(pot.r0, regime.h_bar(lam), tuple(pot.w0), k, lam)


def error_scaling_fit(space: SpaceSpec, pot: PotentialModel, regime: RegimeParams, k_range,
                      t: float = 1.0, sample_budget: int = 4000, seed: int = 0,
                      eps: float = 0.1, delta: float | None = None) -> ExpansionFit:
    """Fit log ||E_k||_** against log lam along lam = t k^{(N-2m)/(N-4m-nu)}.

    meta holds the per-k norms, the one-sided bound -(2m+1-beta1)/2 + eps
    and whether the fitted slope respects it.  The norm estimates are lower
    bounds of the true supremum.
    """
    if regime.case_id is not Case.CASE1:
        raise ValueError("the error sweep is defined along the Case1 scaling")
    lams, norms, per_term, argmaxes = [], [], [], []
    cut = CutoffSpec.default(space, pot.r0, tuple(pot.w0), delta)
    for k in k_range:
        cfg = case1_config(regime, int(k), t, pot)
        a = AnsatzSpec(cfg, cut)
        nrm = WeightedNorm(DOUBLE_STAR, cfg, regime, sample_budget)
        pts = structured_samples(cfg, cut, sample_budget, seed)
        br = assemble_error_term(a, pot, pts)
        terms = breakdown_norms(br, nrm)
        w = nrm.weight(pts)
        i = int(np.argmax(np.abs(br.total) / w))
        lams.append(cfg.lam)
        norms.append(terms["total"])
        per_term.append(terms)
        argmaxes.append(pts[i].tolist())
    fit = loglog_fit(lams, norms)
    bound = -(2 * space.m + 1 - float(regime.beta1)) / 2.0 + eps
    meta = {"lambdas": lams, "norms": norms, "terms": per_term, "argmax": argmaxes,
            "bound": bound, "passed": fit.exponent <= bound, "lower_bound_estimate": True}
    return ExpansionFit(fit.exponent, fit.coefficient, fit.r_squared, fit.residuals,
                        tuple(norms), meta)
