"""Interaction sums over the double-circle configuration and their asymptotics.

For gamma > 1 the same-circle sum grows like k^gamma / R^gamma with
R = r sqrt(1 - h^2); the chord-by-arc approximation gives the limiting
prefactor 2 zeta(gamma) / (2 pi)^gamma.  For gamma = 1 it grows like
(k / (pi R)) log k and for gamma < 1 like k / R^gamma times
int_0^1 (2 sin(pi x))^{-gamma} dx.  The cross-circle sum with h -> 0,
h k -> inf behaves like A2 k / (h^{gamma-1} sqrt(1-h^2) r^gamma).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import DoubleCircleConfig, SpaceSpec
from .fitting import ExpansionFit, difference_ratios, loglog_fit, richardson, richardson_table


class ScheduleMismatchError(ValueError):
    pass


class Branch(str, enum.Enum):
    SUPER = "super1"   # gamma > 1
    CRIT = "crit1"     # gamma = 1
    SUB = "sub1"       # gamma < 1


def branch_of(gamma: float) -> Branch:
    if gamma > 1:
        return Branch.SUPER
    if gamma == 1:
        return Branch.CRIT
    return Branch.SUB


@dataclass(frozen=True)
class SumResult:
    value: float
    k: int
    gamma: float
    regime_tag: Branch


def _same_distances(cfg: DoubleCircleConfig) -> np.ndarray:
    j = np.arange(1, cfg.k)
    return 2.0 * cfg.radius * np.sin(j * np.pi / cfg.k)


def _cross_distances(cfg: DoubleCircleConfig) -> np.ndarray:
    j = np.arange(cfg.k)
    s = np.sin(j * np.pi / cfg.k)
    return np.sqrt(4.0 * cfg.radius ** 2 * s * s + 4.0 * (cfg.r_bar * cfg.h_bar) ** 2)


def same_circle_sum(cfg: DoubleCircleConfig, gamma: float) -> SumResult:
    """sum_{j=2}^k |x_j^+ - x_1^+|^{-gamma}."""
    if cfg.k < 2:
        raise ValueError("same-circle sum needs k >= 2")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    d = _same_distances(cfg)
    return SumResult(math.fsum(d ** (-gamma)), cfg.k, gamma, branch_of(gamma))


def cross_circle_sum(cfg: DoubleCircleConfig, gamma: float) -> SumResult:
    """sum_{j=1}^k |x_j^- - x_1^+|^{-gamma}."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    d = _cross_distances(cfg)
    return SumResult(math.fsum(d ** (-gamma)), cfg.k, gamma, branch_of(gamma))


# ------------------------------------------------------------ limit values

def a1_limit(gamma: float) -> float:
    """lim sum * R^gamma / k^gamma for gamma > 1."""
    return 2.0 * special.zeta(gamma) / (2.0 * math.pi) ** gamma


def sub_limit(gamma: float) -> float:
    """lim sum * R^gamma / k for 0 < gamma < 1."""
    return (2.0 ** (-gamma) * math.gamma(0.5) * math.gamma((1 - gamma) / 2)
            / (math.pi * math.gamma(1 - gamma / 2)))


def a2_limit(gamma: float) -> float:
    """lim cross * h^{gamma-1} sqrt(1-h^2) r^gamma / k when h -> 0, h k -> inf (gamma > 1)."""
    return 2.0 ** (1 - gamma) * math.gamma((gamma - 1) / 2) / (2.0 * math.sqrt(math.pi) * math.gamma(gamma / 2))


# --------------------------------------------------------------- branches

@dataclass(frozen=True)
class BranchReport:
    branch: Branch
    gamma: float
    ks: tuple
    normalized: tuple        # the quantity predicted to converge (or the log k slope data)
    predicted: float
    estimate: float          # extrapolated limit (or fitted log k coefficient)
    rel_error: float
    growth_exponent: float

    @property
    def passed_3pct(self) -> bool:
        return self.rel_error <= 0.03


def branch_scaling(gamma: float, ks=None, r_bar: float = 1.0, h_bar: float = 0.5) -> BranchReport:
    """Check the k-scaling of the same-circle sum in the branch selected by gamma.

    The normalized sequence is extrapolated with Richardson passes matched to
    the known correction orders on a doubling k-grid and compared to the
    predicted limit.  In the critical branch, sum * R / k is regressed on
    log k and its slope compared to 1/pi.
    """
    ks = np.asarray(2 ** np.arange(6, 13) if ks is None else ks)
    cfgs = [DoubleCircleConfig(r_bar, h_bar, (), int(k), 1.0) for k in ks]
    R = cfgs[0].radius
    s = np.array([same_circle_sum(c, gamma).value for c in cfgs])
    fit = loglog_fit(ks, s)
    br = branch_of(gamma)
    if br is Branch.SUPER:
        norm = s * R ** gamma / ks ** gamma
        # corrections k^{-2}, k^{-4}, ... plus k^{1-gamma} for non-even gamma
        orders = sorted({2.0, 4.0} | ({gamma - 1.0} if gamma % 2 else set()))
        est = richardson_table(norm, 2.0, orders)[-1][-1]
        pred = a1_limit(gamma)
    elif br is Branch.SUB:
        norm = s * R ** gamma / ks
        est = richardson_table(norm, 2.0, [1 - gamma, 2 - gamma, 3 - gamma])[-1][-1]
        pred = sub_limit(gamma)
    else:
        norm = s * R / ks
        A = np.vstack([np.log(ks), np.ones(len(ks))]).T
        est = float(np.linalg.lstsq(A, norm, rcond=None)[0][0])
        pred = 1.0 / math.pi
    return BranchReport(br, gamma, tuple(int(k) for k in ks), tuple(float(v) for v in norm),
                        pred, float(est), abs(est - pred) / pred, fit.exponent)


def fit_A_constants(space: SpaceSpec, k_range=None, h_schedule=None, r_bar: float = 1.0,
                    h_bar_same: float = 0.5):
    """(A1_fit, A2_fit) for gamma = N - 2m.

    A1: prefactor sum * (r sqrt(1-h^2))^gamma / k^gamma; fit.exponent is the
    log-log growth exponent of the raw sum, fit.coefficient the Richardson
    limit, fit.sequence the raw prefactors.  A2: prefactor
    cross * h^{gamma-1} sqrt(1-h^2) r^gamma / k along h_schedule.
    """
    gamma = float(space.gamma)
    ks = np.asarray(2 ** np.arange(6, 13) if k_range is None else list(k_range))
    if h_schedule is None:
        h_schedule = lambda k: k ** -0.5
    hs = np.array([h_schedule(int(k)) for k in ks], dtype=float)
    inv = 1.0 / (hs * ks)
    if np.any(np.diff(inv) >= 0):
        raise ScheduleMismatchError("1/(h k) must decrease along the k-grid")

    same = []
    for k in ks:
        cfg = DoubleCircleConfig(r_bar, h_bar_same, (), int(k), 1.0)
        same.append(same_circle_sum(cfg, gamma).value)
    same = np.array(same)
    R = r_bar * math.sqrt(1 - h_bar_same ** 2)
    pref1 = same * R ** gamma / ks ** gamma
    f1 = loglog_fit(ks, same)
    rich1 = richardson(pref1, float(ks[1] / ks[0]), 2.0)
    A1 = ExpansionFit(exponent=f1.exponent, coefficient=float(rich1[-1]), r_squared=f1.r_squared,
                      residuals=f1.residuals, sequence=tuple(float(p) for p in pref1),
                      meta={"richardson": [float(v) for v in rich1],
                            "difference_ratios": [float(v) for v in difference_ratios(pref1)],
                            "predicted": a1_limit(gamma)})

    cross, pref2 = [], []
    for k, h in zip(ks, hs):
        cfg = DoubleCircleConfig(r_bar, float(h), (), int(k), 1.0)
        c = cross_circle_sum(cfg, gamma).value
        cross.append(c)
        pref2.append(c * h ** (gamma - 1) * math.sqrt(1 - h * h) * r_bar ** gamma / k)
    pref2 = np.array(pref2)
    f2 = loglog_fit(ks, cross)
    pred2 = a2_limit(gamma)
    A2 = ExpansionFit(exponent=f2.exponent, coefficient=float(pref2[-1]), r_squared=f2.r_squared,
                      residuals=f2.residuals, sequence=tuple(float(p) for p in pref2),
                      meta={"predicted": pred2,
                            # remainder relative to the leading model, reported only
                            "remainder": [float(p / pred2 - 1.0) for p in pref2]})
    return A1, A2


def cross_bound_constant(cfg: DoubleCircleConfig, gamma: float) -> float:
    """Smallest C with cross <= same + C / (r h)^gamma for this configuration."""
    c = cross_circle_sum(cfg, gamma).value
    s = same_circle_sum(cfg, gamma).value if cfg.k >= 2 else 0.0
    return max(0.0, (c - s) * (cfg.r_bar * cfg.h_bar) ** gamma)


def hk_const_bracket(space: SpaceSpec, c: float, ks=None, r_bar: float = 1.0):
    """cross * h^{gamma-1} / k along h = c / k; returns the list of values."""
    gamma = float(space.gamma)
    ks = 2 ** np.arange(6, 13) if ks is None else ks
    out = []
    for k in ks:
        h = c / k
        cfg = DoubleCircleConfig(r_bar, h, (), int(k), 1.0)
        out.append(cross_circle_sum(cfg, gamma).value * h ** (gamma - 1) / k)
    return np.array(out)


def interaction_inequality_check(x_i, x_j, kappa1: float, kappa2: float, sigma: float,
                                 samples: int = 4000, seed: int = 0) -> float:
    """max over sampled y of g_ij(y) |x_i - x_j|^sigma / (K_i(y) + K_j(y)).

    g_ij = (1+|y-x_i|)^{-kappa1} (1+|y-x_j|)^{-kappa2},
    K_l = (1+|y-x_l|)^{-(kappa1+kappa2-sigma)}.
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    d = float(np.linalg.norm(x_i - x_j))
    if d == 0:
        raise ValueError("x_i and x_j must differ")
    if kappa1 < 1 or kappa2 < 1 or sigma < 0 or sigma > min(kappa1, kappa2):
        raise ValueError("need kappa >= 1 and 0 <= sigma <= min(kappa1, kappa2)")
    rng = np.random.default_rng(seed)
    n = len(x_i)
    dirs = rng.standard_normal((samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    scale = d * 10.0 ** rng.uniform(-4, 2, samples)
    base = np.where(rng.random(samples)[:, None] < 0.5, x_i, x_j)
    y = base + scale[:, None] * dirs
    t = np.linspace(0, 1, 201)[:, None]
    y = np.concatenate([y, x_i + t * (x_j - x_i)])
    a = 1.0 + np.linalg.norm(y - x_i, axis=1)
    b = 1.0 + np.linalg.norm(y - x_j, axis=1)
    g = a ** (-kappa1) * b ** (-kappa2)
    e = kappa1 + kappa2 - sigma
    ratio = g * d ** sigma / (a ** (-e) + b ** (-e))
    return float(np.max(ratio))
