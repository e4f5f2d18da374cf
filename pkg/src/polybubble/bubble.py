"""Closed-form bubble U_{x,lam}, its derivatives and its polyharmonic image."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import DoubleCircleConfig, RegimeParams, SpaceSpec, generate_centers


class RadialProfile:
    """Profile g(rho) = sum_b c_b w^b with w = 1/(1 + rho), rho = |z|^2.

    Coefficients and exponents are exact rationals, so iterated Laplacians
    cancel exactly instead of in floating point.
    """

    def __init__(self, N: int, terms: dict):
        self.N = N
        self.terms = {Fraction(b): Fraction(c) for b, c in terms.items() if c != 0}

    def __repr__(self):
        body = " + ".join(f"({c})w^{b}" for b, c in sorted(self.terms.items()))
        return f"RadialProfile(N={self.N}: {body or '0'})"

    def _combine(self, items):
        out: dict = {}
        for b, c in items:
            out[b] = out.get(b, Fraction(0)) + c
        return RadialProfile(self.N, out)

    def d_rho(self) -> "RadialProfile":
        # d/drho w^b = -b w^{b+1}
        return self._combine((b + 1, -b * c) for b, c in self.terms.items())

    def laplacian(self) -> "RadialProfile":
        """Profile of Delta_z g(|z|^2) in R^N: 4 rho g'' + 2N g'."""
        items = []
        for b, c in self.terms.items():
            k2 = 4 * b * (b + 1) * c          # 4 rho g'' with rho = 1/w - 1
            items.append((b + 1, k2))
            items.append((b + 2, -k2))
            items.append((b + 1, -2 * self.N * b * c))
        return self._combine(items)

    def neg_laplacian(self) -> "RadialProfile":
        lap = self.laplacian()
        return RadialProfile(self.N, {b: -c for b, c in lap.terms.items()})

    def __call__(self, rho):
        w = 1.0 / (1.0 + np.asarray(rho, dtype=float))
        out = np.zeros_like(w)
        for b, c in sorted(self.terms.items()):
            out = out + float(c) * w ** float(b)
        return out


@functools.lru_cache(maxsize=None)
def polyharmonic_profiles(N: int, m: int, upto: int | None = None) -> tuple:
    """Profiles of (-Delta)^l (1+rho)^{-(N-2m)/2} for l = 0..upto (default 2m)."""
    s = Fraction(N - 2 * m, 2)
    prof = RadialProfile(N, {s: 1})
    out = [prof]
    for _ in range(upto if upto is not None else 2 * m):
        prof = prof.neg_laplacian()
        out.append(prof)
    return tuple(out)


@dataclass(frozen=True)
class BubbleParams:
    center: np.ndarray
    lam: float
    space: SpaceSpec = field(repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))


def _rho(b: BubbleParams, y):
    z = np.asarray(y, dtype=float) - b.center
    return z, b.lam ** 2 * np.einsum("...i,...i->...", z, z)


def eval_bubble(b: BubbleParams, y):
    """P^{(N-2m)/(4m)} (lam / (1 + lam^2 |y-x|^2))^{(N-2m)/2}."""
    sp = b.space
    _, rho = _rho(b, y)
    s = sp.gamma / 2.0
    return sp.bubble_amplitude * (b.lam / (1.0 + rho)) ** s


def polyharm_bubble(b: BubbleParams, y, path: str = "identity"):
    """(-Delta)^m U_{x,lam}(y).

    path="identity" uses (-Delta)^m U = U^{m*-1}; path="radial" applies the
    exact radial Laplacian recurrence m times to the profile.
    """
    if path == "identity":
        return eval_bubble(b, y) ** (b.space.m_star_f - 1.0)
    if path == "radial":
        return neg_laplacian_power(b, y, b.space.m)
    raise ValueError(f"unknown path {path!r}")


def neg_laplacian_power(b: BubbleParams, y, l: int):
    """(-Delta)^l U_{x,lam}(y) from the exact profile recurrence."""
    sp = b.space
    prof = polyharmonic_profiles(sp.N, sp.m, max(l, 2 * sp.m))[l]
    _, rho = _rho(b, y)
    scale = sp.bubble_amplitude * b.lam ** (sp.gamma / 2.0 + 2 * l)
    return scale * prof(rho)


def grad_neg_laplacian_power(b: BubbleParams, y, l: int):
    """Gradient in y of (-Delta)^l U, shape (..., N)."""
    sp = b.space
    prof = polyharmonic_profiles(sp.N, sp.m, max(l, 2 * sp.m))[l].d_rho()
    z, rho = _rho(b, y)
    scale = sp.bubble_amplitude * b.lam ** (sp.gamma / 2.0 + 2 * l)
    return (scale * 2.0 * b.lam ** 2 * prof(rho))[..., None] * z


def hess_neg_laplacian_power(b: BubbleParams, y, l: int):
    """Hessian in y of (-Delta)^l U, shape (..., N, N)."""
    sp = b.space
    p1 = polyharmonic_profiles(sp.N, sp.m, max(l, 2 * sp.m))[l].d_rho()
    p2 = p1.d_rho()
    z, rho = _rho(b, y)
    scale = sp.bubble_amplitude * b.lam ** (sp.gamma / 2.0 + 2 * l)
    lam2 = b.lam ** 2
    eye = np.eye(sp.N)
    g1 = scale * 2.0 * lam2 * p1(rho)
    g2 = scale * 4.0 * lam2 ** 2 * p2(rho)
    return g1[..., None, None] * eye + g2[..., None, None] * (z[..., :, None] * z[..., None, :])


def bubble_derivatives(b: BubbleParams, y):
    """(dU/dlam, grad_x U) at fixed center resp. fixed lam."""
    sp = b.space
    z, rho = _rho(b, y)
    s = sp.gamma / 2.0
    u = sp.bubble_amplitude * (b.lam / (1.0 + rho)) ** s
    # log U = s log lam - s log(1 + lam^2 |z|^2)
    d_lam = u * s * (1.0 / b.lam - 2.0 * b.lam * (rho / b.lam ** 2) / (1.0 + rho))
    d_center = (u * 2.0 * s * b.lam ** 2 / (1.0 + rho))[..., None] * z
    return d_lam, d_center


def center_velocity(cfg: DoubleCircleConfig, dh_dlam: float) -> np.ndarray:
    """d x_j^{+-} / d lam through h(lam) at fixed r, shape (2k, N)."""
    k = cfg.k
    ang = 2.0 * np.pi * np.arange(k) / k
    h = cfg.h_bar
    c = math.sqrt(1.0 - h * h)
    dR = -cfg.r_bar * h / c * dh_dlam
    vel = np.zeros((2 * k, cfg.N))
    for half, sgn in ((0, 1.0), (1, -1.0)):
        sl = slice(half * k, (half + 1) * k)
        vel[sl, 0] = dR * np.cos(ang)
        vel[sl, 1] = dR * np.sin(ang)
        vel[sl, 2] = sgn * cfg.r_bar * dh_dlam
    return vel


@dataclass
class DerivativeBoundReport:
    lam: float
    beta: float
    constant: float        # smallest C with |dU/dlam| <= C U / lam^beta on the samples
    max_log_derivative: float   # max |d log U / d lam|
    argmax: np.ndarray


def derivative_bound_check(cfg: DoubleCircleConfig, regime: RegimeParams | None, space: SpaceSpec,
                           samples: int = 2000, seed: int = 0, frozen_h: bool = False,
                           beta: float | None = None) -> DerivativeBoundReport:
    """Total lambda-derivative of U_{x_1^+(lam), lam} against C U / lam^beta.

    Samples are spread in lam-scaled shells around x_1^+ (|y - x| lam in
    [1e-3, 1e3]).  With frozen_h the centers do not move and beta defaults to 1.
    """
    if not frozen_h:
        if regime is None:
            raise ValueError("regime required unless frozen_h")
        regime.check(cfg)
    lam = cfg.lam
    x = generate_centers(cfg)[0]
    if frozen_h:
        vel = np.zeros(cfg.N)
        beta_v = 1.0 if beta is None else beta
    else:
        vel = center_velocity(cfg, regime.dh_dlam(lam))[0]
        beta_v = float(regime.beta) if beta is None else beta
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, cfg.N))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if np.linalg.norm(vel) > 0:
        # include the directions along which center motion is felt most
        dirs[:4] = np.array([vel, -vel, vel, -vel]) / np.linalg.norm(vel)
    radii = 10.0 ** rng.uniform(-3, 3, samples) / lam
    radii[:4] = [1.0 / lam, 1.0 / lam, 0.5 / lam, 2.0 / lam]
    y = x + radii[:, None] * dirs
    bp = BubbleParams(x, lam, space)
    u = eval_bubble(bp, y)
    d_lam, d_center = bubble_derivatives(bp, y)
    total = d_lam + d_center @ vel
    ratio = np.abs(total) / u
    i = int(np.argmax(ratio))
    return DerivativeBoundReport(lam=lam, beta=beta_v, constant=float(ratio[i] * lam ** beta_v),
                                 max_log_derivative=float(ratio[i]), argmax=y[i])
