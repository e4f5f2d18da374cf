"""Cutoff function xi and the multi-bubble ansatz Z / Z*.

xi depends on y only through sigma = (|y'| - r0)^2 + |y'' - y0''|^2.  With
R = |y'| the pair (sigma, R) has closed-form metric data

    |grad sigma|^2 = 4 sigma,  grad sigma . grad R = 2 (R - r0),  |grad R|^2 = 1,
    Delta sigma = 2N - 4 r0 / R,  Delta R = 2 / R,

so iterated Laplacians of xi stay in the family sum_k A_k(sigma) R^{-k}
with polynomial A_k, and are computed exactly on the coefficient level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import Polynomial

from .bubble import (BubbleParams, grad_neg_laplacian_power, hess_neg_laplacian_power,
                     neg_laplacian_power)
from .core import DoubleCircleConfig, SpaceSpec, generate_centers


def smoothstep(order: int) -> Polynomial:
    """Polynomial S on [0,1], S(0)=0, S(1)=1, first `order` derivatives zero at both ends."""
    K = order
    coef = np.zeros(2 * K + 2)
    for n in range(K + 1):
        coef[K + 1 + n] = comb(K + n, n) * comb(2 * K + 1, K - n) * (-1) ** n
    return Polynomial(coef)


class SigmaRField:
    """sum_k A_k(sigma) R^{-k}; A_k are numpy Polynomials."""

    def __init__(self, parts: dict):
        self.parts = {k: p for k, p in parts.items() if np.any(p.coef != 0)}

    def laplacian(self, N: int, r0: float) -> "SigmaRField":
        out: dict = {}
        sig = Polynomial([0.0, 1.0])

        def add(k, p):
            out[k] = out[k] + p if k in out else p

        for k, A in self.parts.items():
            d1, d2 = A.deriv(1), A.deriv(2)
            add(k, 4.0 * sig * d2 + (2.0 * N - 4.0 * k) * d1)
            if k != 1:
                add(k + 1, 4.0 * r0 * (k - 1) * d1)
            if k >= 2:
                add(k + 2, float(k * (k - 1)) * A)
        return SigmaRField(out)

    def partials(self, sigma, R):
        """F, F_s, F_R, F_ss, F_sR, F_RR evaluated on arrays."""
        z = np.zeros_like(sigma)
        F, Fs, FR, Fss, FsR, FRR = (z.copy() for _ in range(6))
        for k, A in self.parts.items():
            Rk = R ** (-k)
            a0, a1, a2 = A(sigma), A.deriv(1)(sigma), A.deriv(2)(sigma)
            F += a0 * Rk
            Fs += a1 * Rk
            Fss += a2 * Rk
            FR += -k * a0 * Rk / R
            FsR += -k * a1 * Rk / R
            FRR += k * (k + 1) * a0 * Rk / R ** 2
        return F, Fs, FR, Fss, FsR, FRR


@dataclass(frozen=True)
class CutoffSpec:
    r0: float
    y0_2: tuple
    delta: float
    space: SpaceSpec = field(repr=False)
    order: int | None = None   # smoothness; default 2m + 1

    def __post_init__(self):
        if self.r0 <= 0 or self.delta <= 0:
            raise ValueError("r0 and delta must be positive")
        if 2 * self.delta >= self.r0:
            raise ValueError("need 2 delta < r0 so the support avoids the axis y' = 0")
        object.__setattr__(self, "y0_2", tuple(float(v) for v in self.y0_2))
        if len(self.y0_2) != self.space.N - 3:
            raise ValueError("y0'' must have N - 3 components")
        if self.order is None:
            object.__setattr__(self, "order", 2 * self.space.m + 1)
        if self.order < 2 * self.space.m + 1:
            raise ValueError("cutoff must be at least C^{2m+1}")

    @classmethod
    def default(cls, space: SpaceSpec, r0: float, y0_2=None, delta=None):
        y0_2 = tuple([0.0] * (space.N - 3)) if y0_2 is None else y0_2
        return cls(r0, y0_2, 0.1 * r0 if delta is None else delta, space)

    # sigma-profile of xi on the transition shell, and its Laplacian tower
    def _tower(self):
        cache = self.__dict__.get("_tower_cache")
        if cache is None:
            d2 = self.delta ** 2
            S = smoothstep(self.order)
            # x = (sigma - d^2) / (3 d^2)
            lin = Polynomial([-d2 / (3 * d2), 1.0 / (3 * d2)])
            p = Polynomial([1.0]) - S(lin)
            tower = [SigmaRField({0: p})]
            for _ in range(2 * self.space.m):
                tower.append(tower[-1].laplacian(self.space.N, self.r0))
            cache = tuple(tower)
            object.__setattr__(self, "_tower_cache", cache)
        return cache

    def coords(self, y):
        y = np.asarray(y, dtype=float)
        R = np.sqrt(np.einsum("...i,...i->...", y[..., :3], y[..., :3]))
        w = y[..., 3:] - np.asarray(self.y0_2)
        sigma = (R - self.r0) ** 2 + np.einsum("...i,...i->...", w, w)
        return sigma, R

    def s_dist(self, y):
        """|(|y'|, y'') - (r0, y0'')|."""
        return np.sqrt(self.coords(y)[0])

    def _mask(self, sigma):
        d2 = self.delta ** 2
        return (sigma > d2) & (sigma < 4 * d2)

    def value(self, y):
        return self.neg_lap_power(y, 0)

    def neg_lap_power(self, y, l: int):
        """(-Delta)^l xi."""
        sigma, R = self.coords(y)
        inner = sigma <= self.delta ** 2
        out = np.where(inner, 1.0 if l == 0 else 0.0, 0.0).astype(float)
        mid = self._mask(sigma)
        if np.any(mid):
            F = self._tower()[l].partials(sigma[mid], R[mid])[0]
            out[mid] = (-1) ** l * F
        return out

    def _geometry(self, y, sigma, R):
        N = self.space.N
        e = np.zeros(y.shape)
        e[..., :3] = y[..., :3] / R[..., None]
        gs = 2.0 * (y - np.concatenate([np.zeros(y.shape[:-1] + (3,)),
                                        np.broadcast_to(self.y0_2, y.shape[:-1] + (N - 3,))],
                                       axis=-1)) - 2.0 * self.r0 * e
        return e, gs

    def grad_neg_lap_power(self, y, l: int):
        y = np.asarray(y, dtype=float)
        sigma, R = self.coords(y)
        out = np.zeros(y.shape)
        mid = self._mask(sigma)
        if np.any(mid):
            ym, sm, Rm = y[mid], sigma[mid], R[mid]
            _, Fs, FR, *_ = self._tower()[l].partials(sm, Rm)
            e, gs = self._geometry(ym, sm, Rm)
            out[mid] = (-1) ** l * (Fs[:, None] * gs + FR[:, None] * e)
        return out

    def hess_neg_lap_power(self, y, l: int):
        y = np.asarray(y, dtype=float)
        N = self.space.N
        sigma, R = self.coords(y)
        out = np.zeros(y.shape + (N,))
        mid = self._mask(sigma)
        if np.any(mid):
            ym, sm, Rm = y[mid], sigma[mid], R[mid]
            _, Fs, FR, Fss, FsR, FRR = self._tower()[l].partials(sm, Rm)
            e, gs = self._geometry(ym, sm, Rm)
            P = np.zeros((len(sm), N, N))
            P[:, :3, :3] = np.eye(3) - e[:, :3, None] * e[:, None, :3]
            Rij = P / Rm[:, None, None]
            sij = 2.0 * np.eye(N) - 2.0 * self.r0 * Rij
            outer = lambda a, b: a[:, :, None] * b[:, None, :]
            H = (Fss[:, None, None] * outer(gs, gs)
                 + FsR[:, None, None] * (outer(gs, e) + outer(e, gs))
                 + FRR[:, None, None] * outer(e, e)
                 + Fs[:, None, None] * sij + FR[:, None, None] * Rij)
            out[mid] = (-1) ** l * H
        return out


@dataclass(frozen=True)
class AnsatzSpec:
    cfg: DoubleCircleConfig
    cutoff: CutoffSpec
    with_cutoff: bool = True

    def __post_init__(self):
        c = generate_centers(self.cfg)
        s = self.cutoff.s_dist(c)
        if np.any(s > self.cutoff.delta):
            raise ValueError("ansatz centers must lie where xi = 1")

    @property
    def space(self) -> SpaceSpec:
        return self.cutoff.space

    @property
    def centers(self) -> np.ndarray:
        return generate_centers(self.cfg)

    def bubbles(self):
        return [BubbleParams(x, self.cfg.lam, self.space) for x in self.centers]


def _chunks(n, size=4096):
    for i in range(0, n, size):
        yield slice(i, min(n, i + size))


def star_sum(a: AnsatzSpec, y, l: int = 0, what: str = "value"):
    """sum_j of (-Delta)^l U_j (what = value | grad | hess) at points y (..., N)."""
    y = np.asarray(y, dtype=float)
    fn = {"value": neg_laplacian_power, "grad": grad_neg_laplacian_power,
          "hess": hess_neg_laplacian_power}[what]
    out = None
    for b in a.bubbles():
        v = fn(b, y, l)
        out = v if out is None else out + v
    return out


def eval_ansatz(a: AnsatzSpec, y):
    """Z (with cutoff) or Z* (without) at y."""
    zs = star_sum(a, y)
    if not a.with_cutoff:
        return zs
    return a.cutoff.value(y) * zs
