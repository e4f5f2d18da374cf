"""Potentials V(r, y'') and Q(r, y'') with a flat critical point of Q.

Both are functions of r = |y'| and y'' only.  Partial derivatives are taken
by the complex-step method, which is exact to rounding for the analytic
closed forms used here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import SpaceSpec


def _multinomial(n, parts):
    out = math.factorial(n)
    for p in parts:
        out //= math.factorial(p)
    return out


def radial_power_taylor(d: int, p: int, coef: float) -> dict:
    """Monomial coefficients of coef * |z|^{2p}, z in R^d, keyed by exponent tuples."""
    out = {}
    for parts in itertools.product(range(p + 1), repeat=d):
        if sum(parts) != p:
            continue
        beta = tuple(2 * q for q in parts)
        out[beta] = coef * _multinomial(p, parts)
    return out


@dataclass(frozen=True)
class PotentialModel:
    """V and Q = 1 + Q_dev as callables of (r, w), w = y'' with shape (..., N-3).

    taylor_2m holds the degree-2m Taylor polynomial of Q at the critical
    point in z = (r - r0, w - w0), keyed by exponent tuples of length N-2.
    """

    V: object
    Q_dev: object
    critical_point: tuple
    flatness_order: int
    taylor_2m: dict
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    @property
    def r0(self) -> float:
        return float(self.critical_point[0])

    @property
    def w0(self) -> np.ndarray:
        return np.asarray(self.critical_point[1], dtype=float)

    def Q(self, r, w):
        return 1.0 + self.Q_dev(r, w)

    # evaluation at points y of R^N
    @staticmethod
    def split(y):
        y = np.asarray(y, dtype=float)
        return np.linalg.norm(y[..., :3], axis=-1), y[..., 3:]

    def V_at(self, y):
        return self.V(*self.split(y))

    def Q_at(self, y):
        return self.Q(*self.split(y))

    def Qdev_at(self, y):
        return self.Q_dev(*self.split(y))

    # derivatives in (r, w)
    def _cstep(self, fn, r, w, idx, h=1e-30):
        r = np.asarray(r, dtype=complex)
        w = np.array(w, dtype=complex)
        if idx == 0:
            return np.imag(fn(r + 1j * h, w)) / h
        w[..., idx - 1] += 1j * h
        return np.imag(fn(r, w)) / h

    def grad(self, which: str, r, w):
        """(d/dr, d/dw_1, ..., d/dw_{N-3}) of V or Q, stacked on the last axis."""
        fn = self.V if which == "V" else self.Q_dev
        w = np.asarray(w, dtype=float)
        n = w.shape[-1] + 1
        return np.stack([self._cstep(fn, r, w, i) for i in range(n)], axis=-1)

    def hess_Q(self, r, w, h=1e-5):
        """Hessian of Q in (r, w) by central differences of the complex-step gradient."""
        w = np.asarray(w, dtype=float)
        n = w.shape[-1] + 1
        H = np.zeros(np.shape(r) + (n, n))
        for i in range(n):
            dr = np.zeros(n)
            dr[i] = h
            gp = self.grad("Q", r + dr[0], w + dr[1:])
            gm = self.grad("Q", r - dr[0], w - dr[1:])
            H[..., i, :] = (gp - gm) / (2 * h)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    def grad_at(self, which: str, y):
        """Cartesian gradient in y of V or Q via the chain rule through r = |y'|."""
        y = np.asarray(y, dtype=float)
        r, w = self.split(y)
        g = self.grad(which, r, w)
        out = np.zeros(y.shape)
        out[..., :3] = g[..., :1] * y[..., :3] / r[..., None]
        out[..., 3:] = g[..., 1:]
        return out

    def check_flatness(self, tol: float = 1e-7, radius: float = 1e-3) -> float:
        """Max of |Q - 1| / s^{flatness} on a small sphere around the critical point (bounded if flat)."""
        rng = np.random.default_rng(0)
        n = len(self.w0) + 1
        d = rng.standard_normal((64, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        p = d * radius
        vals = self.Q_dev(self.r0 + p[:, 0], self.w0 + p[:, 1:])
        return float(np.max(np.abs(vals)) / radius ** self.flatness_order)


def builtin_model(space: SpaceSpec, r0: float = 1.0, y0_2=None, *, v0: float = 1.0, v1: float = 0.0,
                  v2: float = 0.0, c: float = 0.5, b: float = 0.0, bw: float = 0.0,
                  p: int | None = None) -> PotentialModel:
    """The reference family used throughout.

    V = v0 + v1 tanh(r - r0) + v2 |w - w0|^2 / (1 + |w - w0|^2)
    Q = 1 + (-c + b (r - r0) + bw (w_1 - w0_1)) s^{2p} / (1 + s^{2p+2}),
    s^2 = (r - r0)^2 + |w - w0|^2

    Q - 1 vanishes to order 2p - 1 at (r0, w0) (p defaults to m), its
    degree-2p Taylor part is -c s^{2p}, and (r0, w0) is an isolated
    critical point of Q whenever c != 0.  c < 0 flips the sign of the
    Taylor term.
    """
    m = space.m
    p = m if p is None else int(p)
    if p < m:
        raise ValueError("flatness below order 2m - 1 is excluded")
    y0_2 = np.zeros(space.N - 3) if y0_2 is None else np.asarray(y0_2, dtype=float)
    if len(y0_2) != space.N - 3:
        raise ValueError("y0'' must have N - 3 components")
    if v0 < abs(v1) + abs(v2) * (v2 < 0):
        raise ValueError("V must stay nonnegative: need v0 >= |v1| (+|v2| if v2 < 0)")
    if abs(c) + abs(b) + abs(bw) > 1.0:
        raise ValueError("Q must stay nonnegative: need |c| + |b| + |bw| <= 1")
    w0 = tuple(float(v) for v in y0_2)
    w0a = np.asarray(w0)

    def V(r, w):
        q = np.sum((w - w0a) ** 2, axis=-1)
        return v0 + v1 * np.tanh(r - r0) + v2 * q / (1.0 + q)

    def Q_dev(r, w):
        s2 = (r - r0) ** 2 + np.sum((w - w0a) ** 2, axis=-1)
        lin = -c + b * (r - r0) + bw * (w[..., 0] - w0a[0]) if len(w0a) else -c + b * (r - r0)
        return lin * s2 ** p / (1.0 + s2 ** (p + 1))

    taylor = radial_power_taylor(space.N - 2, m, -c) if p == m else {}
    return PotentialModel(V=V, Q_dev=Q_dev, critical_point=(float(r0), w0), flatness_order=2 * p,
                          taylor_2m=taylor, name="builtin",
                          params=dict(r0=r0, v0=v0, v1=v1, v2=v2, c=c, b=b, bw=bw, p=p))
