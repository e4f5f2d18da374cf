"""Bilinear Pohozaev functionals and local Pohozaev residuals of the ansatz.

L1(u, v)  = int (-Delta)^m u <y, grad v> + (-Delta)^m v <y, grad u>
L2i(u, v) = int (-Delta)^m u d_i v + (-Delta)^m v d_i u

For fields vanishing to order 2m on the boundary of the domain, L2i = 0 and
L1 = -(N - 2m)/2 int (v (-Delta)^m u + u (-Delta)^m v).  Two code paths are
provided: tensor-product polynomial bumps integrated by Gauss-Legendre
products, and generic callables integrated by adaptive cubature with the
derivatives taken by centered finite differences.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from .ansatz import AnsatzSpec
from .core import SpaceSpec
from .lattice import cross_circle_sum, same_circle_sum
from .potentials import PotentialModel
from .quadrature import POWER_MSTAR, POWER_TWO, QuadratureSpec, adaptive_cubature
from .reduced import B3_constant, mass_leading_order, moment_constants, pairing_terms


class RhoOutOfRangeError(ValueError):
    pass


class IdentityId(str, enum.Enum):
    RADIAL = "radial"
    TRANSLATIONAL = "translational"
    LAMBDA = "lambda"


def _compositions(m: int, n: int):
    """Multi-indices g in N^n with |g| = m and the multinomial m!/g!."""
    for parts in itertools.combinations_with_replacement(range(n), m):
        g = [0] * n
        for p in parts:
            g[p] += 1
        c = math.factorial(m)
        for q in g:
            c //= math.factorial(q)
        yield tuple(g), c


# ------------------------------------------------------ tensor-product bumps

@dataclass(frozen=True)
class Factor:
    """A polynomial on [lo, hi], zero outside."""
    poly: Polynomial
    lo: float
    hi: float

    def deriv(self, k: int) -> "Factor":
        return Factor(self.poly.deriv(k) if k else self.poly, self.lo, self.hi)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.lo) & (t <= self.hi), self.poly(t), 0.0)


def bump_factor(center: float, half_width: float, K: int, amplitude: float = 1.0) -> Factor:
    """amplitude * (1 - ((t - c)/a)^2)^K on [c - a, c + a]."""
    s = Polynomial([-center / half_width, 1.0 / half_width])
    return Factor(amplitude * (1 - s * s) ** K, center - half_width, center + half_width)


@dataclass(frozen=True)
class SeparableField:
    """u(y) = prod_j f_j(y_j) for piecewise-polynomial factors f_j."""
    factors: tuple

    @property
    def dim(self) -> int:
        return len(self.factors)

    @classmethod
    def bump(cls, center, half_widths, K: int, amplitude: float = 1.0):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        hw = np.broadcast_to(np.asarray(half_widths, dtype=float), center.shape)
        fs = [bump_factor(c, a, K) for c, a in zip(center, hw)]
        fs[0] = Factor(amplitude * fs[0].poly, fs[0].lo, fs[0].hi)
        return cls(tuple(fs))

    def dilate(self, lam: float, weight: float) -> "SeparableField":
        """lam^weight u(lam y)."""
        x = Polynomial([0.0, lam])
        fs = [Factor(f.poly(x), f.lo / lam, f.hi / lam) for f in self.factors]
        fs[0] = Factor(lam ** weight * fs[0].poly, fs[0].lo, fs[0].hi)
        return SeparableField(tuple(fs))

    # pointwise evaluation, used by the generic path and the tests
    def value(self, y):
        y = np.asarray(y, dtype=float)
        out = np.ones(y.shape[:-1])
        for j, f in enumerate(self.factors):
            out = out * f(y[..., j])
        return out

    def grad(self, y):
        y = np.asarray(y, dtype=float)
        vals = np.stack([f(y[..., j]) for j, f in enumerate(self.factors)], axis=-1)
        ders = np.stack([f.deriv(1)(y[..., j]) for j, f in enumerate(self.factors)], axis=-1)
        out = np.empty(y.shape)
        for i in range(self.dim):
            v = vals.copy()
            v[..., i] = ders[..., i]
            out[..., i] = np.prod(v, axis=-1)
        return out

    def polylap(self, y, m: int):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape[:-1])
        for g, c in _compositions(m, self.dim):
            term = np.full(y.shape[:-1], float(c))
            for j, f in enumerate(self.factors):
                term = term * f.deriv(2 * g[j])(y[..., j])
            out += term
        return (-1) ** m * out


def _gl_integral(p: Factor, q: Factor, a: float, b: float) -> float:
    lo, hi = max(p.lo, q.lo, a), min(p.hi, q.hi, b)
    if hi <= lo:
        return 0.0
    prod = p.poly * q.poly
    n = prod.degree() // 2 + 1
    x, w = leggauss(n)
    t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    return 0.5 * (hi - lo) * float(np.dot(w, prod(t)))


_T = Polynomial([0.0, 1.0])


def _sep_pairing(u: SeparableField, v: SeparableField, m: int, lo, hi, kind: str, i: int | None = None):
    """int over the box of (-Delta)^m u times (v | d_i v | y_i d_i v)."""
    tables = []
    for j in range(u.dim):
        fv = v.factors[j]
        if j == i and kind in ("d", "yd"):
            fv = fv.deriv(1)
            if kind == "yd":
                fv = Factor(_T * fv.poly, fv.lo, fv.hi)
        tables.append([_gl_integral(u.factors[j].deriv(2 * a), fv, lo[j], hi[j]) for a in range(m + 1)])
    total = math.fsum(c * math.prod(tables[j][g[j]] for j in range(u.dim))
                      for g, c in _compositions(m, u.dim))
    return (-1) ** m * total


def _sep_lap_sq(u: SeparableField, m: int, lo, hi) -> float:
    tables = [[[_gl_integral(f.deriv(2 * a), f.deriv(2 * b), lo[j], hi[j]) for b in range(m + 1)]
               for a in range(m + 1)] for j, f in enumerate(u.factors)]
    comps = list(_compositions(m, u.dim))
    return math.fsum(c * d * math.prod(tables[j][g[j]][h[j]] for j in range(u.dim))
                     for (g, c), (h, d) in itertools.product(comps, comps))


def _sep_grad_sq(u: SeparableField, i: int, lo, hi) -> float:
    term = 1.0
    for j, f in enumerate(u.factors):
        g = f.deriv(1) if j == i else f
        term *= _gl_integral(g, g, lo[j], hi[j])
    return term


# --------------------------------------------------------- generic fields

def _stencil(deriv: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the centered stencil for d^deriv/dt^deriv with given accuracy order."""
    half = (deriv + order - 1) // 2
    offs = np.arange(-half, half + 1, dtype=float)
    A = np.vander(offs, increasing=True).T
    rhs = np.zeros(len(offs))
    rhs[deriv] = math.factorial(deriv)
    return offs, np.linalg.solve(A, rhs)


@dataclass(frozen=True)
class GenericField:
    """A smooth callable u(y) on R^dim; missing derivatives are taken by finite differences.

    (-Delta)^m uses the order-(2m+2) centered second-difference Laplacian
    applied m times with step h, followed by one Richardson pass with h/2.
    """
    fn: object
    dim: int
    h: float = 1e-2
    grad_fn: object = None
    polylap_fn: object = None

    def value(self, y):
        return self.fn(np.asarray(y, dtype=float))

    def _lap(self, f, h, order):
        offs, w = _stencil(2, order)

        def g(y):
            acc = np.zeros(y.shape[:-1])
            for i in range(self.dim):
                e = np.zeros(self.dim)
                e[i] = h
                for o, c in zip(offs, w):
                    if c != 0.0:
                        acc = acc + c * f(y + o * e)
            return acc / (h * h)
        return g

    def _polylap_h(self, y, m, h):
        f = self.fn
        for _ in range(m):
            f = self._lap(f, h, 2 * m + 2)
        return (-1) ** m * f(y)

    def polylap(self, y, m: int):
        y = np.asarray(y, dtype=float)
        if self.polylap_fn is not None:
            return self.polylap_fn(y)
        q = 2 ** (2 * m + 2)
        a, b = self._polylap_h(y, m, self.h), self._polylap_h(y, m, self.h / 2)
        return (q * b - a) / (q - 1)

    def grad(self, y):
        y = np.asarray(y, dtype=float)
        if self.grad_fn is not None:
            return self.grad_fn(y)
        offs, w = _stencil(1, 4)
        out = np.empty(y.shape)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0

            def d(h):
                return sum(c * self.fn(y + o * h * e) for o, c in zip(offs, w) if c != 0.0) / h
            out[..., i] = (16 * d(self.h / 2) - d(self.h)) / 15
        return out


# ------------------------------------------------------------ functionals

def _box(domain):
    lo = np.asarray(domain.lo if hasattr(domain, "lo") else domain[0], dtype=float)
    hi = np.asarray(domain.hi if hasattr(domain, "hi") else domain[1], dtype=float)
    if lo.shape != hi.shape or np.any(hi <= lo) or not np.all(np.isfinite(np.r_[lo, hi])):
        raise ValueError("domain must be a bounded box")
    return lo, hi


def _cub(f, lo, hi, spec):
    return adaptive_cubature(f, lo, hi, spec or QuadratureSpec(rel_tol=1e-8, max_evals=20_000_000))[0]


def _separable(u, v):
    return isinstance(u, SeparableField) and isinstance(v, SeparableField)


def bilinear_L1(u, v, domain, m: int, spec: QuadratureSpec | None = None) -> float:
    lo, hi = _box(domain)
    if _separable(u, v):
        return math.fsum(_sep_pairing(u, v, m, lo, hi, "yd", i) + _sep_pairing(v, u, m, lo, hi, "yd", i)
                         for i in range(len(lo)))

    def f(y):
        return (u.polylap(y, m) * np.einsum("ni,ni->n", y, v.grad(y))
                + v.polylap(y, m) * np.einsum("ni,ni->n", y, u.grad(y)))
    return _cub(f, lo, hi, spec)


def bilinear_L2(u, v, i: int, domain, m: int, spec: QuadratureSpec | None = None) -> float:
    lo, hi = _box(domain)
    if not 0 <= i < len(lo):
        raise ValueError("coordinate index out of range")
    if _separable(u, v):
        return _sep_pairing(u, v, m, lo, hi, "d", i) + _sep_pairing(v, u, m, lo, hi, "d", i)

    def parts(y):
        return u.polylap(y, m) * v.grad(y)[:, i], v.polylap(y, m) * u.grad(y)[:, i]

    spec = spec or QuadratureSpec(rel_tol=1e-8, max_evals=20_000_000)
    if spec.abs_tol == 0.0:
        # the value may vanish exactly; tolerance relative to int |integrand|
        mag = _cub(lambda y: sum(np.abs(p) for p in parts(y)), lo, hi,
                   QuadratureSpec(rel_tol=1e-3, max_evals=spec.max_evals))
        spec = QuadratureSpec(rel_tol=spec.rel_tol, abs_tol=spec.rel_tol * mag, max_evals=spec.max_evals)
    return _cub(lambda y: sum(parts(y)), lo, hi, spec)


def volume_form(u, v, domain, m: int, spec: QuadratureSpec | None = None) -> float:
    """int v (-Delta)^m u + u (-Delta)^m v."""
    lo, hi = _box(domain)
    if _separable(u, v):
        return _sep_pairing(u, v, m, lo, hi, "v") + _sep_pairing(v, u, m, lo, hi, "v")
    return _cub(lambda y: v.value(y) * u.polylap(y, m) + u.value(y) * v.polylap(y, m), lo, hi, spec)


def L2_scale(u, v, i: int, domain, m: int, spec: QuadratureSpec | None = None) -> float:
    """Cauchy-Schwarz bound ||Lu|| ||d_i v|| + ||Lv|| ||d_i u|| with L = (-Delta)^m."""
    lo, hi = _box(domain)
    if _separable(u, v):
        a = math.sqrt(_sep_lap_sq(u, m, lo, hi) * _sep_grad_sq(v, i, lo, hi))
        b = math.sqrt(_sep_lap_sq(v, m, lo, hi) * _sep_grad_sq(u, i, lo, hi))
        return a + b
    n = lambda g: math.sqrt(_cub(lambda y: g(y) ** 2, lo, hi, spec))
    return (n(lambda y: u.polylap(y, m)) * n(lambda y: v.grad(y)[:, i])
            + n(lambda y: v.polylap(y, m)) * n(lambda y: u.grad(y)[:, i]))


def L1_volume_identity_gap(u, v, domain, m: int, N: int | None = None, spec=None) -> tuple[float, float]:
    """(L1, -(N - 2m)/2 * volume_form); equal for fields vanishing to order 2m at the boundary."""
    lo, _ = _box(domain)
    N = len(lo) if N is None else N
    return bilinear_L1(u, v, domain, m, spec), -(N - 2 * m) / 2.0 * volume_form(u, v, domain, m, spec)


# ------------------------------------------------------- ansatz residuals

@dataclass(frozen=True)
class PohozaevReport:
    volume_lhs: float
    predicted_rhs: float
    boundary_estimate: float
    domain: dict
    identity_id: IdentityId
    err_est: float = 0.0
    parts: dict = field(default_factory=dict, compare=False)

    @property
    def gap(self) -> float:
        return self.volume_lhs - self.predicted_rhs

    def __post_init__(self):
        vals = (self.volume_lhs, self.predicted_rhs, self.boundary_estimate, self.err_est)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite entry in Pohozaev report")


def pohozaev_residual(a: AnsatzSpec, pot: PotentialModel, rho: float, identity, i: int | None = None,
                      log2_n: int = 15, seed: int = 0) -> PohozaevReport:
    """Volume side and leading-order prediction of a local Pohozaev identity for Z on D_rho.

    radial:        int (m V + r V_r / 2) Z^2 - (1/m*) int r Q_r Z^{m*}
    translational: int V_i Z^2 - (2/m*) int Q_i Z^{m*}, i indexing y'' (0-based)
    lambda:        the lambda-derivative pairing I3 + I4 - I5 against its
                   expansion 2k(-B1t / lam^{2m+1} + B3 sum d^{-gamma} / lam^{gamma+1})

    The correction phi is taken as zero.  D_rho lies outside the support
    of the cutoff for rho > 2 delta, so the boundary terms vanish
    identically and boundary_estimate is 0.
    """
    identity = IdentityId(identity)
    space: SpaceSpec = a.space
    cut = a.cutoff
    if not 2 * cut.delta < rho < 5 * cut.delta:
        raise RhoOutOfRangeError(f"rho = {rho} outside (2 delta, 5 delta) = ({2 * cut.delta}, {5 * cut.delta})")
    cfg = a.cfg
    k, lam, ms = cfg.k, cfg.lam, space.m_star_f
    dom = {"rho": float(rho), "r0": cut.r0, "y0_2": list(cut.y0_2), "delta": cut.delta,
           "k": k, "lam": lam}

    def mass(h, power):
        return mass_leading_order(space, cfg, h, power, cutoff=cut, rho=rho, log2_n=log2_n, seed=seed)

    if identity is IdentityId.RADIAL:
        hv = lambda r, w: space.m * pot.V(r, w) + 0.5 * r * pot.grad("V", r, w)[..., 0]
        hq = lambda r, w: r * pot.grad("Q", r, w)[..., 0]
        (l1, p1, e1), (l2, p2, e2) = mass(hv, POWER_TWO), mass(hq, POWER_MSTAR)
        vol, pred, err = l1 - l2 / ms, p1 - p2 / ms, math.hypot(e1, e2 / ms)
        parts = {"V_part": l1, "Q_part": l2}
    elif identity is IdentityId.TRANSLATIONAL:
        if i is None or not 0 <= i < space.N - 3:
            raise ValueError("translational identity needs an index i into y''")
        hv = lambda r, w: pot.grad("V", r, w)[..., 1 + i]
        hq = lambda r, w: pot.grad("Q", r, w)[..., 1 + i]
        (l1, p1, e1), (l2, p2, e2) = mass(hv, POWER_TWO), mass(hq, POWER_MSTAR)
        vol, pred, err = l1 - 2 * l2 / ms, p1 - 2 * p2 / ms, math.hypot(e1, 2 * e2 / ms)
        parts = {"V_part": l1, "Q_part": l2, "i": i}
    else:
        t = pairing_terms(space, pot, cfg, log2_n=log2_n, seed=seed)
        vol = t["I3"][0] + t["I4"][0] - t["I5"][0]
        err = math.sqrt(sum(v[1] ** 2 for v in t.values()))
        g = space.gamma
        same = same_circle_sum(cfg, g).value if k >= 2 else 0.0
        inter = same + cross_circle_sum(cfg, g).value
        B1t = moment_constants(space, pot, allow_violation=True)
        pred = 2 * k * (-B1t / lam ** (2 * space.m + 1) + B3_constant(space) * inter / lam ** (g + 1))
        parts = {name: v[0] for name, v in t.items()}
    return PohozaevReport(float(vol), float(pred), 0.0, dom, identity, float(err), parts)
