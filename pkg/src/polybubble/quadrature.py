"""Moment integrals of the bubble and adaptive quadrature/cubature.

Three integrators live here:

* ``adaptive_1d``: globally adaptive Gauss-Kronrod (7/15) on a finite or
  (half-)infinite interval, the infinite parts compactified.
* ``adaptive_cubature``: Genz-Malik degree 7/5 embedded rule with adaptive
  bisection for boxes of dimension >= 2.
* ``concentrated_integral``: randomized quasi-Monte Carlo with a mixture of
  bubble-shaped proposal densities, for integrands concentrated at scale
  1/lam around many centers.

All reductions sum in a fixed order so results are reproducible.
"""

from __future__ import annotations

import heapq
import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special, stats
from scipy.spatial import distance
from scipy.stats import qmc

from .core import SpaceSpec


class BudgetExhaustedError(RuntimeError):
    def __init__(self, message, value, err_est):
        super().__init__(message)
        self.value = value
        self.err_est = err_est


class DivergentMomentError(ValueError):
    pass


class SymmetryViolationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 0.0
    max_evals: int = 2_000_000
    symmetry_reduction: bool = True

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")


# ---------------------------------------------------------------- 1-d rules

_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.000000000000000000000000000000000])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])


def _gk_batch(g, a, b):
    """Kronrod and Gauss estimates on many intervals at once."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[:, None] + h[:, None] * _NODES[None, :]
    fx = np.asarray(g(x.ravel()), dtype=float).reshape(x.shape)
    # fold mirrored nodes first so that mirrored panels give exactly opposite sums;
    # the Gauss nodes are the odd-indexed Kronrod nodes
    pair = fx[:, :7] + fx[:, 14:7:-1]
    k = h * (pair @ _WGK[:-1] + fx[:, 7] * _WGK[-1])
    gs = h * (pair[:, 1::2] @ _WG[:-1] + fx[:, 7] * _WG[-1])
    return k, np.abs(k - gs), np.abs(h) * (np.abs(fx) @ _WK)


def _compactify(f, a, b):
    """Return (g, ta, tb) with int_a^b f = int_ta^tb g."""
    if np.isfinite(a) and np.isfinite(b):
        return f, a, b
    if np.isfinite(a):
        def g(t):
            t = np.asarray(t)
            return f(a + t / (1.0 - t)) / (1.0 - t) ** 2
        return g, 0.0, 1.0
    if np.isfinite(b):
        def g(t):
            t = np.asarray(t)
            return f(b - t / (1.0 - t)) / (1.0 - t) ** 2
        return g, 0.0, 1.0

    def g(t):
        t = np.asarray(t)
        d = 1.0 - t * t
        return f(t / d) * (1.0 + t * t) / d ** 2
    return g, -1.0, 1.0


def adaptive_1d(f, a: float, b: float, spec: QuadratureSpec = QuadratureSpec(),
                initial_panels: int = 8):
    """(value, err_est) of int_a^b f(x) dx; f must accept numpy arrays."""
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    g, ta, tb = _compactify(f, a, b)
    if ta == -tb:
        # mirror-exact panels keep odd integrands cancelling to rounding
        edges = tb * np.linspace(-1.0, 1.0, initial_panels + 1)
    else:
        edges = np.linspace(ta, tb, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    val, err, mag = _gk_batch(g, lo, hi)
    evals = 15 * len(lo)
    while True:
        total = math.fsum(val)
        tot_err = float(np.sum(err))
        # below ~eps * int |f| the estimate is roundoff, e.g. for zero-mean integrands
        floor = 100 * np.finfo(float).eps * float(np.sum(mag))
        if tot_err <= max(spec.abs_tol, spec.rel_tol * abs(total), floor):
            break
        if evals >= spec.max_evals:
            raise BudgetExhaustedError("1-d quadrature budget exhausted", sign * total, tot_err)
        # bisect every panel carrying more than its share of the error
        thresh = max(spec.abs_tol, spec.rel_tol * abs(total)) / len(val)
        sel = err > thresh
        if not np.any(sel):
            sel = err >= err.max()
        mid = 0.5 * (lo[sel] + hi[sel])
        nlo = np.concatenate([lo[sel], mid])
        nhi = np.concatenate([mid, hi[sel]])
        nv, ne, nm = _gk_batch(g, nlo, nhi)
        evals += 15 * len(nlo)
        keep = ~sel
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        mag = np.concatenate([mag[keep], nm])
        order = np.argsort(lo, kind="stable")
        lo, hi, val, err, mag = lo[order], hi[order], val[order], err[order], mag[order]
        if np.min(hi - lo) < 1e-15 * max(1.0, abs(tb - ta)):
            break
    return sign * math.fsum(val), float(np.sum(err))


# ---------------------------------------------------------- Genz-Malik rule

class _GenzMalik:
    def __init__(self, n: int):
        if n < 2:
            raise ValueError("Genz-Malik needs dimension >= 2")
        self.n = n
        l2, l3, l4, l5 = math.sqrt(9 / 70), math.sqrt(9 / 10), math.sqrt(9 / 10), math.sqrt(9 / 19)
        self.ratio = (l2 / l3) ** 2
        eye = np.eye(n)
        p = [np.zeros((1, n))]
        p.append(np.concatenate([l2 * eye, -l2 * eye]))
        p.append(np.concatenate([l3 * eye, -l3 * eye]))
        pairs = []
        for i, j in itertools.combinations(range(n), 2):
            for si, sj in itertools.product((1, -1), repeat=2):
                v = np.zeros(n)
                v[i], v[j] = si * l4, sj * l4
                pairs.append(v)
        p.append(np.array(pairs))
        p.append(l5 * np.array(list(itertools.product((1, -1), repeat=n)), dtype=float))
        self.groups = [len(q) for q in p]
        self.points = np.concatenate(p)
        self.w7 = np.array([(12824 - 9120 * n + 400 * n * n) / 19683, 980 / 6561,
                            (1820 - 400 * n) / 19683, 200 / 19683, 6859 / 19683 / 2 ** n])
        self.w5 = np.array([(729 - 950 * n + 50 * n * n) / 729, 245 / 486,
                            (265 - 100 * n) / 1458, 25 / 729, 0.0])

    def apply(self, f, centers, halfw):
        """Rule on a batch of boxes: (I7, err, split_dim)."""
        n = self.n
        nb = len(centers)
        x = centers[:, None, :] + halfw[:, None, :] * self.points[None, :, :]
        fx = np.asarray(f(x.reshape(-1, n)), dtype=float).reshape(nb, -1)
        bounds = np.cumsum([0] + self.groups)
        S = np.stack([fx[:, bounds[i]:bounds[i + 1]].sum(axis=1) for i in range(5)], axis=1)
        vol = np.prod(2.0 * halfw, axis=1)
        i7 = vol * (S @ self.w7)
        i5 = vol * (S @ self.w5)
        f0 = fx[:, 0]
        f2p, f2m = fx[:, 1:1 + n], fx[:, 1 + n:1 + 2 * n]
        f3p, f3m = fx[:, 1 + 2 * n:1 + 3 * n], fx[:, 1 + 3 * n:1 + 4 * n]
        diff = np.abs(f2p + f2m - 2 * f0[:, None] - self.ratio * (f3p + f3m - 2 * f0[:, None]))
        return i7, np.abs(i7 - i5), np.argmax(diff, axis=1), fx.shape[1] * nb


def adaptive_cubature(f, lo, hi, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-6)):
    """(value, err_est) of a box integral; f maps (n, d) arrays to (n,)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = len(lo)
    if d == 1:
        return adaptive_1d(lambda x: f(np.asarray(x)[:, None]), lo[0], hi[0], spec)
    rule = _GenzMalik(d)
    centers = (0.5 * (lo + hi))[None, :]
    halfw = (0.5 * (hi - lo))[None, :]
    val, err, split, ne = rule.apply(f, centers, halfw)
    evals = ne
    while True:
        total = math.fsum(val)
        tot_err = float(np.sum(err))
        if tot_err <= max(spec.abs_tol, spec.rel_tol * abs(total)):
            break
        if evals >= spec.max_evals:
            raise BudgetExhaustedError("cubature budget exhausted", total, tot_err)
        # split the worst boxes (those above the mean error, at most 512 per pass)
        order = np.argsort(-err, kind="stable")
        nsel = max(1, min(512, int(np.sum(err > err.mean()))))
        sel = np.zeros(len(err), dtype=bool)
        sel[order[:nsel]] = True
        c, h, sd = centers[sel], halfw[sel].copy(), split[sel]
        idx = np.arange(len(c))
        h[idx, sd] *= 0.5
        c1, c2 = c.copy(), c.copy()
        c1[idx, sd] -= h[idx, sd]
        c2[idx, sd] += h[idx, sd]
        nc = np.concatenate([c1, c2])
        nh = np.concatenate([h, h])
        nv, nerr, nsplit, ne = rule.apply(f, nc, nh)
        evals += ne
        keep = ~sel
        centers = np.concatenate([centers[keep], nc])
        halfw = np.concatenate([halfw[keep], nh])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], nerr])
        split = np.concatenate([split[keep], nsplit])
        ordr = np.lexsort(centers.T[::-1])
        centers, halfw, val, err, split = (a[ordr] for a in (centers, halfw, val, err, split))
    return float(np.sum(val)), float(np.sum(err))


# ------------------------------------------------------------------ regions

@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple


@dataclass(frozen=True)
class RadialSpace:
    """All of R^N for a radial integrand f(r)."""
    N: int


def sphere_area(N: int) -> float:
    """Area of the unit sphere S^{N-1} in R^N."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def integrate(f, region, spec: QuadratureSpec | None = None):
    """(value, err_est) of f over region.

    Box regions may have infinite bounds (f must then decay integrably);
    f maps (n, d) arrays to (n,).  For RadialSpace, f is a function of r
    and the integral is reduced to |S^{N-1}| int_0^inf f(r) r^{N-1} dr.
    """
    if spec is None:
        spec = QuadratureSpec(rel_tol=1e-10 if isinstance(region, RadialSpace) else 1e-6)
    if isinstance(region, RadialSpace):
        if not spec.symmetry_reduction:
            raise ValueError("radial integrands require symmetry_reduction")
        area = sphere_area(region.N)
        N = region.N
        v, e = adaptive_1d(lambda r: f(r) * r ** (N - 1), 0.0, np.inf, spec)
        return area * v, area * e
    if isinstance(region, Box):
        lo = np.asarray(region.lo, dtype=float)
        hi = np.asarray(region.hi, dtype=float)
        if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
            return adaptive_cubature(f, lo, hi, spec)
        # compactify each infinite coordinate
        maps = []
        tlo, thi = lo.copy(), hi.copy()
        for i in range(len(lo)):
            a, b = lo[i], hi[i]
            if np.isfinite(a) and np.isfinite(b):
                maps.append(None)
            elif np.isfinite(a):
                maps.append(("lo", a)); tlo[i], thi[i] = 0.0, 1.0
            elif np.isfinite(b):
                maps.append(("hi", b)); tlo[i], thi[i] = 0.0, 1.0
            else:
                maps.append(("both", 0.0)); tlo[i], thi[i] = -1.0, 1.0

        def g(t):
            t = np.array(t, dtype=float)
            x = t.copy()
            jac = np.ones(len(t))
            for i, mp in enumerate(maps):
                if mp is None:
                    continue
                ti = np.clip(t[:, i], -1 + 1e-15, 1 - 1e-15)
                if mp[0] == "lo":
                    x[:, i] = mp[1] + ti / (1 - ti); jac *= 1 / (1 - ti) ** 2
                elif mp[0] == "hi":
                    x[:, i] = mp[1] - ti / (1 - ti); jac *= 1 / (1 - ti) ** 2
                else:
                    d = 1 - ti * ti
                    x[:, i] = ti / d; jac *= (1 + ti * ti) / d ** 2
            return np.where(jac > 0, f(x) * jac, 0.0)
        return adaptive_cubature(g, tlo, thi, spec)
    raise TypeError(f"unsupported region {region!r}")


# ------------------------------------------------------------------ moments

POWER_TWO = "2"
POWER_MSTAR = "m_star"
POWER_DLAMBDA = "m_star_minus_1_times_dlambda"


@dataclass(frozen=True)
class MomentSpec:
    """int_{R^N} y^alpha W(y) dy with W = U_{0,1}^2, U_{0,1}^{m*}, or U^{m*-1} dU/dlam at lam=1."""

    space: SpaceSpec
    power: str
    multi_index: tuple

    def __post_init__(self):
        if self.power not in (POWER_TWO, POWER_MSTAR, POWER_DLAMBDA):
            raise ValueError(f"unknown power {self.power!r}")
        alpha = tuple(int(a) for a in self.multi_index)
        if len(alpha) != self.space.N or any(a < 0 for a in alpha):
            raise ValueError("multi_index must have N nonnegative entries")
        object.__setattr__(self, "multi_index", alpha)

    @property
    def order(self) -> int:
        return sum(self.multi_index)

    def decay_exponent(self) -> Fraction:
        """a with W(y) = const (1 + |y|^2)^{-a}."""
        sp = self.space
        if self.power == POWER_TWO:
            return Fraction(sp.gamma)
        return Fraction(sp.N)

    def amplitude(self) -> float:
        sp = self.space
        if self.power == POWER_TWO:
            return sp.bubble_amplitude ** 2
        return sp.bubble_amplitude ** sp.m_star_f

    def check_convergent(self):
        a = self.decay_exponent()
        if not a > Fraction(self.space.N + self.order, 2):
            raise DivergentMomentError(
                f"moment diverges: decay (1+|y|^2)^-{a} against |y|^{self.order} in R^{self.space.N}")


def _radial_moment_closed(N, alpha, a):
    """int_{R^N} y^alpha (1 + |y|^2)^{-a} dy."""
    if any(x % 2 for x in alpha):
        return 0.0
    k = sum(alpha)
    a = float(a)
    logv = (sum(special.gammaln((x + 1) / 2.0) for x in alpha)
            + special.gammaln(a - (N + k) / 2.0) - special.gammaln(a))
    return math.exp(logv)


def moment_closed_form(spec: MomentSpec) -> float:
    """Exact moment through Gamma-function identities."""
    spec.check_convergent()
    if any(x % 2 for x in spec.multi_index):
        return 0.0
    if spec.power == POWER_DLAMBDA:
        # U^{m*-1} dU/dlam = (1/m*) d/dlam U^{m*}; integrating y^alpha against
        # d/dlam [lam^N f(lam y)] at lam = 1 gives -|alpha| int y^alpha f.
        base = MomentSpec(spec.space, POWER_MSTAR, spec.multi_index)
        return -spec.order / spec.space.m_star_f * moment_closed_form(base)
    return spec.amplitude() * _radial_moment_closed(spec.space.N, spec.multi_index,
                                                     spec.decay_exponent())


def _sphere_monomial_quadrature(alpha, spec: QuadratureSpec):
    """int_{S^{N-1}} theta^alpha dtheta as a product of 1-d quadratures.

    Polar angles run over [-pi/2, pi/2] (t = s + pi/2) and the last circle
    over [-pi, pi], shifted by a quarter turn when only its cosine power is
    odd.  Centered windows make the quadrature nodes exact mirror images,
    so parity cancellations are not spoiled by the rounding of pi.
    """
    N = len(alpha)
    tail = np.cumsum(np.asarray(alpha)[::-1])[::-1]   # tail[i] = sum_{j >= i} alpha_j
    total = 1.0
    for i in range(N - 2):
        p, q = alpha[i], N - 2 - i + tail[i + 1]
        v, _ = adaptive_1d(lambda s, p=p, q=q: (-np.sin(s)) ** p * np.cos(s) ** q,
                           -0.5 * math.pi, 0.5 * math.pi, spec)
        total *= v
    p, q = alpha[N - 2], alpha[N - 1]
    if p % 2 and not q % 2:
        circ = lambda u: (-np.sin(u)) ** p * np.cos(u) ** q
    else:
        circ = lambda u: np.cos(u) ** p * np.sin(u) ** q
    v, _ = adaptive_1d(circ, -math.pi, math.pi, spec)
    return total * v


def moment_quadrature(spec: MomentSpec, qspec: QuadratureSpec = QuadratureSpec(rel_tol=1e-11)):
    """Same moment by adaptive quadrature: hyperspherical angles times a compactified radius."""
    spec.check_convergent()
    sp = spec.space
    N = sp.N
    alpha = spec.multi_index
    k = spec.order
    ang = _sphere_monomial_quadrature(alpha, qspec)
    amp = sp.bubble_amplitude
    s = sp.gamma / 2.0
    if spec.power == POWER_TWO:
        w = lambda r: amp ** 2 * (1.0 + r * r) ** (-2 * s)
    elif spec.power == POWER_MSTAR:
        w = lambda r: amp ** sp.m_star_f * (1.0 + r * r) ** (-N)
    else:
        def w(r):
            u = amp * (1.0 + r * r) ** (-s)
            dl = u * s * (1.0 - r * r) / (1.0 + r * r)
            return u ** (sp.m_star_f - 1.0) * dl
    rad, _ = adaptive_1d(lambda r: w(r) * r ** (N - 1 + k), 0.0, np.inf, qspec)
    return ang * rad


def moment(space: SpaceSpec, power: str, alpha=None) -> float:
    alpha = tuple([0] * space.N) if alpha is None else tuple(alpha)
    return moment_closed_form(MomentSpec(space, power, alpha))


# --------------------------------------------------------- annulus integrals

def _hyperspherical(phis):
    """Unit vectors in R^d from (n, d-1) hyperspherical angles, and the Jacobian."""
    n, dm1 = phis.shape
    d = dm1 + 1
    out = np.ones((n, d))
    jac = np.ones(n)
    sprod = np.ones(n)
    for i in range(dm1):
        out[:, i] = sprod * np.cos(phis[:, i])
        jac *= np.sin(phis[:, i]) ** (d - 2 - i)
        sprod = sprod * np.sin(phis[:, i])
    out[:, -1] = sprod
    return out, jac


def annulus_volume(N: int, r0: float, rho_inner: float, rho_outer: float) -> float:
    """Exact volume of D_outer minus D_inner (valid while rho_outer < r0)."""
    d = N - 2
    area = sphere_area(d)

    def prim(s):
        return r0 * r0 * s ** d / d + s ** (d + 2) / (d * (d + 2))
    return 4.0 * math.pi * area * (prim(rho_outer) - prim(rho_inner))


def integrate_annulus(f, rho_inner: float, rho_outer: float, center_spec, N: int,
                      spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-6), probe_seed: int = 0):
    """int over {rho_inner <= |(|y'|, y'') - (r0, y0'')| <= rho_outer} of f.

    f must be invariant under rotations of y' in R^3; the y'-sphere is
    integrated out (factor 4 pi R^2) and the remaining (R, y'') region is
    parametrised by polar coordinates about (r0, y0'').
    """
    r0, y0 = center_spec
    y0 = np.asarray(y0, dtype=float)
    if not 0 < rho_inner <= rho_outer:
        if rho_inner == rho_outer == 0:
            return 0.0, 0.0
        raise ValueError("need 0 < rho_inner <= rho_outer")
    if rho_inner == rho_outer:
        return 0.0, 0.0
    if rho_outer >= r0:
        raise ValueError("rho_outer must stay below r0")
    d = N - 2
    rng = np.random.default_rng(probe_seed)
    probe = np.zeros((4, N))
    probe[:, 0] = r0 + 0.5 * (rho_inner + rho_outer) * rng.uniform(-0.5, 0.5, 4)
    probe[:, 3:] = y0 + 0.1 * rho_outer * rng.standard_normal((4, N - 3))
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    rot = probe.copy()
    rot[:, :3] = probe[:, :3] @ q.T
    f0, f1 = np.asarray(f(probe)), np.asarray(f(rot))
    if not np.allclose(f0, f1, rtol=1e-8, atol=1e-14 * max(1.0, np.max(np.abs(f0)))):
        warnings.warn("integrand is not invariant under rotations of y'", SymmetryViolationWarning)

    def g(t):
        s = t[:, 0]
        phis = t[:, 1:]
        u, jac = _hyperspherical(phis)
        R = r0 + s * u[:, 0]
        y = np.zeros((len(t), N))
        y[:, 0] = R
        y[:, 3:] = y0 + s[:, None] * u[:, 1:]
        return 4.0 * math.pi * R * R * s ** (d - 1) * jac * f(y)

    lo = [rho_inner] + [0.0] * (d - 1)
    hi = [rho_outer] + [math.pi] * (d - 2) + [2 * math.pi]
    return adaptive_cubature(g, lo, hi, spec)


# -------------------------------------------------- concentrated integrands

def _proposal_norm(N: int, a: float) -> float:
    """1 / int_{R^N} (1 + |z|^2)^{-a} dz."""
    return math.exp(special.gammaln(a) - special.gammaln(a - N / 2.0)) / math.pi ** (N / 2.0)


def concentrated_integral(F, centers, lam: float, a: float, *, log2_n: int = 15,
                          n_scrambles: int = 8, seed: int = 0, symmetric: bool = False,
                          chunk: int = 4096):
    """(value, err_est) of int_{R^N} F(y) dy for F concentrated near the centers.

    The proposal is the equal mixture of densities proportional to
    (1 + lam^2 |y - x_j|^2)^{-a}; a must satisfy N/2 < a and should not
    exceed the decay rate of F for a bounded likelihood ratio.  With
    symmetric=True F is assumed invariant under a group acting transitively
    on the centers, and only the first mixture component is sampled.
    err_est is the standard error over independent scramblings.
    """
    centers = np.asarray(centers, dtype=float)
    M, N = centers.shape
    if not a > N / 2.0:
        raise ValueError("proposal exponent must exceed N/2")
    cnorm = _proposal_norm(N, a) * lam ** N
    comps = [0] if symmetric else list(range(M))
    estimates = []
    for rep in range(n_scrambles):
        total = 0.0
        sob = qmc.Sobol(d=N + 1, scramble=True, seed=np.random.default_rng([seed, rep]))
        u = sob.random_base2(log2_n)
        u = np.clip(u, 1e-15, 1 - 1e-15)
        B = stats.beta.ppf(u[:, 0], N / 2.0, a - N / 2.0)
        r = np.sqrt(B / (1.0 - B)) / lam
        g = stats.norm.ppf(u[:, 1:])
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        offs = r[:, None] * g
        for j in comps:
            acc = []
            for i in range(0, len(offs), chunk):
                y = centers[j] + offs[i:i + chunk]
                d2 = distance.cdist(y, centers, "sqeuclidean")
                dens = np.sum((1.0 + lam * lam * d2) ** (-a), axis=1) * (cnorm / M)
                acc.append(np.asarray(F(y), dtype=float) / dens)
            total += float(np.mean(np.concatenate(acc)))
        # int F = (1/M) sum_j E_{p_j}[F/p]; under symmetry every term is equal
        estimates.append(total if symmetric else total / M)
    est = np.array(estimates)
    err = float(est.std(ddof=1) / math.sqrt(len(est))) if len(est) > 1 else 0.0
    return float(est.mean()), err
