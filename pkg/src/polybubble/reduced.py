"""Energy pairing in lambda, mass formulas and the reduced balance system.

Notation.  With I(u) = 1/2 int |(-Delta)^{m/2} u|^2 + 1/2 int V u^2
- 1/m* int Q u^{m*}, the lambda-derivative of the energy of Z* at fixed
centers splits as

    dI/dlam = I3 + I4 - I5,
    I3 = int V Z* dZ*,   I4 = int (1 - Q) Z*^{m*-1} dZ*,
    I5 = int (Z*^{m*-1} - sum_j U_j^{m*-1}) dZ*,        dZ* = d Z*/d lam,

and to leading order

    dI/dlam ~ 2k ( -B1t / lam^{2m+1} + B3 sum_{j != 1} |x_j - x_1^+|^{-(N-2m)} / lam^{N-2m+1} )

with B1t = B1 V(r0, y0'') - B2 sum_{|alpha|=2m} D^alpha Q int y^alpha U^{m*}
(sum over ordered index tuples), B1 = m int U^2, B2 = 1/((2m-1)! m*) and
B3 = (N-2m)/2 * P^{(N-2m)/(4m)} int U^{m*-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize
from scipy.spatial import distance

from .ansatz import CutoffSpec
from .core import Case, DoubleCircleConfig, RegimeParams, SpaceSpec, generate_centers
from .fitting import ExpansionFit, loglog_fit, richardson
from .lattice import a1_limit, a2_limit, cross_circle_sum, same_circle_sum
from .potentials import PotentialModel
from .quadrature import (POWER_MSTAR, POWER_TWO, _radial_moment_closed, concentrated_integral,
                         moment)


class SignConditionError(ValueError):
    pass


class IllConditionedFitError(ValueError):
    pass


class NoRootInBracketError(ValueError):
    pass


class IndexZeroError(ValueError):
    pass


# ---------------------------------------------------------------- constants

def B2_constant(space: SpaceSpec) -> Fraction:
    return 1 / (math.factorial(2 * space.m - 1) * space.m_star)


def B1_constant(space: SpaceSpec) -> float:
    return space.m * moment(space, POWER_TWO)


def B3_constant(space: SpaceSpec) -> float:
    amp = space.bubble_amplitude
    p = space.m_star_f - 1.0
    zeros = tuple([0] * space.N)
    int_up = amp ** p * _radial_moment_closed(space.N, zeros, p * space.gamma / 2.0)
    return space.gamma / 2.0 * amp * int_up


def pullback_index(beta: tuple) -> tuple:
    """Exponents in z = (r - r0, y'' - y0'') -> exponents in y (r - r0 along y_1)."""
    return (beta[0], 0, 0) + tuple(beta[1:])


def taylor_moment(space: SpaceSpec, taylor: dict) -> float:
    """int T(y) U^{m*} dy for the degree-2m Taylor polynomial T of Q."""
    return math.fsum(c * moment(space, POWER_MSTAR, pullback_index(b)) for b, c in sorted(taylor.items()))


def moment_constants(space: SpaceSpec, pot: PotentialModel, allow_violation: bool = False) -> float:
    """Analytic B1t from closed-form moments; raises SignConditionError unless positive."""
    V0 = float(pot.V(pot.r0, pot.w0))
    qterm = float(B2_constant(space)) * math.factorial(2 * space.m) * taylor_moment(space, pot.taylor_2m)
    val = B1_constant(space) * V0 - qterm
    if not val > 0 and not allow_violation:
        raise SignConditionError(f"sign condition violated: B1t = {val:.6g} <= 0")
    return val


def interaction_constants(space: SpaceSpec, r_bar: float = 1.0) -> tuple[float, float]:
    """(B3t, B4t) = B3 * (A1, A2) / r^{N-2m} from the lattice limits."""
    g = space.gamma
    B3 = B3_constant(space)
    return B3 * a1_limit(g) / r_bar ** g, B3 * a2_limit(g) / r_bar ** g


# ------------------------------------------------------------ pairing terms

def _bubble_matrix(y, centers, lam, space: SpaceSpec):
    """U_j(y) and dU_j/dlam at fixed centers, shapes (n, M)."""
    d2 = distance.cdist(y, centers, "sqeuclidean")
    rho = lam * lam * d2
    s = space.gamma / 2.0
    u = space.bubble_amplitude * (lam / (1.0 + rho)) ** s
    du = u * s * (1.0 - rho) / (lam * (1.0 + rho))
    return u, du


def _power_excess(u, p):
    """(sum_j u_j)^p - sum_j u_j^p row-wise without cancellation."""
    imax = np.argmax(u, axis=1)
    top = u[np.arange(len(u)), imax]
    rest = u.copy()
    rest[np.arange(len(u)), imax] = 0.0
    S = rest.sum(axis=1)
    return top ** p * np.expm1(p * np.log1p(S / top)) - (rest ** p).sum(axis=1)


def pairing_terms(space: SpaceSpec, pot: PotentialModel, cfg: DoubleCircleConfig,
                  terms=("I3", "I4", "I5"), log2_n: int = 14, n_scrambles: int = 8,
                  seed: int = 0) -> dict:
    """{name: (value, err)} for the requested pieces of dI/dlam at fixed centers."""
    centers = generate_centers(cfg)
    lam = cfg.lam
    p = space.m_star_f - 1.0
    N, m = space.N, space.m
    # proposal tails slightly heavier than each integrand's (1 + rho)^{-decay}
    decay = {"I3": space.gamma, "I4": N - m, "I5": (N + 2 * m) / 2.0}

    def integrand(name):
        def F(y):
            u, du = _bubble_matrix(y, centers, lam, space)
            z, dz = u.sum(axis=1), du.sum(axis=1)
            if name == "I3":
                return pot.V_at(y) * z * dz
            if name == "I4":
                return -pot.Qdev_at(y) * z ** p * dz
            return _power_excess(u, p) * dz
        return F

    out = {}
    for name in terms:
        out[name] = concentrated_integral(integrand(name), centers, lam, decay[name] - 0.5, log2_n=log2_n,
                                          n_scrambles=n_scrambles, seed=seed, symmetric=True)
    return out


def lattice_sum_total(cfg: DoubleCircleConfig, gamma: float) -> tuple[float, float]:
    same = same_circle_sum(cfg, gamma).value if cfg.k >= 2 else 0.0
    return same, cross_circle_sum(cfg, gamma).value


@dataclass
class EnergyExpansion:
    B1_tilde: float
    B1_tilde_analytic: float
    lam_exponent: float
    B3_tilde: float
    B4_tilde: float
    B1: float
    B2: Fraction
    B3_fitted: dict = field(default_factory=dict)       # k -> interaction constant from I5
    B3_analytic: float = 0.0
    raw_pairings: list = field(default_factory=list)
    b1_fit: ExpansionFit | None = None

    def spread(self, values) -> float:
        v = np.asarray(list(values), dtype=float)
        return float((v.max() - v.min()) / abs(v.mean()))


def b1_lambda_sweep(space: SpaceSpec, pot: PotentialModel, lams, k: int = 1, h_bar: float = 0.5,
                    log2_n: int = 14, seed: int = 0):
    """I3 + I4 along lam at fixed configuration; returns (fit of |I3+I4|, B1t estimates, rows)."""
    lams = np.asarray(lams, dtype=float)
    if len(lams) < 5 or lams[-1] / lams[0] < 4:
        raise IllConditionedFitError("lambda sweep too narrow to separate the lambda^{-(2m+1)} term")
    rows, vals = [], []
    for lam in lams:
        cfg = DoubleCircleConfig(pot.r0, h_bar, tuple(pot.w0), k, float(lam))
        t = pairing_terms(space, pot, cfg, ("I3", "I4"), log2_n=log2_n, seed=seed)
        v = t["I3"][0] + t["I4"][0]
        vals.append(v)
        rows.append({"k": k, "lam": float(lam), "h_bar": h_bar, "I3": t["I3"][0], "I4": t["I4"][0],
                     "I3_err": t["I3"][1], "I4_err": t["I4"][1]})
    vals = np.array(vals)
    fit = loglog_fit(lams, vals)
    est = -vals * lams ** (2 * space.m + 1) / (2 * k)
    return fit, est, rows


def pairing_sweep(space: SpaceSpec, pot: PotentialModel, regime: RegimeParams, k_range,
                  t: float = 1.0, lams=None, log2_n: int = 14, seed: int = 0,
                  allow_violation: bool = False) -> EnergyExpansion:
    """Fit B1t (lambda sweep, interaction excluded) and the interaction constants (k sweep)."""
    g = space.gamma
    if lams is None:
        lams = 25.0 * 2.0 ** np.arange(6)
    fit, est, rows = b1_lambda_sweep(space, pot, lams, log2_n=log2_n, seed=seed)
    # the leading correction is O(lam^-2); one Richardson pass on the doubling grid
    rich = richardson(est, 2.0, 2.0) if len(est) > 1 else est
    B1t = float(rich[-1])
    analytic = moment_constants(space, pot, allow_violation)

    k_range = list(k_range)
    if len(k_range) < 2:
        raise IllConditionedFitError("need at least two k values for the interaction fit")
    b3k, b3t, b4t = {}, [], []
    for k in k_range:
        lam = regime.lam(int(k), t)
        h = regime.h_bar(lam)
        cfg = DoubleCircleConfig(pot.r0, h, tuple(pot.w0), int(k), lam)
        i5 = pairing_terms(space, pot, cfg, ("I5",), log2_n=log2_n, seed=seed)["I5"]
        same, cross = lattice_sum_total(cfg, g)
        b = -i5[0] * lam ** (g + 1) / (2 * k * (same + cross))
        b3k[int(k)] = b
        b3t.append(b * same * (1 - h * h) ** (g / 2) / k ** g)
        b4t.append(b * cross * h ** (g - 1) * math.sqrt(1 - h * h) / k)
        rows.append({"k": int(k), "lam": lam, "h_bar": h, "I5": i5[0], "I5_err": i5[1],
                     "same_sum": same, "cross_sum": cross, "B3_k": b})
    return EnergyExpansion(B1_tilde=B1t, B1_tilde_analytic=analytic, lam_exponent=fit.exponent,
                           B3_tilde=float(b3t[-1]), B4_tilde=float(b4t[-1]), B1=B1_constant(space),
                           B2=B2_constant(space), B3_fitted=b3k, B3_analytic=B3_constant(space),
                           raw_pairings=rows, b1_fit=fit)


# ------------------------------------------------------------ mass formulas

def mass_leading_order(space: SpaceSpec, cfg: DoubleCircleConfig, h_fn, power: str = POWER_TWO,
                       cutoff: CutoffSpec | None = None, rho: float | None = None,
                       log2_n: int = 15, seed: int = 0):
    """(lhs, predicted, err) for int_{D_rho} h Z^2 (or h Z^{m*}) against its leading order.

    h_fn(r, w) is a function of r = |y'| and y''.  Z carries the cutoff
    centred at (r_bar, y2_bar) unless another cutoff is given.
    """
    cut = cutoff or CutoffSpec.default(space, cfg.r_bar, cfg.y2_bar)
    rho = 3.0 * cut.delta if rho is None else rho
    centers = generate_centers(cfg)
    lam = cfg.lam
    q = 2.0 if power == POWER_TWO else space.m_star_f
    decay = space.gamma if power == POWER_TWO else space.N
    a = decay - 0.5
    r_of = lambda y: np.linalg.norm(y[:, :3], axis=1)

    def F(y):
        u, _ = _bubble_matrix(y, centers, lam, space)
        z = np.maximum(cut.value(y), 0.0) * u.sum(axis=1)
        inside = cut.s_dist(y) <= rho
        return np.where(inside, h_fn(r_of(y), y[:, 3:]) * z ** q, 0.0)

    lhs, err = concentrated_integral(F, centers, lam, a, log2_n=log2_n, seed=seed, symmetric=True)
    h0 = float(h_fn(np.array([cfg.r_bar]), np.array([cfg.y2_bar]))[0])
    if power == POWER_TWO:
        pred = 2 * cfg.k * lam ** (-2 * space.m) * h0 * moment(space, POWER_TWO)
    else:
        pred = 2 * cfg.k * h0 * moment(space, POWER_MSTAR)
    return lhs, pred, err


# --------------------------------------------------------- critical points

def _newton_grad_zero(pot: PotentialModel, z0, target=None, tol: float = 1e-13, max_iter: int = 200):
    """Damped Newton for grad Q(z) = target in z = (r, w)."""
    z = np.array(z0, dtype=float)
    n = len(z)
    tgt = np.zeros(n) if target is None else np.asarray(target, dtype=float)
    F = lambda z: pot.grad("Q", z[0], z[1:]) - tgt
    f = F(z)
    step_scale = 1e-3
    for _ in range(max_iter):
        if np.linalg.norm(f) <= tol:
            break
        H = pot.hess_Q(z[0], z[1:], h=max(1e-3 * step_scale, 1e-12))
        try:
            dz = -np.linalg.solve(H, f)
        except np.linalg.LinAlgError:
            dz = -f
        lam = 1.0
        while lam > 1e-6:
            zn = z + lam * dz
            fn = F(zn)
            if np.linalg.norm(fn) < np.linalg.norm(f):
                break
            lam *= 0.5
        else:
            break
        step_scale = max(np.linalg.norm(zn - z), 1e-15)
        z, f = zn, fn
    return z, float(np.linalg.norm(f))


def gradient_index(pot: PotentialModel, radius: float = 1e-2, n_starts: int = 40, seed: int = 0) -> int:
    """Brouwer degree of grad Q on a small ball around the critical point.

    Sum of sign det D(grad Q) over the preimages of a small regular value,
    found by multi-start Newton inside the ball.
    """
    c = np.concatenate([[pot.r0], pot.w0])
    n = len(c)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((64, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    on_sphere = np.array([np.linalg.norm(pot.grad("Q", *(lambda z: (z[0], z[1:]))(c + radius * d)))
                          for d in dirs])
    if on_sphere.min() == 0:
        raise IndexZeroError("grad Q vanishes on the test sphere")
    v = rng.standard_normal(n)
    v *= 1e-2 * on_sphere.min() / np.linalg.norm(v)
    roots = []
    for _ in range(n_starts):
        d = rng.standard_normal(n)
        start = c + radius * rng.random() * d / np.linalg.norm(d)
        z, res = _newton_grad_zero(pot, start, target=v, tol=1e-9 * np.linalg.norm(v))
        if res <= 1e-6 * np.linalg.norm(v) and np.linalg.norm(z - c) < radius:
            if not any(np.linalg.norm(z - r) < 1e-6 * radius for r in roots):
                roots.append(z)
    deg = 0
    for z in roots:
        H = pot.hess_Q(z[0], z[1:], h=1e-4 * max(np.linalg.norm(z - c), 1e-6))
        deg += int(np.sign(np.linalg.det(H)))
    return deg


def find_critical_point(pot: PotentialModel, start=None, tol: float = 1e-13):
    c = np.concatenate([[pot.r0], pot.w0])
    z, res = _newton_grad_zero(pot, c if start is None else start, tol=tol, max_iter=400)
    return z, res


# ------------------------------------------------------------- t-equation

def t_equation(case: Case, B1t: float, B3t: float, B4t: float, space: SpaceSpec,
               regime: RegimeParams, r_bar: float = 1.0):
    """Leading-order balance in t (interaction constants already carry r_bar^{-(N-2m)})."""
    N, m = space.N, space.m
    g = space.gamma
    if case is Case.CASE1:
        nu = float(regime.nu)
        M1 = regime.M1
        return lambda t: -B1t / t ** (2 * m + 1) + B3t * M1 ** (-g) / t ** (N - 2 * m + 1 - nu)
    if case is Case.CASE2:
        A = regime.a
        return lambda t: -B1t / t ** (2 * m + 1) + B3t / (t ** (N - 2 * m + 1) * (1 - A * A) ** (g / 2))
    beta2 = float(regime.beta2)
    A = 1.0 / regime.M2
    return lambda t: (-B1t / t ** (2 * m + 1) + B3t / t ** (N - 2 * m + 1)
                      + B4t * A ** (g - 1) / t ** (2 * m + 1 + beta2))


def t_closed_form(case: Case, B1t: float, B3t: float, space: SpaceSpec, regime: RegimeParams):
    """Explicit root where the t-equation has two terms (Case1, Case2)."""
    N, m, g = space.N, space.m, space.gamma
    if case is Case.CASE1:
        nu = float(regime.nu)
        return (B3t / (B1t * regime.M1 ** g)) ** (1.0 / (N - 4 * m - nu))
    if case is Case.CASE2:
        return (B3t / (B1t * (1 - regime.a ** 2) ** (g / 2))) ** (1.0 / (N - 4 * m))
    return None


def _bracket_root(f, lo, hi):
    """Root of f on [lo, hi] in log variable: bisection-safeguarded (Brent) search."""
    flo, fhi = f(lo), f(hi)
    if not np.isfinite(flo) or not np.isfinite(fhi) or flo * fhi > 0:
        raise NoRootInBracketError(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    x = optimize.brentq(lambda s: f(math.exp(s)), math.log(lo), math.log(hi), xtol=1e-14, rtol=1e-14)
    return math.exp(x)


@dataclass
class BalanceSolution:
    t: float
    r_bar: float
    y2_bar: tuple
    case_id: Case
    k: int
    residuals: dict
    lam: float
    h_bar: float
    t_model: float | None
    index: int
    constants: dict = field(default_factory=dict)


def lattice_sums_raw(radius: float, height: float, k: int, gamma: float) -> tuple[float, float]:
    """(same, cross) sums for circles of the given radius at heights +-height."""
    j = np.arange(k)
    sn = np.sin(j * np.pi / k)
    same = math.fsum((2.0 * radius * sn[1:]) ** (-gamma)) if k >= 2 else 0.0
    cross = math.fsum((4.0 * radius ** 2 * sn ** 2 + 4.0 * height ** 2) ** (-gamma / 2))
    return same, cross


def circle_geometry(regime: RegimeParams, lam: float, r_bar: float) -> tuple[float, float]:
    """(radius, height) at lam; in Case1 the radius comes straight from M1 lam^{-beta1}
    so that it keeps full precision when h is within rounding of 1."""
    if regime.case_id is Case.CASE1:
        c = regime.M1 * lam ** (-float(regime.beta1))
        return r_bar * c, r_bar * math.sqrt(max(0.0, 1.0 - c * c))
    h = regime.h_bar(lam)
    return r_bar * math.sqrt(1.0 - h * h), r_bar * h


def lambda_equation(space: SpaceSpec, regime: RegimeParams, k: int, B1t: float, r_bar: float,
                    B3: float | None = None):
    """G(lam) = -B1t lam^{-(2m+1)} + B3 lam^{-(N-2m+1)} (same + cross lattice sums at h(lam))."""
    g = space.gamma
    B3 = B3_constant(space) if B3 is None else B3

    def G(lam):
        R, H = circle_geometry(regime, lam, r_bar)
        same, cross = lattice_sums_raw(R, H, k, g)
        return -B1t * lam ** (-(2 * space.m + 1)) + B3 * (same + cross) * lam ** (-(g + 1))
    return G


def solve_balance(space: SpaceSpec, pot: PotentialModel, regime: RegimeParams, k: int,
                  constants: dict | None = None, check_index: bool = True,
                  allow_violation: bool = False) -> BalanceSolution:
    """Solve grad Q = 0 for (r_bar, y2_bar) and the lambda balance for t.

    The balance uses the exact lattice sums at h(lam), so the solved
    lam_k carries the genuine finite-k corrections; the leading-order
    t-equation root is reported as t_model.
    """
    index = gradient_index(pot) if check_index else 0
    if check_index and index == 0:
        raise IndexZeroError("grad Q has index zero at the critical point")
    z, gres = find_critical_point(pot)
    r_bar, w = float(z[0]), tuple(float(v) for v in z[1:])
    const = dict(constants or {})
    B1t = const.get("B1_tilde") or moment_constants(space, pot, allow_violation)
    B3t_def, B4t_def = interaction_constants(space, r_bar)
    B3t = const.get("B3_tilde", B3t_def)
    B4t = const.get("B4_tilde", B4t_def)
    case = regime.case_id
    kexp = float(regime.k_exponent)
    G = lambda_equation(space, regime, int(k), B1t, r_bar, const.get("B3"))
    lo, hi = regime.L0 * k ** kexp, regime.L1 * k ** kexp
    # h(lam) must be admissible on the bracket
    lam = _bracket_root(G, lo, hi)
    t = lam / k ** kexp
    f = t_equation(case, B1t, B3t, B4t, space, regime, r_bar)
    try:
        t_model = _bracket_root(f, regime.L0, regime.L1)
    except NoRootInBracketError:
        t_model = None
    scale = B1t * lam ** (-(2 * space.m + 1))
    g = pot.grad("Q", r_bar, np.array(w))
    dist = float(np.linalg.norm(z - np.concatenate([[pot.r0], pot.w0])))
    residuals = {"de_r": float(g[0]), "de_y": [float(v) for v in g[1:]],
                 "de_lam": float(G(lam) / scale), "grad_norm": gres,
                 "ball_ok": dist <= lam ** (-(1.0 - regime.vartheta))}
    R, H = circle_geometry(regime, lam, r_bar)
    return BalanceSolution(t=t, r_bar=r_bar, y2_bar=w, case_id=case, k=int(k), residuals=residuals,
                           lam=lam, h_bar=H / r_bar, t_model=t_model, index=index,
                           constants={"B1_tilde": B1t, "B3_tilde": B3t, "B4_tilde": B4t})


def balance_sweep(space: SpaceSpec, pot: PotentialModel, regime: RegimeParams, k_range, **kw):
    """Solutions over k plus the fitted log lam_k / log k slope."""
    sols = []
    for i, k in enumerate(k_range):
        sols.append(solve_balance(space, pot, regime, int(k), check_index=(i == 0), **kw))
    ks = np.array([s.k for s in sols], dtype=float)
    lams = np.array([s.lam for s in sols])
    fit = loglog_fit(ks, lams, min_points=min(5, len(ks)))
    return sols, fit
