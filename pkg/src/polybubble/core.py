"""Dimension bookkeeping, scaling regimes and the double-circle geometry."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class DimensionTooSmallError(ValueError):
    pass


class RegimeMismatchError(ValueError):
    pass


class DegenerateProjectionError(ValueError):
    pass


def as_fraction(x) -> Fraction:
    """Exact rational for ints/Fractions; floats go through their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class SpaceSpec:
    N: int
    m: int
    m_star: Fraction
    p_const: int

    @property
    def gamma(self) -> int:
        """Decay exponent N - 2m of the bubble."""
        return self.N - 2 * self.m

    @property
    def bubble_amplitude(self) -> float:
        # P_{m,N}^{(N-2m)/(4m)}
        return float(self.p_const) ** (self.gamma / (4.0 * self.m))

    @property
    def m_star_f(self) -> float:
        return float(self.m_star)


def make_space_spec(N: int, m: int) -> SpaceSpec:
    if m < 1:
        raise DimensionTooSmallError(f"polyharmonic order m={m} must be >= 1")
    if N <= 4 * m + 1:
        raise DimensionTooSmallError(
            f"dimension-too-small: need N > 4m+1, got N={N}, 4m+1={4 * m + 1}")
    p = 1
    for h in range(-m, m):
        p *= N + 2 * h
    return SpaceSpec(N=N, m=m, m_star=Fraction(2 * N, N - 2 * m), p_const=p)


class Case(str, enum.Enum):
    CASE1 = "Case1"   # h -> 1
    CASE2 = "Case2"   # h -> a in (0, 1)
    CASE3 = "Case3"   # h -> 0


@dataclass(frozen=True)
class RegimeParams:
    """Scaling regime of the circle height h against the concentration lambda.

    Case1: sqrt(1-h^2) = M1 lam^{-beta1}, lam = t k^{(N-2m)/(N-4m-nu)}.
    Case2/Case3: h = a + M2 lam^{-beta2}, lam = t k^{(N-2m)/(N-4m)}
    (Case3 is a = 0).
    """

    space: SpaceSpec
    case_id: Case
    nu: Fraction
    iota: Fraction
    tau: Fraction
    beta1: Fraction
    beta2: Fraction
    vartheta: float = 0.1
    M1: float = 1.0
    M2: float = 1.0
    a: float = 0.0
    L0: float = 0.1
    L1: float = 10.0

    @property
    def k_exponent(self) -> Fraction:
        N, m = self.space.N, self.space.m
        if self.case_id is Case.CASE1:
            return Fraction(N - 2 * m) / (N - 4 * m - self.nu)
        return Fraction(N - 2 * m, N - 4 * m)

    @property
    def beta(self) -> Fraction:
        """Exponent of the lambda-derivative bound for this regime."""
        return self.beta1 if self.case_id is Case.CASE1 else self.beta2

    def lam(self, k: int, t: float) -> float:
        return t * float(k) ** float(self.k_exponent)

    def t_of(self, k: int, lam: float) -> float:
        return lam / float(k) ** float(self.k_exponent)

    def h_bar(self, lam: float) -> float:
        if self.case_id is Case.CASE1:
            c = self.M1 * lam ** (-float(self.beta1))
            if not 0.0 < c < 1.0:
                raise RegimeMismatchError(f"sqrt(1-h^2)={c} outside (0,1) at lambda={lam}")
            return math.sqrt(1.0 - c * c)
        h = self.a + self.M2 * lam ** (-float(self.beta2))
        if not 0.0 < h < 1.0:
            raise RegimeMismatchError(f"h={h} outside (0,1) at lambda={lam}")
        return h

    def dh_dlam(self, lam: float) -> float:
        if self.case_id is Case.CASE1:
            b = float(self.beta1)
            c = self.M1 * lam ** (-b)
            dc = -b * c / lam
            # h = sqrt(1 - c^2)
            return -c * dc / math.sqrt(1.0 - c * c)
        b = float(self.beta2)
        return -b * self.M2 * lam ** (-b - 1.0)

    def check(self, cfg: "DoubleCircleConfig", rel_tol: float = 1e-6) -> None:
        """Raise RegimeMismatchError if cfg does not follow this regime's h(lambda)."""
        h = self.h_bar(cfg.lam)
        if abs(h - cfg.h_bar) > rel_tol * max(abs(h), 1e-300):
            raise RegimeMismatchError(
                f"{self.case_id.value}: expected h={h!r} at lambda={cfg.lam}, got {cfg.h_bar!r}")


def make_regime(space: SpaceSpec, case: Case | str, *, iota=None, a: float | None = None,
                M1: float = 1.0, M2: float = 1.0, L0: float = 0.1, L1: float = 10.0,
                vartheta: float = 0.1) -> RegimeParams:
    case = Case(case)
    N, m = space.N, space.m
    beta2 = Fraction(N - 4 * m, N - 2 * m)
    if case is Case.CASE1:
        if iota is None:
            raise ValueError("Case1 needs iota")
        iota_q = as_fraction(iota)
        nu = N - 4 * m - iota_q
        if not 0 < iota_q < N - 4 * m:
            raise ValueError(f"iota={iota} must lie in (0, N-4m)")
        tau = (N - 4 * m - nu) / (N - 2 * m - nu)
        beta1 = nu / (N - 2 * m)
        a_val = 1.0
    else:
        iota_q = Fraction(0)
        nu = Fraction(0)
        tau = Fraction(N - 4 * m, N - 2 * m)
        beta1 = Fraction(0)
        if a is None:
            a = 0.0 if case is Case.CASE3 else 0.5
        if case is Case.CASE3 and a != 0.0:
            raise ValueError("Case3 has a = 0")
        if case is Case.CASE2 and not 0.0 < a < 1.0:
            raise ValueError("Case2 needs a in (0, 1)")
        a_val = float(a)
    if not 0 < tau < 1:
        raise ValueError(f"tau={tau} outside (0,1)")
    if case is Case.CASE1 and not 0 < beta1 < 1:
        raise ValueError(f"beta1={beta1} outside (0,1)")
    if not 0 < L0 < L1:
        raise ValueError("need 0 < L0 < L1")
    if M1 <= 0 or M2 <= 0:
        raise ValueError("M1, M2 must be positive")
    return RegimeParams(space=space, case_id=case, nu=nu, iota=iota_q, tau=tau,
                        beta1=beta1, beta2=beta2, vartheta=vartheta, M1=M1, M2=M2,
                        a=a_val, L0=L0, L1=L1)


@dataclass(frozen=True)
class DoubleCircleConfig:
    """2k centers on the circles y3 = +-r h of the sphere |y'| = r, shifted by y2 in y''."""

    r_bar: float
    h_bar: float
    y2_bar: tuple
    k: int
    lam: float
    allow_endpoints: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self.r_bar <= 0:
            raise ValueError("r_bar must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        lo_ok = self.h_bar >= 0.0 if self.allow_endpoints else self.h_bar > 0.0
        hi_ok = self.h_bar <= 1.0 if self.allow_endpoints else self.h_bar < 1.0
        if not (lo_ok and hi_ok):
            raise ValueError(f"h_bar={self.h_bar} outside (0,1)")
        object.__setattr__(self, "y2_bar", tuple(float(v) for v in self.y2_bar))

    @classmethod
    def for_testing(cls, r_bar, h_bar, y2_bar, k, lam=1.0):
        """Constructor admitting the excluded endpoints h = 0 and h = 1."""
        return cls(r_bar, h_bar, y2_bar, k, lam, allow_endpoints=True)

    @property
    def N(self) -> int:
        return 3 + len(self.y2_bar)

    @property
    def radius(self) -> float:
        """Radius r sqrt(1-h^2) of each circle in the (y1, y2)-plane."""
        return self.r_bar * math.sqrt(max(0.0, 1.0 - self.h_bar ** 2))

    def with_lambda(self, lam: float, h_bar: float | None = None) -> "DoubleCircleConfig":
        return DoubleCircleConfig(self.r_bar, self.h_bar if h_bar is None else h_bar,
                                  self.y2_bar, self.k, lam, self.allow_endpoints)


def generate_centers(cfg: DoubleCircleConfig) -> np.ndarray:
    """Array (2k, N): rows x_1^+ .. x_k^+ then x_1^- .. x_k^-."""
    k, N = cfg.k, cfg.N
    ang = 2.0 * np.pi * np.arange(k) / k
    pts = np.zeros((2 * k, N))
    R = cfg.radius
    for half, sgn in ((0, 1.0), (1, -1.0)):
        sl = slice(half * k, (half + 1) * k)
        pts[sl, 0] = R * np.cos(ang)
        pts[sl, 1] = R * np.sin(ang)
        pts[sl, 2] = sgn * cfg.r_bar * cfg.h_bar
        pts[sl, 3:] = cfg.y2_bar
    return pts


def sector_of(point, cfg: DoubleCircleConfig) -> tuple[int, int]:
    """(j, sign) of the sector Omega_j^{+-} containing point; j is 1-based, sign is +1/-1.

    Boundary ties go to the smaller j; y3 = 0 goes to +.
    """
    p = np.asarray(point, dtype=float)
    if p[0] == 0.0 and p[1] == 0.0:
        raise DegenerateProjectionError("point has zero (y1, y2) projection")
    k = cfg.k
    theta = math.atan2(p[1], p[0]) % (2.0 * math.pi)
    width = 2.0 * math.pi / k
    # sector j covers angles within pi/k of 2(j-1)pi/k
    x = (theta + math.pi / k) / width
    n = round(x)
    if abs(x - n) < 1e-12 * max(1.0, x):
        # on the boundary between sectors n - 1 and n
        j0 = min(n % k, (n - 1) % k)
    else:
        j0 = int(math.floor(x)) % k
    sign = 1 if p[2] >= 0.0 else -1
    return j0 + 1, sign


def rotate_plane(points: np.ndarray, angle: float) -> np.ndarray:
    """Rotate the (y1, y2) coordinates of points by angle."""
    out = np.array(points, dtype=float, copy=True)
    c, s = math.cos(angle), math.sin(angle)
    y1, y2 = out[..., 0].copy(), out[..., 1].copy()
    out[..., 0] = c * y1 - s * y2
    out[..., 1] = s * y1 + c * y2
    return out
