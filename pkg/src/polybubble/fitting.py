"""Power-law fits and Richardson extrapolation for asymptotic sequences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ExpansionFit:
    """y ~ coefficient * x^exponent; r_squared is reported, never thresholded here."""

    exponent: float
    coefficient: float
    r_squared: float
    residuals: tuple
    sequence: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "coefficient": self.coefficient,
                "r_squared": self.r_squared, "residuals": list(self.residuals),
                "sequence": list(self.sequence), **self.meta}


def loglog_fit(x, y, min_points: int = 5, weights=None) -> ExpansionFit:
    """Least squares of log|y| against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(x)}")
    if np.any(x <= 0) or np.any(y == 0):
        raise ValueError("log-log fit needs positive x and nonzero y")
    lx, ly = np.log(x), np.log(np.abs(y))
    w = None if weights is None else np.sqrt(np.asarray(weights, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    if w is not None:
        coef, *_ = np.linalg.lstsq(A * w[:, None], ly * w, rcond=None)
    else:
        coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res ** 2)) / ss_tot if ss_tot > 0 else 1.0
    sign = float(np.sign(y[0]))
    return ExpansionFit(exponent=float(coef[0]), coefficient=sign * float(np.exp(coef[1])),
                        r_squared=r2, residuals=tuple(float(r) for r in res))


def local_slopes(x, y) -> np.ndarray:
    """Successive log-log slopes between neighbouring points."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.abs(np.asarray(y, dtype=float)))
    return np.diff(ly) / np.diff(lx)


def richardson(seq, ratio: float, order: float) -> np.ndarray:
    """One Richardson pass for a_n = a + c h_n^order with h_{n+1} = h_n / ratio."""
    a = np.asarray(seq, dtype=float)
    f = ratio ** order
    return (f * a[1:] - a[:-1]) / (f - 1.0)


def richardson_table(seq, ratio: float, orders) -> list:
    """Repeated Richardson passes eliminating the given error orders in turn."""
    out = [np.asarray(seq, dtype=float)]
    for p in orders:
        if len(out[-1]) < 2:
            break
        out.append(richardson(out[-1], ratio, p))
    return out


def difference_ratios(seq) -> np.ndarray:
    """|a_n - a_{n-1}| / |a_{n+1} - a_n|; values >= 2 mean the differences at least halve."""
    d = np.abs(np.diff(np.asarray(seq, dtype=float)))
    with np.errstate(divide="ignore", invalid="ignore"):
        return d[:-1] / d[1:]


def geometric_grid(start: float, ratio: float, n: int) -> np.ndarray:
    return start * ratio ** np.arange(n)
