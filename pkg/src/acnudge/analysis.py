"""Power-law fit of minimum node counts and the minimum-length-scale estimate.

The inverse-problem chain: measured (nu, m_h) pairs are fitted with
m_h = c0 * nu**(-p) by ordinary least squares on the log-log scale; the
counting argument m_h = 2*n_s and lambda = L/n_s then give the smallest
structure width lambda = (2*L/c0) * nu**p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solver import Field


@dataclass(frozen=True)
class PowerLawFit:
    """Fitted y = c0 * x**(-p) with the spread of log residuals.

    exp(log_residual_std) is the multiplicative one-sigma band; x_min/x_max
    record the fitted range so extrapolation can be flagged downstream.
    """

    c0: float
    p: float
    log_residual_std: float
    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.c0 <= 0:
            raise ValueError("prefactor must be positive")
        if self.n_points < 3:
            raise ValueError("fit needs at least 3 samples")

    def predict(self, x: float) -> float:
        return self.c0 * x ** (-self.p)


@dataclass(frozen=True)
class LengthScaleEstimate:
    nu: float
    lam: float
    n_s: int
    extrapolated: bool = False


def fit_power_law(pairs) -> PowerLawFit:
    """Least-squares line on (log x, log y); returns c0 = exp(intercept), p = -slope.

    Repeated x values (several seeds per parameter) are fine, but at least
    three distinct x values are required.
    """
    pts = [(float(x), float(y)) for x, y in pairs]
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("power-law fit needs positive samples")
    if len({x for x, _ in pts}) < 3:
        raise ValueError("power-law fit needs at least 3 distinct x values")
    logx = np.log([x for x, _ in pts])
    logy = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(logx, logy, 1)
    residuals = logy - (slope * logx + intercept)
    return PowerLawFit(
        c0=float(math.exp(intercept)),
        p=float(-slope),
        log_residual_std=float(np.std(residuals)),
        n_points=len(pts),
        x_min=float(math.exp(np.min(logx))),
        x_max=float(math.exp(np.max(logx))),
    )


def estimate_length_scale(fit: PowerLawFit, nu: float, L: float = 1.0) -> LengthScaleEstimate:
    """Smallest structure width lambda = (2L/c0) * nu**p, with n_s = round(L/lambda).

    nu outside the fitted range flags the estimate as extrapolated rather
    than failing.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    lam = (2.0 * L / fit.c0) * nu**fit.p
    n_s = max(1, round(L / lam))
    extrapolated = not (fit.x_min <= nu <= fit.x_max)
    return LengthScaleEstimate(nu=nu, lam=lam, n_s=n_s, extrapolated=extrapolated)


def count_structures(u: Field, alpha: float = 1.0) -> int:
    """Number of maximal sign-constant intervals whose peak reaches 0.5/sqrt(alpha).

    Counts the metastable plateaus of a spun-up state; small-amplitude
    wiggles below half the saturation amplitude are ignored.  A zero field
    has no structures.
    """
    threshold = 0.5 / math.sqrt(alpha)
    signs = np.sign(u.values)
    count = 0
    current_sign = 0.0
    peak = 0.0
    for s, a in zip(signs, np.abs(u.values)):
        if s == 0.0 or s != current_sign:
            if current_sign != 0.0 and peak >= threshold:
                count += 1
            current_sign = s
            peak = a
        else:
            peak = max(peak, a)
    if current_sign != 0.0 and peak >= threshold:
        count += 1
    return count
