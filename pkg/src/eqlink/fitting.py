"""Moment-matching fits for the averaged basket distribution.

The working approximation is a shifted lognormal, shift + exp(mu + sigma Z)
with Z standard normal, matched to the first three moments.  Writing
w = exp(sigma^2), the skewness of that family is (w + 2) sqrt(w - 1), so
substituting x = sqrt(w - 1) turns the matching condition into the depressed
cubic x^3 + 3 x = skew, which has exactly one real root for positive skew
and is solved here in closed form.  A plain two-moment lognormal is kept as
the comparison baseline and as the fallback when the skewness is too small
for the three-moment system to be well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .moments import MomentSet

SKEW_FLOOR = 1e-6


class UnmatchableSkewError(ValueError):
    """Skewness is zero or negative, outside the shifted-lognormal family."""


class DegenerateDistributionError(ValueError):
    """Variance is below tolerance, the distribution is a point mass."""


@dataclass(frozen=True)
class ShiftedLognormalFit:
    """Parameters of shift + exp(mu + sigma Z).

    lognormal_fallback marks fits where the skewness fell below SKEW_FLOOR
    and the two-moment lognormal (shift identically zero) was used instead;
    such fits price correctly but their third moment is not matched.
    """

    shift: float
    mu: float
    sigma: float
    lognormal_fallback: bool = False

    @property
    def scale(self) -> float:
        """Mean of the lognormal part, exp(mu + sigma^2 / 2)."""
        return math.exp(self.mu + 0.5 * self.sigma ** 2)

    def raw_moments(self):
        """First three raw moments implied by the parameters."""
        a = self.shift
        m = self.scale
        w = math.exp(self.sigma ** 2)
        m1 = a + m
        m2 = a * a + 2.0 * a * m + m * m * w
        m3 = a ** 3 + 3.0 * a * a * m + 3.0 * a * m * m * w + m ** 3 * w ** 3
        return m1, m2, m3


@dataclass(frozen=True)
class LognormalFit:
    """Parameters of exp(mu + sigma Z), matched to mean and variance."""

    mu: float
    sigma: float

    @property
    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma ** 2)

    def raw_moments(self):
        m = self.mean
        w = math.exp(self.sigma ** 2)
        return m, m * m * w


def skew_cubic_root(skew: float) -> float:
    """Unique positive root of x^3 + 3 x = skew for positive skew.

    Uses the Cardano form x = u - 1/u with u = cbrt(skew/2 + sqrt(skew^2/4 + 1)).
    The product of the two cube-root arguments is exactly -1, so this form
    has no cancellation for large skew, and for small skew u -> 1 with
    x ~ skew / 3 remaining fully accurate in double precision.
    """
    if skew <= 0.0:
        raise UnmatchableSkewError("skewness must be positive")
    u = np.cbrt(0.5 * skew + math.hypot(0.5 * skew, 1.0))
    return float(u - 1.0 / u)


def fit_lognormal(m1: float, m2: float) -> LognormalFit:
    """Two-moment lognormal fit, the benchmark baseline."""
    if not (math.isfinite(m1) and math.isfinite(m2)):
        raise ValueError("moments must be finite")
    if m1 <= 0.0:
        raise ValueError("lognormal fit requires a positive mean")
    ratio = m2 / (m1 * m1)
    if ratio <= 1.0:
        raise DegenerateDistributionError("variance is zero or negative")
    var = math.log(ratio)
    return LognormalFit(math.log(m1) - 0.5 * var, math.sqrt(var))


def fit_shifted_lognormal(moments: MomentSet) -> ShiftedLognormalFit:
    """Match a shifted lognormal to the first three moments.

    Degenerate inputs raise DegenerateDistributionError, nonpositive
    skewness raises UnmatchableSkewError, and skewness below SKEW_FLOOR
    falls back to the two-moment lognormal with the fallback flag set.
    """
    for v in (moments.m1, moments.m2, moments.m3, moments.mu2, moments.mu3):
        if not math.isfinite(v):
            raise ValueError("moments must be finite")
    if moments.degenerate:
        raise DegenerateDistributionError("variance below tolerance, nothing to fit")
    skew = moments.skew
    if not math.isfinite(skew) or skew <= 0.0:
        raise UnmatchableSkewError(
            "skewness must be positive for a shifted-lognormal fit")
    if skew < SKEW_FLOOR:
        base = fit_lognormal(moments.m1, moments.mu2 + moments.m1 ** 2)
        return ShiftedLognormalFit(0.0, base.mu, base.sigma, lognormal_fallback=True)

    x = skew_cubic_root(skew)
    # w - 1 = x^2 by construction; log1p keeps sigma accurate for small x
    var = math.log1p(x * x)
    m = math.sqrt(moments.mu2) / x
    mu = math.log(m) - 0.5 * var
    return ShiftedLognormalFit(moments.m1 - m, mu, math.sqrt(var))
