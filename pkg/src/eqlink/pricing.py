"""Closed-form prices built on the moment-matched distributions.

Calls on the averaged basket use the three-moment shifted-lognormal fit,
the benchmark baseline uses the two-moment lognormal, maturity guarantees
on segregated funds are European puts on the terminal fund value, and a
small helper values a floored sum of periodic returns, which is the one
payoff here with a closed form that needs no distribution fit at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .fitting import (LognormalFit, ShiftedLognormalFit,
                      fit_lognormal, fit_shifted_lognormal,
                      DegenerateDistributionError)
from .market import (BasketSpec, CorrelationMatrix, DiscountSpec, GuaranteeSpec,
                     MarketDataError, ObservationSchedule, SegFundSpec,
                     validate_market)
from .moments import MomentSet, asian_moments, terminal_moments

# formula branches, reported on every PriceResult
BRANCH_STRIKE_ABOVE_SHIFT = "strike_above_shift"
BRANCH_STRIKE_AT_OR_BELOW_SHIFT = "strike_at_or_below_shift"
BRANCH_GUARANTEE_ABOVE_SHIFT = "guarantee_above_shift"
BRANCH_GUARANTEE_AT_OR_BELOW_SHIFT = "guarantee_at_or_below_shift"
BRANCH_LOGNORMAL = "lognormal"
BRANCH_DEGENERATE = "degenerate"

# strike gaps below this underflow in the log, treat as the at-or-below branch
GAP_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class PriceResult:
    """A price together with how it was produced."""

    value: float
    discount_factor: float
    branch: str
    fit: object = None
    moments: MomentSet = None


def require_valid_market(basket, correlations, schedule, discount):
    report = validate_market(basket, correlations, schedule, discount)
    if not report.ok:
        raise MarketDataError("; ".join(report.violations))


def shifted_lognormal_call(fit: ShiftedLognormalFit, strike: float):
    """Undiscounted E[max(S - strike, 0)] for S = shift + exp(mu + sigma Z).

    Returns (expectation, branch).  When the strike does not exceed the
    shift the option is sure to finish in the money and the expectation is
    mean - strike exactly.
    """
    gap = strike - fit.shift
    if gap < GAP_UNDERFLOW:
        return (fit.shift - strike) + fit.scale, BRANCH_STRIKE_AT_OR_BELOW_SHIFT
    d = (fit.mu - math.log(gap)) / fit.sigma
    value = (fit.shift - strike) * ndtr(d) + fit.scale * ndtr(fit.sigma + d)
    return max(value, 0.0), BRANCH_STRIKE_ABOVE_SHIFT


def shifted_lognormal_put(fit: ShiftedLognormalFit, strike: float):
    """Undiscounted E[max(strike - S, 0)] for the same distribution."""
    gap = strike - fit.shift
    if gap < GAP_UNDERFLOW:
        return 0.0, BRANCH_GUARANTEE_AT_OR_BELOW_SHIFT
    z = (math.log(gap) - fit.mu) / fit.sigma
    value = gap * ndtr(z) - fit.scale * ndtr(z - fit.sigma)
    return max(value, 0.0), BRANCH_GUARANTEE_ABOVE_SHIFT


def asian_call_price(basket: BasketSpec, correlations: CorrelationMatrix,
                     schedule: ObservationSchedule, discount: DiscountSpec) -> PriceResult:
    """Value of max(average basket - strike, 0) paid at maturity.

    The average is fitted with the three-moment shifted lognormal.  A
    degenerate (zero variance) average prices at discounted intrinsic.
    """
    require_valid_market(basket, correlations, schedule, discount)
    moments = asian_moments(basket, correlations, schedule, discount.rate)
    df = discount.factor(schedule.maturity)
    strike = basket.strike
    if moments.degenerate:
        return PriceResult(df * max(moments.m1 - strike, 0.0), df,
                           BRANCH_DEGENERATE, None, moments)
    fit = fit_shifted_lognormal(moments)
    expectation, branch = shifted_lognormal_call(fit, strike)
    return PriceResult(df * expectation, df, branch, fit, moments)


def asian_put_price(basket: BasketSpec, correlations: CorrelationMatrix,
                    schedule: ObservationSchedule, discount: DiscountSpec) -> PriceResult:
    """Put counterpart of asian_call_price, sharing the same fit."""
    require_valid_market(basket, correlations, schedule, discount)
    moments = asian_moments(basket, correlations, schedule, discount.rate)
    df = discount.factor(schedule.maturity)
    strike = basket.strike
    if moments.degenerate:
        return PriceResult(df * max(strike - moments.m1, 0.0), df,
                           BRANCH_DEGENERATE, None, moments)
    fit = fit_shifted_lognormal(moments)
    expectation, branch = shifted_lognormal_put(fit, strike)
    return PriceResult(df * expectation, df, branch, fit, moments)


def levy_call_price(basket: BasketSpec, correlations: CorrelationMatrix,
                    schedule: ObservationSchedule, discount: DiscountSpec,
                    fit_target: str = "average") -> PriceResult:
    """Two-moment lognormal benchmark price for the same averaged payoff.

    fit_target selects which distribution supplies the matched moments:
    "average" (default) matches the time average itself, "terminal" matches
    the basket at the final observation time, ignoring the averaging.
    """
    require_valid_market(basket, correlations, schedule, discount)
    if fit_target == "average":
        moments = asian_moments(basket, correlations, schedule, discount.rate)
    elif fit_target == "terminal":
        moments = terminal_moments(basket.unit_array(), basket.indices,
                                   correlations, schedule.times[-1], discount.rate)
    else:
        raise ValueError(f"unknown fit_target {fit_target!r}")
    df = discount.factor(schedule.maturity)
    strike = basket.strike
    if moments.degenerate:
        return PriceResult(df * max(moments.m1 - strike, 0.0), df,
                           BRANCH_DEGENERATE, None, moments)
    try:
        fit = fit_lognormal(moments.m1, moments.mu2 + moments.m1 ** 2)
    except DegenerateDistributionError:
        return PriceResult(df * max(moments.m1 - strike, 0.0), df,
                           BRANCH_DEGENERATE, None, moments)
    d1 = (fit.mu + fit.sigma ** 2 - math.log(strike)) / fit.sigma
    value = fit.mean * ndtr(d1) - strike * ndtr(d1 - fit.sigma)
    return PriceResult(df * max(value, 0.0), df, BRANCH_LOGNORMAL, fit, moments)


def security_value(guarantee: GuaranteeSpec, basket: BasketSpec,
                   correlations: CorrelationMatrix, schedule: ObservationSchedule,
                   discount: DiscountSpec) -> PriceResult:
    """Guaranteed amount plus the averaged basket call, both discounted.

    The contract pays guarantee + max(average - strike, 0) at maturity, so
    its value decomposes into the discounted guarantee and the call.
    """
    call = asian_call_price(basket, correlations, schedule, discount)
    value = call.discount_factor * guarantee.amount + call.value
    return PriceResult(value, call.discount_factor, call.branch, call.fit, call.moments)


def segfund_put_price(fund: SegFundSpec, indices, correlations: CorrelationMatrix,
                      discount: DiscountSpec, maturity: float) -> PriceResult:
    """Maturity guarantee of a segregated fund as a European put.

    The guarantee pays max(principal - fund value, 0) at maturity, where the
    fund holds fee-decayed units of each index.  The terminal fund value is
    fitted with the three-moment shifted lognormal.
    """
    indices = tuple(indices)
    if correlations.dim != len(indices):
        raise MarketDataError("correlation dimension mismatch")
    if not math.isfinite(maturity) or maturity <= 0.0:
        raise MarketDataError("maturity not positive")
    if fund.fee_times and fund.fee_times[-1] > maturity:
        raise MarketDataError("fee time after maturity")
    if not math.isfinite(discount.rate):
        raise MarketDataError("rate not finite")
    corr = correlations.entries
    if not np.all(np.isfinite(corr)):
        raise MarketDataError("correlation entries not finite")
    units = fund.terminal_units(indices)
    moments = terminal_moments(units, indices, correlations, maturity, discount.rate)
    df = discount.factor(maturity)
    principal = fund.principal
    if moments.degenerate:
        return PriceResult(df * max(principal - moments.m1, 0.0), df,
                           BRANCH_DEGENERATE, None, moments)
    fit = fit_shifted_lognormal(moments)
    expectation, branch = shifted_lognormal_put(fit, principal)
    return PriceResult(df * expectation, df, branch, fit, moments)


def floored_return_value(times, rate: float, div_yield: float = 0.0,
                         floor: float = -1.0) -> float:
    """Value of a sum of floored periodic index returns paid at the end.

    times runs t_0 < t_1 < ... < t_M and the payoff is
    sum_i max(I(t_i)/I(t_{i-1}) - 1, floor).  With floor <= -1 the floor
    never binds for a positive price process, so each term values to its
    forward growth minus one and the sum collapses to a closed form.  When
    rate equals div_yield every growth factor is one and the value is an
    exact zero.
    """
    times = [float(t) for t in times]
    if len(times) < 2:
        raise ValueError("need at least two times for one return period")
    if times[0] < 0.0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be nonnegative and strictly increasing")
    if not (math.isfinite(rate) and math.isfinite(div_yield) and math.isfinite(floor)):
        raise ValueError("rate, div_yield and floor must be finite")
    if floor > -1.0:
        raise ValueError("floors above -1 can bind and are not supported by this formula")
    n_returns = len(times) - 1
    growth = rate - div_yield
    if growth == 0.0:
        return 0.0
    spans = [b - a for a, b in zip(times, times[1:])]
    total = math.fsum(math.exp(growth * dt) for dt in spans) - n_returns
    return math.exp(-rate * times[-1]) * total
