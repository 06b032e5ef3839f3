"""Hedge ratios of the averaged basket call.

The analytic path differentiates the whole pricing chain: market inputs
move the three matched moments (closed-form kernel derivatives), the
moments move the fitted parameters (implicit differentiation of the 3x3
matching system, solved in adjoint form), and the parameters move the
pricing formula.  Participation units stay frozen under every bump, which
is exactly the convention the finite-difference and Monte Carlo checks use
through BasketSpec.with_spots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .fitting import ShiftedLognormalFit
from .market import (BasketSpec, CorrelationMatrix, DiscountSpec,
                     ObservationSchedule)
from .moments import asian_moment_derivatives, asian_moments
from .pricing import (BRANCH_STRIKE_AT_OR_BELOW_SHIFT, asian_call_price,
                      require_valid_market)

SPOT_REL_STEP = 1e-4
VOL_ABS_STEP = 1e-4


@dataclass(frozen=True)
class GreeksResult:
    """Per-index spot deltas and vol vegas, with the method that made them.

    method is "analytic" for the closed-form chain, "finite-difference"
    when the analytic route fell back to bumping (near-degenerate fits).
    Vegas are per unit of absolute volatility.
    """

    deltas: np.ndarray
    vegas: np.ndarray
    method: str


def matching_jacobian(fit: ShiftedLognormalFit) -> np.ndarray:
    """Derivatives of the fitted raw moments with respect to the parameters.

    Row q is the gradient of m_{q+1} in (shift, mu, sigma).  Since the fit
    reproduces the target moments exactly, this is the system to invert when
    propagating moment sensitivities into parameter sensitivities.
    """
    a = fit.shift
    m = fit.scale
    c = fit.sigma
    w = math.exp(c * c)
    return np.array([
        [1.0, m, m * c],
        [2.0 * a + 2.0 * m, 2.0 * a * m + 2.0 * m * m * w,
         2.0 * a * m * c + 4.0 * c * m * m * w],
        [3.0 * a * a + 6.0 * a * m + 3.0 * m * m * w,
         3.0 * a * a * m + 6.0 * a * m * m * w + 3.0 * m ** 3 * w ** 3,
         3.0 * a * a * m * c + 12.0 * a * c * m * m * w + 9.0 * c * m ** 3 * w ** 3],
    ])


def price_parameter_gradient(fit: ShiftedLognormalFit, strike: float,
                             branch: str, discount_factor: float) -> np.ndarray:
    """Gradient of the discounted call price in (shift, mu, sigma).

    On the live branch the identity scale * pdf(sigma + d) =
    (strike - shift) * pdf(d) removes every density term except the one
    attached to sigma.
    """
    m = fit.scale
    c = fit.sigma
    if branch == BRANCH_STRIKE_AT_OR_BELOW_SHIFT:
        return discount_factor * np.array([1.0, m, m * c])
    d = (fit.mu - math.log(strike - fit.shift)) / c
    nd = ndtr(d)
    ncd = ndtr(c + d)
    phi_cd = math.exp(-0.5 * (c + d) ** 2) / math.sqrt(2.0 * math.pi)
    return discount_factor * np.array([nd, m * ncd, m * (c * ncd + phi_cd)])


def fd_greeks(price_fn, spots, vols, spot_rel_step: float = SPOT_REL_STEP,
              vol_abs_step: float = VOL_ABS_STEP, scheme: str = "central") -> GreeksResult:
    """Bump-and-reprice greeks for any price function of (spots, vols).

    Spot bumps are relative, vol bumps absolute.  scheme is "forward",
    "central" or "central4" (fourth order, error falling as step^4).
    """
    spots = np.asarray(spots, dtype=float)
    vols = np.asarray(vols, dtype=float)

    def derivative(args_fn, h):
        if scheme == "forward":
            return (price_fn(*args_fn(h)) - price_fn(*args_fn(0.0))) / h
        if scheme == "central":
            return (price_fn(*args_fn(h)) - price_fn(*args_fn(-h))) / (2.0 * h)
        if scheme == "central4":
            return (-price_fn(*args_fn(2.0 * h)) + 8.0 * price_fn(*args_fn(h))
                    - 8.0 * price_fn(*args_fn(-h)) + price_fn(*args_fn(-2.0 * h))) / (12.0 * h)
        raise ValueError(f"unknown scheme {scheme!r}")

    n = spots.size
    deltas = np.zeros(n)
    vegas = np.zeros(n)
    for j in range(n):
        h_s = spot_rel_step * spots[j]

        def bump_spot(h, j=j):
            bumped = spots.copy()
            bumped[j] += h
            return bumped, vols

        def bump_vol(h, j=j):
            bumped = vols.copy()
            bumped[j] += h
            return spots, bumped

        deltas[j] = derivative(bump_spot, h_s)
        # a downward vol bump must not cross zero; fall back to one-sided
        if scheme != "forward" and vols[j] < 2.0 * vol_abs_step:
            vegas[j] = (price_fn(*bump_vol(vol_abs_step))
                        - price_fn(*bump_vol(0.0))) / vol_abs_step
        else:
            vegas[j] = derivative(bump_vol, vol_abs_step)
    return GreeksResult(deltas, vegas, "finite-difference")


def model_price_fn(basket: BasketSpec, correlations: CorrelationMatrix,
                   schedule: ObservationSchedule, discount: DiscountSpec):
    """Closure (spots, vols) -> model price with frozen participation units."""

    def price(spots, vols):
        bumped = basket.with_spots(spots).with_vols(vols)
        return asian_call_price(bumped, correlations, schedule, discount).value

    return price


def analytic_greeks(basket: BasketSpec, correlations: CorrelationMatrix,
                    schedule: ObservationSchedule, discount: DiscountSpec) -> GreeksResult:
    """Spot deltas and vol vegas of the averaged basket call.

    Degenerate averages get their exact intrinsic sensitivities.  When the
    fit sits on the two-moment fallback the implicit-function step is not
    defined by the three-moment system, so the result falls back to central
    differences of the model price and reports method accordingly.
    """
    require_valid_market(basket, correlations, schedule, discount)
    moments = asian_moments(basket, correlations, schedule, discount.rate)
    df = discount.factor(schedule.maturity)
    times = np.asarray(schedule.times)

    if moments.degenerate:
        if moments.m1 > basket.strike:
            growth = np.exp(np.outer(times, basket.drifts(discount.rate)))
            deltas = df * basket.unit_array() * growth.mean(axis=0)
        else:
            deltas = np.zeros(basket.n_indices)
        return GreeksResult(deltas, np.zeros(basket.n_indices), "analytic")

    result = asian_call_price(basket, correlations, schedule, discount)
    fit = result.fit
    if fit.lognormal_fallback:
        return fd_greeks(model_price_fn(basket, correlations, schedule, discount),
                         basket.spots, basket.vols)

    jac = matching_jacobian(fit)
    grad = price_parameter_gradient(fit, basket.strike, result.branch, df)
    try:
        adjoint = np.linalg.solve(jac.T, grad)
    except np.linalg.LinAlgError:
        return fd_greeks(model_price_fn(basket, correlations, schedule, discount),
                         basket.spots, basket.vols)
    d_spot, d_vol = asian_moment_derivatives(basket, correlations, schedule,
                                             discount.rate)
    return GreeksResult(adjoint @ d_spot, adjoint @ d_vol, "analytic")
