"""Pricing formulas: closed-form oracles, parity, branches, special cases."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import lognorm

from eqlink import (CorrelationMatrix, DiscountSpec, GuaranteeSpec, IndexSpec,
                    MarketDataError, ObservationSchedule, SegFundSpec,
                    UnmatchableSkewError, asian_call_price, asian_moments,
                    asian_put_price, build_basket, fit_shifted_lognormal,
                    floored_return_value, levy_call_price, security_value,
                    segfund_put_price, shifted_lognormal_call,
                    shifted_lognormal_put)
from eqlink.fitting import ShiftedLognormalFit
from eqlink.pricing import (BRANCH_DEGENERATE, BRANCH_GUARANTEE_ABOVE_SHIFT,
                            BRANCH_STRIKE_ABOVE_SHIFT,
                            BRANCH_STRIKE_AT_OR_BELOW_SHIFT)

from conftest import european_call, random_instance


def single_index_setup(spot, vol, maturity, rate, moneyness=1.0):
    """M=1, N=1 basket whose strike is 100 and spot is 100/moneyness."""
    base = build_basket([IndexSpec("X", 100.0, vol)], [100.0])
    basket = base.with_spots([100.0 / moneyness])
    schedule = ObservationSchedule([maturity], maturity)
    return basket, CorrelationMatrix.identity(1), schedule, DiscountSpec(rate)


def test_single_observation_equals_european_call():
    for vol in (0.1, 0.3, 0.5):
        for moneyness in (0.8, 1.0, 1.2):
            basket, corr, sched, disc = single_index_setup(100.0, vol, 2.0,
                                                           0.03, moneyness)
            res = asian_call_price(basket, corr, sched, disc)
            ref = european_call(100.0 / moneyness, 100.0, vol, 2.0, 0.03)
            assert res.value == pytest.approx(ref, rel=1e-11)
            assert abs(res.fit.shift) <= 1e-7


def test_put_call_parity_exact():
    rng = np.random.default_rng(31)
    for _ in range(40):
        basket, corr, schedule, discount = random_instance(rng)
        call = asian_call_price(basket, corr, schedule, discount)
        put = asian_put_price(basket, corr, schedule, discount)
        mom = asian_moments(basket, corr, schedule, discount.rate)
        rhs = call.discount_factor * (mom.m1 - basket.strike)
        assert call.value - put.value == pytest.approx(rhs, abs=1e-10)


def test_branch_formulas_agree_at_boundary():
    # both branch expressions evaluated at a strike a hair above the shift
    fit = ShiftedLognormalFit(50.0, 1.2, 0.4)
    strike = fit.shift * (1.0 + 1e-7)
    live, branch = shifted_lognormal_call(fit, strike)
    assert branch == BRANCH_STRIKE_ABOVE_SHIFT
    certain = (fit.shift - strike) + fit.scale
    assert abs(live - certain) <= 1e-8 * certain


def test_strike_below_shift_branch_is_discounted_forward_gap():
    fit = ShiftedLognormalFit(50.0, 1.2, 0.4)
    for strike in (49.9, 50.0, 10.0):
        value, branch = shifted_lognormal_call(fit, strike)
        assert branch == BRANCH_STRIKE_AT_OR_BELOW_SHIFT
        assert value == pytest.approx(fit.shift + fit.scale - strike, rel=1e-15)
        put_value, _ = shifted_lognormal_put(fit, strike)
        assert put_value == 0.0


def test_call_value_against_quadrature():
    fit = ShiftedLognormalFit(30.0, 3.1, 0.28)
    dist = lognorm(s=fit.sigma, scale=math.exp(fit.mu))
    for strike in (40.0, 52.0, 70.0):
        expectation, _ = shifted_lognormal_call(fit, strike)
        integral = quad(lambda v: max(fit.shift + v - strike, 0.0) * dist.pdf(v),
                        0.0, np.inf, limit=300)[0]
        assert expectation == pytest.approx(integral, rel=1e-8)


def test_put_value_against_quadrature():
    fit = ShiftedLognormalFit(30.0, 3.1, 0.28)
    dist = lognorm(s=fit.sigma, scale=math.exp(fit.mu))
    for strike in (45.0, 60.0):
        expectation, branch = shifted_lognormal_put(fit, strike)
        assert branch == BRANCH_GUARANTEE_ABOVE_SHIFT
        integral = quad(lambda v: max(strike - fit.shift - v, 0.0) * dist.pdf(v),
                        0.0, strike - fit.shift, limit=300)[0]
        assert expectation == pytest.approx(integral, rel=1e-8)


def test_zero_vol_prices_intrinsic():
    ix = [IndexSpec("A", 100.0, 0.0), IndexSpec("B", 50.0, 0.0)]
    basket = build_basket(ix, [60.0, 40.0])
    sched = ObservationSchedule([1.0, 2.0], 2.0)
    disc = DiscountSpec(0.04)
    res = asian_call_price(basket, CorrelationMatrix.identity(2), sched, disc)
    assert res.branch == BRANCH_DEGENERATE
    mom = asian_moments(basket, CorrelationMatrix.identity(2), sched, disc.rate)
    assert res.value == pytest.approx(res.discount_factor * (mom.m1 - 100.0),
                                      rel=1e-12)
    # with zero rate the forward equals the strike and the call is worthless
    flat = asian_call_price(basket, CorrelationMatrix.identity(2), sched,
                            DiscountSpec(0.0))
    assert flat.value == 0.0
    assert flat.branch == BRANCH_DEGENERATE


def test_model_price_nondecreasing_in_vol_shift(benchmark):
    basket, corr, schedule, discount = benchmark
    values = []
    for shift in (-50.0, -20.0, 0.0, 30.0, 60.0, 100.0):
        shifted = basket.with_vols(basket.vols * (1 + shift / 100.0))
        values.append(asian_call_price(shifted, corr, schedule, discount).value)
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_levy_equals_european_for_single_lognormal():
    # one index, one observation: the average is exactly lognormal, so the
    # two-moment fit is exact and the Levy price is the classic formula
    basket, corr, sched, disc = single_index_setup(100.0, 0.25, 1.5, 0.02, 1.1)
    res = levy_call_price(basket, corr, sched, disc)
    ref = european_call(100.0 / 1.1, 100.0, 0.25, 1.5, 0.02)
    assert res.value == pytest.approx(ref, rel=1e-12)


def test_levy_terminal_target_uses_final_observation():
    rng = np.random.default_rng(41)
    basket, corr, schedule, discount = random_instance(rng)
    single = ObservationSchedule([schedule.times[-1]], schedule.maturity)
    averaged = levy_call_price(basket, corr, schedule, discount,
                               fit_target="terminal")
    collapsed = levy_call_price(basket, corr, single, discount,
                                fit_target="average")
    assert averaged.value == pytest.approx(collapsed.value, rel=1e-12)
    with pytest.raises(ValueError):
        levy_call_price(basket, corr, schedule, discount, fit_target="spot")


def test_security_value_decomposition(benchmark):
    basket, corr, schedule, discount = benchmark
    call = asian_call_price(basket, corr, schedule, discount)
    sec = security_value(GuaranteeSpec(100.0), basket, corr, schedule, discount)
    assert sec.value == pytest.approx(call.discount_factor * 100.0 + call.value,
                                      rel=1e-15)


def test_invalid_market_raises():
    basket = build_basket([IndexSpec("A", 100.0, 0.2)], [100.0])
    bad_sched = ObservationSchedule([2.0, 1.0], 2.0)
    with pytest.raises(MarketDataError):
        asian_call_price(basket, CorrelationMatrix.identity(1), bad_sched,
                         DiscountSpec(0.0))


def test_segfund_zero_fee_zero_vol_shortfall_exact():
    # deterministic fund worth less than the principal at maturity: the
    # put pays the discounted gap exactly
    fund = SegFundSpec(100.0, [0.6, 0.4], [], [], [])
    rate, q, maturity = 0.01, 0.04, 2.0
    ix = (IndexSpec("A", 120.0, 0.0, div_yield=q),
          IndexSpec("B", 80.0, 0.0, div_yield=q))
    res = segfund_put_price(fund, ix, CorrelationMatrix.identity(2),
                            DiscountSpec(rate), maturity)
    forward = 100.0 * math.exp((rate - q) * maturity)
    expected = math.exp(-rate * maturity) * (100.0 - forward)
    assert res.branch == BRANCH_DEGENERATE
    assert abs(res.value - expected) <= 1e-12


def test_segfund_put_zero_when_forward_covers_principal():
    fund = SegFundSpec(100.0, [1.0], [], [], [])
    ix = (IndexSpec("A", 50.0, 0.0),)
    res = segfund_put_price(fund, ix, CorrelationMatrix.identity(1),
                            DiscountSpec(0.02), 1.0)
    assert res.value == 0.0


def test_segfund_fee_monotonicity():
    # more fees, fewer terminal units, deeper shortfall
    ix = (IndexSpec("A", 120.0, 0.22), IndexSpec("B", 80.0, 0.18))
    corr = CorrelationMatrix.uniform(2, 0.3)
    disc = DiscountSpec(0.03)
    previous = -1.0
    for fee in (0.0, 0.005, 0.01, 0.02, 0.04):
        fund = SegFundSpec(100.0, [0.6, 0.4], [1.0, 2.0, 3.0],
                           [fee] * 3, [0.005] * 3)
        value = segfund_put_price(fund, ix, corr, disc, 3.0).value
        assert value >= previous
        previous = value
    previous = -1.0
    for fee in (0.0, 0.003, 0.01, 0.03):
        fund = SegFundSpec(100.0, [0.6, 0.4], [1.0, 2.0, 3.0],
                           [0.01] * 3, [fee] * 3)
        value = segfund_put_price(fund, ix, corr, disc, 3.0).value
        assert value >= previous
        previous = value


def test_segfund_rejects_bad_inputs():
    fund = SegFundSpec(100.0, [0.6, 0.4], [1.0], [0.01], [0.0])
    ix = (IndexSpec("A", 120.0, 0.2), IndexSpec("B", 80.0, 0.2))
    with pytest.raises(MarketDataError):
        segfund_put_price(fund, ix, CorrelationMatrix.identity(3),
                          DiscountSpec(0.02), 2.0)
    with pytest.raises(MarketDataError):
        segfund_put_price(fund, ix, CorrelationMatrix.identity(2),
                          DiscountSpec(0.02), 0.5)


def test_floored_return_closed_form():
    # two annual periods: value is e^{-2r} * 2 (e^{r-q} - 1) when spans are 1
    rate, q = 0.05, 0.0
    value = floored_return_value([0.0, 1.0, 2.0], rate, q)
    expected = math.exp(-2 * rate) * 2 * (math.exp(rate - q) - 1.0)
    assert value == pytest.approx(expected, rel=1e-14)


def test_floored_return_rate_equals_yield_is_exactly_zero():
    for times in ([0.0, 1.0], [0.0, 0.5, 1.0, 1.5], [0.25, 0.5, 0.75]):
        assert floored_return_value(times, 0.04, 0.04) == 0.0


def test_floored_return_rejects_binding_floor_and_bad_times():
    with pytest.raises(ValueError):
        floored_return_value([0.0, 1.0], 0.05, 0.0, floor=-0.5)
    with pytest.raises(ValueError):
        floored_return_value([0.0], 0.05)
    with pytest.raises(ValueError):
        floored_return_value([1.0, 0.5], 0.05)


def test_unmatchable_skew_surfaces():
    # negative third central moment cannot come from this basket model, so
    # drive the fit directly through a crafted moment set
    from eqlink.moments import MomentSet
    with pytest.raises(UnmatchableSkewError):
        fit_shifted_lognormal(MomentSet.from_central(10.0, 4.0, 0.0))
