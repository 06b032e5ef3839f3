"""Determinism contract, distributional correctness, and payoff wiring."""

import math

import numpy as np
import pytest

from eqlink import (AsianCallPayoff, CorrelationMatrix, DiscountSpec,
                    FlooredReturnPayoff, GuaranteeSpec, IndexSpec,
                    MarketDataError, McConfig, ObservationSchedule,
                    SecurityPayoff, SegFundPutPayoff, SegFundSpec,
                    asian_call_price, build_basket, correlation_factor,
                    floored_return_value, mc_price, mc_samples,
                    security_value, simulate_basket_paths)

from conftest import make_benchmark


def small_payoff():
    basket = build_basket([IndexSpec("A", 100.0, 0.2),
                           IndexSpec("B", 50.0, 0.3)], [60.0, 40.0])
    corr = CorrelationMatrix.uniform(2, 0.5)
    sched = ObservationSchedule([0.5, 1.0, 1.5, 2.0], 2.0)
    return AsianCallPayoff(basket, corr, sched, DiscountSpec(0.03))


def test_levels_are_pure_function_of_path_index():
    payoff = small_payoff()
    sampler = payoff.sampler(McConfig(n_paths=1000, seed=4))
    full = sampler.levels(0, 257)
    assert np.array_equal(sampler.levels(0, 100), full[:100])
    assert np.array_equal(sampler.levels(100, 57), full[100:157])
    assert np.array_equal(sampler.levels(193, 64), full[193:257])


def test_bit_identical_across_chunking_and_workers():
    payoff = small_payoff()
    estimates = [
        mc_price(payoff, McConfig(n_paths=40_000, seed=9, chunk_size=40_000,
                                  n_workers=1)),
        mc_price(payoff, McConfig(n_paths=40_000, seed=9, chunk_size=1024,
                                  n_workers=4)),
        mc_price(payoff, McConfig(n_paths=40_000, seed=9, chunk_size=313,
                                  n_workers=16)),
    ]
    assert estimates[0].mean == estimates[1].mean == estimates[2].mean
    assert (estimates[0].std_error == estimates[1].std_error
            == estimates[2].std_error)


def test_antithetic_pairing_and_determinism():
    payoff = small_payoff()
    cfg = McConfig(n_paths=20_000, seed=3, antithetic=True)
    sampler = payoff.sampler(cfg)
    z = sampler.normals(0, 4)
    assert np.array_equal(z[0], -z[1])
    assert np.array_equal(z[2], -z[3])
    # odd chunk boundaries split pairs without changing any draw
    a = mc_price(payoff, McConfig(n_paths=20_000, seed=3, antithetic=True,
                                  chunk_size=999))
    b = mc_price(payoff, McConfig(n_paths=20_000, seed=3, antithetic=True,
                                  chunk_size=4096, n_workers=4))
    assert a.mean == b.mean and a.std_error == b.std_error


def test_antithetic_requires_even_paths():
    with pytest.raises(ValueError):
        McConfig(n_paths=101, antithetic=True)


def test_different_seeds_differ():
    payoff = small_payoff()
    a = mc_price(payoff, McConfig(n_paths=10_000, seed=1))
    b = mc_price(payoff, McConfig(n_paths=10_000, seed=2))
    assert a.mean != b.mean


def test_marginal_distribution_and_correlation():
    ix = (IndexSpec("A", 100.0, 0.2), IndexSpec("B", 80.0, 0.4))
    corr = CorrelationMatrix.uniform(2, 0.65)
    sampler = simulate_basket_paths(ix, corr, [1.0, 2.0], 0.03,
                                    McConfig(n_paths=200_000, seed=21))
    levels = sampler.levels(0, 200_000)
    # terminal log returns: mean (mu - s^2/2) T, variance s^2 T, corr rho
    logs = np.log(levels[:, 1, :] / np.array([100.0, 80.0]))
    for j, vol in enumerate((0.2, 0.4)):
        drift = 0.03 - 0.5 * vol * vol
        se_mean = vol * math.sqrt(2.0) / math.sqrt(logs.shape[0])
        assert abs(logs[:, j].mean() - drift * 2.0) <= 4.0 * se_mean
        assert logs[:, j].std(ddof=1) == pytest.approx(vol * math.sqrt(2.0),
                                                       rel=0.01)
    sample_corr = np.corrcoef(logs[:, 0], logs[:, 1])[0, 1]
    assert sample_corr == pytest.approx(0.65, abs=0.005)


def test_forward_martingale():
    ix = (IndexSpec("A", 100.0, 0.3, div_yield=0.01),)
    sampler = simulate_basket_paths(ix, CorrelationMatrix.identity(1), [2.0],
                                    0.05, McConfig(n_paths=400_000, seed=8))
    levels = sampler.levels(0, 400_000)[:, 0, 0]
    target = 100.0 * math.exp((0.05 - 0.01) * 2.0)
    se = levels.std(ddof=1) / math.sqrt(levels.size)
    assert abs(levels.mean() - target) <= 4.0 * se


def test_zero_vol_paths_are_deterministic():
    ix = (IndexSpec("A", 100.0, 0.0),)
    sampler = simulate_basket_paths(ix, CorrelationMatrix.identity(1),
                                    [1.0, 2.0], 0.02,
                                    McConfig(n_paths=100, seed=5))
    levels = sampler.levels(0, 100)
    assert np.allclose(levels[:, 0, 0], 100.0 * math.exp(0.02), rtol=1e-14)
    assert np.allclose(levels[:, 1, 0], 100.0 * math.exp(0.04), rtol=1e-14)
    est = mc_price(small_payoff(), McConfig(n_paths=100, seed=5))
    assert est.std_error > 0.0  # stochastic case for contrast


def test_perfect_correlation_supported():
    corr = CorrelationMatrix.uniform(2, 1.0)
    factor = correlation_factor(corr)
    assert np.allclose(factor @ factor.T, corr.entries, atol=1e-12)
    ix = (IndexSpec("A", 100.0, 0.2), IndexSpec("B", 100.0, 0.2))
    sampler = simulate_basket_paths(ix, corr, [1.0], 0.0,
                                    McConfig(n_paths=1000, seed=2))
    levels = sampler.levels(0, 1000)
    assert np.allclose(levels[:, 0, 0], levels[:, 0, 1], rtol=1e-12)


def test_non_psd_correlation_rejected():
    corr = CorrelationMatrix.uniform(3, -0.9)
    with pytest.raises(MarketDataError):
        correlation_factor(corr)


def test_mc_agrees_with_model_on_small_basket():
    payoff = small_payoff()
    est = mc_price(payoff, McConfig(n_paths=300_000, seed=6))
    model = asian_call_price(payoff.basket, payoff.correlations,
                             payoff.schedule, payoff.discount).value
    assert abs(model - est.mean) <= 4.0 * est.std_error


def test_security_payoff_undecomposed_matches_decomposition():
    basket, corr, schedule, discount = make_benchmark()
    guarantee = GuaranteeSpec(100.0)
    payoff = SecurityPayoff(guarantee, basket, corr, schedule, discount)
    est = mc_price(payoff, McConfig(n_paths=300_000, seed=12))
    model = security_value(guarantee, basket, corr, schedule, discount).value
    assert abs(model - est.mean) <= 4.0 * est.std_error


def test_segfund_payoff_smoke():
    fund = SegFundSpec(100.0, [0.7, 0.3], [1.0, 2.0], [0.01, 0.01],
                       [0.005, 0.005])
    ix = (IndexSpec("A", 120.0, 0.22), IndexSpec("B", 80.0, 0.18))
    corr = CorrelationMatrix.uniform(2, 0.3)
    payoff = SegFundPutPayoff(fund, ix, corr, DiscountSpec(0.03), 2.0)
    est = mc_price(payoff, McConfig(n_paths=200_000, seed=14))
    assert est.mean > 0.0
    assert est.std_error > 0.0


def test_floored_return_payoff_time_zero_handling():
    ix = IndexSpec("A", 100.0, 0.25)
    with_zero = FlooredReturnPayoff(ix, (0.0, 0.5, 1.0), 0.05, 0.0)
    est = mc_price(with_zero, McConfig(n_paths=100_000, seed=7))
    closed = floored_return_value([0.0, 0.5, 1.0], 0.05, 0.0)
    assert abs(closed - est.mean) <= 4.0 * est.std_error
    # schedule starting after valuation simulates the first level too
    shifted = FlooredReturnPayoff(ix, (0.25, 0.75, 1.25), 0.05, 0.0)
    est2 = mc_price(shifted, McConfig(n_paths=100_000, seed=7))
    closed2 = floored_return_value([0.25, 0.75, 1.25], 0.05, 0.0)
    assert abs(closed2 - est2.mean) <= 4.0 * est2.std_error


def test_standard_error_scaling():
    payoff = small_payoff()
    se = {}
    for n in (2_000, 20_000, 200_000):
        se[n] = mc_price(payoff, McConfig(n_paths=n, seed=10)).std_error
    assert se[2_000] / se[20_000] == pytest.approx(math.sqrt(10), rel=0.15)
    assert se[20_000] / se[200_000] == pytest.approx(math.sqrt(10), rel=0.15)


def test_antithetic_reduces_error_for_monotone_payoff():
    payoff = small_payoff()
    plain = mc_price(payoff, McConfig(n_paths=100_000, seed=19))
    anti = mc_price(payoff, McConfig(n_paths=100_000, seed=19, antithetic=True))
    assert anti.std_error < plain.std_error


def test_estimate_fields():
    payoff = small_payoff()
    est = mc_price(payoff, McConfig(n_paths=5_000, seed=1))
    assert est.n_paths == 5_000
    samples = mc_samples(payoff, McConfig(n_paths=5_000, seed=1))
    assert samples.size == 5_000
    assert est.mean == pytest.approx(samples.mean(), rel=1e-12)
