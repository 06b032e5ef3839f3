"""Shared fixtures: the frozen benchmark basket and small instance builders."""

import math

import numpy as np
import pytest
from scipy.special import ndtr

from eqlink import (CorrelationMatrix, DiscountSpec, IndexSpec,
                    ObservationSchedule, build_basket,
                    build_schedule_from_dates)

# Benchmark parameters, frozen after verifying the model-vs-MC error
# pattern with the Monte Carlo oracle.  Spots, weights and the calendar
# come from the repository example file; vols, correlation and rate are
# the illustrative values recorded in docs/benchmark_basket.json.
BENCHMARK_SPOTS = [2421.04, 391.64, 1147.27, 15944.36, 2913.59]
BENCHMARK_VOLS = [0.15, 0.20, 0.25, 0.18, 0.30]
BENCHMARK_WEIGHTS = [25.0, 30.0, 10.0, 2.5, 2.5]
BENCHMARK_RHO = 0.5
BENCHMARK_RATE = 0.02
BENCHMARK_VALUATION = "2019-06-02"
BENCHMARK_DATES = [
    "2022-08-31", "2022-09-30", "2022-10-31", "2022-11-30",
    "2022-12-31", "2023-01-31", "2023-02-28", "2023-03-31",
    "2023-04-30", "2023-05-31", "2023-06-30", "2023-07-22",
]
BENCHMARK_MATURITY_DATE = "2023-07-23"


def make_benchmark():
    indices = [IndexSpec(f"EQ{i + 1}", s, v)
               for i, (s, v) in enumerate(zip(BENCHMARK_SPOTS, BENCHMARK_VOLS))]
    basket = build_basket(indices, BENCHMARK_WEIGHTS)
    corr = CorrelationMatrix.uniform(len(indices), BENCHMARK_RHO)
    schedule = build_schedule_from_dates(BENCHMARK_VALUATION, BENCHMARK_DATES,
                                         BENCHMARK_MATURITY_DATE)
    return basket, corr, schedule, DiscountSpec(BENCHMARK_RATE)


@pytest.fixture(scope="session")
def benchmark():
    return make_benchmark()


def european_call(spot, strike, vol, maturity, rate, div_yield=0.0):
    """Classic lognormal call, the closed-form oracle for M=1, N=1."""
    forward = spot * math.exp((rate - div_yield) * maturity)
    sd = vol * math.sqrt(maturity)
    d1 = (math.log(forward / strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    return math.exp(-rate * maturity) * (forward * ndtr(d1) - strike * ndtr(d2))


def random_instance(rng, max_indices=4, max_observations=8):
    """A random valid basket/correlation/schedule/discount quadruple."""
    n_idx = int(rng.integers(1, max_indices + 1))
    n_obs = int(rng.integers(1, max_observations + 1))
    indices = [IndexSpec(f"R{j}", float(rng.uniform(20.0, 200.0)),
                         float(rng.uniform(0.05, 0.5)),
                         float(rng.uniform(0.0, 0.03)))
               for j in range(n_idx)]
    weights = [float(w) for w in rng.uniform(5.0, 50.0, n_idx)]
    basket = build_basket(indices, weights)
    corr = CorrelationMatrix.uniform(n_idx, float(rng.uniform(0.0, 0.8)))
    times = np.sort(rng.uniform(0.1, 5.0, n_obs)) + np.arange(n_obs) * 1e-3
    schedule = ObservationSchedule([float(t) for t in times], float(times[-1] + 0.01))
    discount = DiscountSpec(float(rng.uniform(0.0, 0.06)))
    return basket, corr, schedule, discount
