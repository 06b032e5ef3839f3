"""Monte Carlo oracle for every payoff priced in closed form elsewhere.

Reproducibility contract: the normals driving path i are a pure function of
(seed, i), produced by jumping a counter-based Philox stream directly to
that path's block.  Payoffs are written into a preallocated array slot by
path index and reduced with compensated summation in fixed index order, so
the estimate is bit-identical no matter how the work is chunked or how many
workers run the chunks.  Antithetic pairs (2i, 2i+1) share the draw of base
path i with the sign flipped on odd members, which preserves the contract.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from .market import (BasketSpec, CorrelationMatrix, DiscountSpec, GuaranteeSpec,
                     IndexSpec, MarketDataError, ObservationSchedule, SegFundSpec)

# Philox advance() moves the counter in blocks of four 64-bit outputs, so
# per-path draw counts are padded to a multiple of four to keep path starts
# block-aligned.
PHILOX_BLOCK = 4

DEFAULT_PATHS = 500_000


def default_workers() -> int:
    env = os.environ.get("EQLINK_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


@dataclass(frozen=True)
class McConfig:
    """Simulation controls; defaults favor accuracy over speed."""

    n_paths: int = DEFAULT_PATHS
    seed: int = 0
    antithetic: bool = False
    chunk_size: int = 65536
    n_workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be at least 1")
        if self.n_workers < 1:
            raise ValueError("n_workers must be at least 1")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even n_paths")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int


def correlation_factor(correlations: CorrelationMatrix, tol: float = 1e-10) -> np.ndarray:
    """Matrix A with A A^T equal to the correlation matrix.

    Cholesky when positive definite; otherwise an eigenvalue factor that
    tolerates semi-definite matrices (perfect correlation included) and
    rejects anything with an eigenvalue below -tol.
    """
    c = 0.5 * (correlations.entries + correlations.entries.T)
    if not np.all(np.isfinite(c)):
        raise MarketDataError("correlation entries not finite")
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(c)
    if w.min() < -tol:
        raise MarketDataError("correlation not positive semi-definite")
    return v * np.sqrt(np.clip(w, 0.0, None))


class GbmPathSampler:
    """Exact lognormal stepping of correlated GBM paths at fixed times.

    levels(start, count) returns the index levels for paths start..start+count-1
    as an array of shape (count, n_times, n_indices), identical to the
    corresponding rows of levels(0, n) for any chunking of the path range.
    """

    def __init__(self, spots, drifts, vols, factor, times, seed: int,
                 antithetic: bool = False):
        spots = np.asarray(spots, dtype=float)
        drifts = np.asarray(drifts, dtype=float)
        vols = np.asarray(vols, dtype=float)
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("need at least one simulation time")
        if np.any(times <= 0.0) or np.any(np.diff(times) <= 0.0):
            raise ValueError("simulation times must be positive and increasing")
        self.spots = spots
        self.factor = np.asarray(factor, dtype=float)
        self.seed = int(seed)
        self.antithetic = bool(antithetic)
        self.n_times = times.size
        self.n_indices = spots.size
        steps = np.diff(np.concatenate(([0.0], times)))
        self.loc = (drifts - 0.5 * vols ** 2)[None, :] * steps[:, None]
        self.scale = vols[None, :] * np.sqrt(steps)[:, None]
        draws = self.n_times * self.n_indices
        self._padded = ((draws + PHILOX_BLOCK - 1) // PHILOX_BLOCK) * PHILOX_BLOCK

    def _base_normals(self, base_start: int, base_count: int) -> np.ndarray:
        bits = Philox(key=self.seed)
        bits.advance(base_start * (self._padded // PHILOX_BLOCK))
        u = Generator(bits).random((base_count, self._padded))
        u = u[:, : self.n_times * self.n_indices]
        # random() can return exactly 0.0, whose normal quantile is -inf
        np.maximum(u, 2.0 ** -54, out=u)
        z = ndtri(u)
        return z.reshape(base_count, self.n_times, self.n_indices)

    def normals(self, start: int, count: int) -> np.ndarray:
        """Correlated normal increments for the requested path range."""
        paths = np.arange(start, start + count)
        if self.antithetic:
            base = paths // 2
            z = self._base_normals(int(base[0]), int(base[-1] - base[0] + 1))
            z = z[base - base[0]]
            z = z * np.where(paths % 2 == 0, 1.0, -1.0)[:, None, None]
        else:
            z = self._base_normals(start, count)
        return z @ self.factor.T

    def levels(self, start: int, count: int) -> np.ndarray:
        xi = self.normals(start, count)
        log_steps = self.loc[None, :, :] + self.scale[None, :, :] * xi
        return self.spots[None, None, :] * np.exp(np.cumsum(log_steps, axis=1))


def simulate_basket_paths(indices, correlations: CorrelationMatrix, times,
                          rate: float, config: McConfig) -> GbmPathSampler:
    """Sampler for the given indices at the given observation times."""
    indices = tuple(indices)
    spots = np.array([ix.spot for ix in indices])
    drifts = np.array([ix.drift(rate) for ix in indices])
    vols = np.array([ix.vol for ix in indices])
    factor = correlation_factor(correlations)
    if factor.shape[0] != len(indices):
        raise MarketDataError("correlation dimension mismatch")
    return GbmPathSampler(spots, drifts, vols, factor, times,
                          config.seed, config.antithetic)


@dataclass(frozen=True)
class AsianCallPayoff:
    """Discretely averaged basket call, the target of asian_call_price."""

    basket: BasketSpec
    correlations: CorrelationMatrix
    schedule: ObservationSchedule
    discount: DiscountSpec

    @property
    def discount_factor(self) -> float:
        return self.discount.factor(self.schedule.maturity)

    def sampler(self, config: McConfig) -> GbmPathSampler:
        return simulate_basket_paths(self.basket.indices, self.correlations,
                                     self.schedule.times, self.discount.rate, config)

    def evaluate(self, levels: np.ndarray) -> np.ndarray:
        averages = (levels @ self.basket.unit_array()).mean(axis=1)
        return np.maximum(averages - self.basket.strike, 0.0)


@dataclass(frozen=True)
class SecurityPayoff:
    """Undecomposed contract payoff: the guaranteed amount plus basket upside.

    Evaluated literally as max(guarantee + sum_j weight_j * average return_j,
    guarantee) so the simulation exercises the contract definition rather
    than the decomposition used by the closed form.
    """

    guarantee: GuaranteeSpec
    basket: BasketSpec
    correlations: CorrelationMatrix
    schedule: ObservationSchedule
    discount: DiscountSpec

    @property
    def discount_factor(self) -> float:
        return self.discount.factor(self.schedule.maturity)

    def sampler(self, config: McConfig) -> GbmPathSampler:
        return simulate_basket_paths(self.basket.indices, self.correlations,
                                     self.schedule.times, self.discount.rate, config)

    def evaluate(self, levels: np.ndarray) -> np.ndarray:
        averages = levels.mean(axis=1)
        rel_gains = averages / self.basket.spots[None, :] - 1.0
        linked = rel_gains @ np.array(self.basket.weights)
        amount = self.guarantee.amount
        return np.maximum(amount + linked, amount)


@dataclass(frozen=True)
class SegFundPutPayoff:
    """Maturity shortfall of a fee-decayed segregated fund."""

    fund: SegFundSpec
    indices: tuple
    correlations: CorrelationMatrix
    discount: DiscountSpec
    maturity: float

    @property
    def discount_factor(self) -> float:
        return self.discount.factor(self.maturity)

    def sampler(self, config: McConfig) -> GbmPathSampler:
        return simulate_basket_paths(self.indices, self.correlations,
                                     [self.maturity], self.discount.rate, config)

    def evaluate(self, levels: np.ndarray) -> np.ndarray:
        units = self.fund.terminal_units(self.indices)
        fund_value = levels[:, -1, :] @ units
        return np.maximum(self.fund.principal - fund_value, 0.0)


@dataclass(frozen=True)
class FlooredReturnPayoff:
    """Sum of floored periodic returns of a single index, paid at the end."""

    index: IndexSpec
    times: tuple
    rate: float
    div_yield: float = 0.0
    floor: float = -1.0

    @property
    def discount_factor(self) -> float:
        return math.exp(-self.rate * self.times[-1])

    def sampler(self, config: McConfig) -> GbmPathSampler:
        sim_times = [t for t in self.times if t > 0.0]
        ix = IndexSpec(self.index.name, self.index.spot, self.index.vol,
                       self.div_yield)
        return simulate_basket_paths([ix], CorrelationMatrix.identity(1),
                                     sim_times, self.rate, config)

    def evaluate(self, levels: np.ndarray) -> np.ndarray:
        series = levels[:, :, 0]
        if self.times[0] == 0.0:
            first = np.full((series.shape[0], 1), self.index.spot)
            series = np.concatenate([first, series], axis=1)
        rets = series[:, 1:] / series[:, :-1] - 1.0
        return np.maximum(rets, self.floor).sum(axis=1)


def mc_samples(payoff, config: McConfig) -> np.ndarray:
    """Discounted per-path payoffs, in path order.

    This is the full sample behind mc_price, exposed so variance analysis
    (standard errors of differences, common-random-number studies) can work
    on the raw observations.
    """
    sampler = payoff.sampler(config)
    values = np.empty(config.n_paths)
    ranges = [(s, min(s + config.chunk_size, config.n_paths))
              for s in range(0, config.n_paths, config.chunk_size)]

    def run(chunk):
        lo, hi = chunk
        values[lo:hi] = payoff.evaluate(sampler.levels(lo, hi - lo))

    if config.n_workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=config.n_workers) as pool:
            list(pool.map(run, ranges))
    else:
        for chunk in ranges:
            run(chunk)
    return payoff.discount_factor * values


def estimate_from_samples(values: np.ndarray, antithetic: bool) -> McEstimate:
    """Mean and standard error by compensated summation in path order.

    Antithetic samples are reduced to pair means first so the standard
    error reflects the variance actually achieved by the pairing.
    """
    n = values.size
    mean = math.fsum(values.tolist()) / n
    obs = values.reshape(-1, 2).mean(axis=1) if antithetic else values
    k = obs.size
    if k < 2:
        return McEstimate(mean, 0.0, n)
    var = math.fsum(((obs - mean) ** 2).tolist()) / (k - 1)
    return McEstimate(mean, math.sqrt(var / k), n)


def mc_price(payoff, config: McConfig) -> McEstimate:
    """Monte Carlo value of a payoff object under the reproducibility contract."""
    values = mc_samples(payoff, config)
    return estimate_from_samples(values, config.antithetic)
