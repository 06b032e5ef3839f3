"""Instrument and market data definitions.

The securities priced by this package are written on a basket of equity
indices observed on a discrete schedule.  Everything the numerical layers
need (spots, vols, dividend yields, basket weights, observation times,
correlations, the flat rate) is collected here, together with a validator
that reports every violation it finds instead of stopping at the first.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field, replace

import numpy as np

DAY_COUNT_BASE = 365.0

SYMMETRY_TOL = 1e-12
DIAGONAL_TOL = 1e-12
ENTRY_RANGE_TOL = 1e-12
EIGENVALUE_TOL = 1e-10


class MarketDataError(ValueError):
    """Raised when a pricing operation is asked to run on invalid market data."""


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(frozen=True)
class IndexSpec:
    """One equity index: spot level, volatility, dividend yield.

    The risk-neutral drift is rate - div_yield unless drift_override is set,
    which is how quanto-style adjusted drifts are expressed.
    """

    name: str
    spot: float
    vol: float
    div_yield: float = 0.0
    drift_override: float | None = None

    def __post_init__(self):
        if not _finite(self.spot) or self.spot <= 0.0:
            raise ValueError(f"index {self.name!r}: spot must be finite and positive")
        if not _finite(self.vol) or self.vol < 0.0:
            raise ValueError(f"index {self.name!r}: vol must be finite and nonnegative")
        if not _finite(self.div_yield):
            raise ValueError(f"index {self.name!r}: div_yield must be finite")
        if self.drift_override is not None and not _finite(self.drift_override):
            raise ValueError(f"index {self.name!r}: drift_override must be finite")

    def drift(self, rate: float) -> float:
        if self.drift_override is not None:
            return self.drift_override
        return rate - self.div_yield


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Square matrix of pairwise index correlations.

    Construction only pins the shape; symmetry, unit diagonal, entry range
    and positive semi-definiteness are checked by validate_market so that a
    bad matrix can be reported rather than raised mid-build.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("correlation matrix must be square")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> "CorrelationMatrix":
        return cls(np.eye(n))

    @classmethod
    def uniform(cls, n: int, rho: float) -> "CorrelationMatrix":
        m = np.full((n, n), float(rho))
        np.fill_diagonal(m, 1.0)
        return cls(m)


@dataclass(frozen=True)
class ObservationSchedule:
    """Averaging dates as year fractions, plus the payment maturity."""

    times: tuple
    maturity: float

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "maturity", float(self.maturity))

    @property
    def n_observations(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class DiscountSpec:
    """Flat continuously compounded rate."""

    rate: float

    def factor(self, maturity: float) -> float:
        return math.exp(-self.rate * maturity)


@dataclass(frozen=True)
class GuaranteeSpec:
    """Guaranteed amount paid at maturity regardless of basket performance."""

    amount: float

    def __post_init__(self):
        if not _finite(self.amount) or self.amount < 0.0:
            raise ValueError("guaranteed amount must be finite and nonnegative")


@dataclass(frozen=True)
class BasketSpec:
    """Weighted basket with participation units frozen at construction.

    Each index j gets units alpha_j = weight_j / spot_j, fixed once when the
    basket is built.  Spot bumps (scenarios, hedge ratios) must go through
    with_spots, which keeps the original units so the contract itself does
    not change under the bump.  The strike is the sum of the weights.
    """

    indices: tuple
    weights: tuple
    alphas: tuple
    strike: float

    @property
    def n_indices(self) -> int:
        return len(self.indices)

    @property
    def spots(self) -> np.ndarray:
        return np.array([ix.spot for ix in self.indices])

    @property
    def vols(self) -> np.ndarray:
        return np.array([ix.vol for ix in self.indices])

    @property
    def weight_total(self) -> float:
        return math.fsum(self.weights)

    def drifts(self, rate: float) -> np.ndarray:
        return np.array([ix.drift(rate) for ix in self.indices])

    def unit_array(self) -> np.ndarray:
        return np.array(self.alphas)

    def with_spots(self, new_spots) -> "BasketSpec":
        """Rebuild with bumped spots, keeping units, weights and strike."""
        new_spots = [float(s) for s in new_spots]
        if len(new_spots) != self.n_indices:
            raise ValueError("spot vector length does not match basket")
        bumped = tuple(replace(ix, spot=s) for ix, s in zip(self.indices, new_spots))
        return BasketSpec(bumped, self.weights, self.alphas, self.strike)

    def with_vols(self, new_vols) -> "BasketSpec":
        """Rebuild with bumped vols, keeping everything else."""
        new_vols = [float(v) for v in new_vols]
        if len(new_vols) != self.n_indices:
            raise ValueError("vol vector length does not match basket")
        bumped = tuple(replace(ix, vol=v) for ix, v in zip(self.indices, new_vols))
        return BasketSpec(bumped, self.weights, self.alphas, self.strike)


def build_basket(indices, weights) -> BasketSpec:
    """Freeze participation units weight/spot and set the strike to sum(weights)."""
    indices = tuple(indices)
    weights = tuple(float(w) for w in weights)
    if len(indices) == 0:
        raise ValueError("basket needs at least one index")
    if len(weights) != len(indices):
        raise ValueError("weights length does not match indices")
    for w in weights:
        if not _finite(w) or w <= 0.0:
            raise ValueError("basket weights must be finite and positive")
    alphas = tuple(w / ix.spot for w, ix in zip(weights, indices))
    return BasketSpec(indices, weights, alphas, math.fsum(weights))


@dataclass(frozen=True)
class SegFundSpec:
    """Segregated fund: initial allocations and periodic fee schedule.

    allocations are fractions of the principal invested in each index and
    must sum to one.  At each fee time the invested units are reduced by the
    management fee plus the protection fee for that period, so the terminal
    index weights carry the product of (1 - m_i - p_i) over all periods.
    """

    principal: float
    allocations: tuple
    fee_times: tuple
    mgmt_fees: tuple
    protection_fees: tuple

    def __post_init__(self):
        object.__setattr__(self, "allocations", tuple(float(v) for v in self.allocations))
        object.__setattr__(self, "fee_times", tuple(float(t) for t in self.fee_times))
        object.__setattr__(self, "mgmt_fees", tuple(float(v) for v in self.mgmt_fees))
        object.__setattr__(self, "protection_fees", tuple(float(v) for v in self.protection_fees))
        if not _finite(self.principal) or self.principal <= 0.0:
            raise ValueError("principal must be finite and positive")
        if not self.allocations:
            raise ValueError("fund needs at least one allocation")
        for v in self.allocations:
            if not _finite(v) or v <= 0.0:
                raise ValueError("allocations must be finite and positive")
        if abs(math.fsum(self.allocations) - 1.0) > 1e-12:
            raise ValueError("allocations must sum to one")
        if len(self.mgmt_fees) != len(self.fee_times) or len(self.protection_fees) != len(self.fee_times):
            raise ValueError("fee vectors must match fee_times in length")
        prev = 0.0
        for t in self.fee_times:
            if not _finite(t) or t <= prev:
                raise ValueError("fee times must be positive and strictly increasing")
            prev = t
        for m_fee, p_fee in zip(self.mgmt_fees, self.protection_fees):
            if not (0.0 <= m_fee < 1.0) or not (0.0 <= p_fee < 1.0):
                raise ValueError("fees must lie in [0, 1)")
            if m_fee + p_fee >= 1.0:
                raise ValueError("combined fee must stay below one")

    def units(self, indices) -> np.ndarray:
        """Initial index units bought with the allocated principal."""
        if len(indices) != len(self.allocations):
            raise ValueError("allocations length does not match indices")
        return np.array([v * self.principal / ix.spot for v, ix in zip(self.allocations, indices)])

    def fee_survival(self) -> float:
        """Fraction of units surviving every fee deduction."""
        factors = [1.0 - (m + p) for m, p in zip(self.mgmt_fees, self.protection_fees)]
        return float(np.prod(factors)) if factors else 1.0

    def terminal_units(self, indices) -> np.ndarray:
        return self.units(indices) * self.fee_survival()


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_market: empty violations means usable data."""

    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_market(basket: BasketSpec, correlations: CorrelationMatrix,
                    schedule: ObservationSchedule, discount: DiscountSpec) -> ValidationReport:
    """Check the full market snapshot and report every violation found.

    Total on finite input: this never raises on numeric content, it returns
    the list of problems so a caller (or the CLI) can show all of them.
    """
    problems = []
    for ix in basket.indices:
        if not _finite(ix.spot) or ix.spot <= 0.0:
            problems.append(f"index {ix.name}: spot not positive")
        if not _finite(ix.vol) or ix.vol < 0.0:
            problems.append(f"index {ix.name}: vol negative or not finite")
    for w in basket.weights:
        if not _finite(w) or w <= 0.0:
            problems.append("basket weight not positive")
            break
    for a in basket.alphas:
        if not _finite(a) or a <= 0.0:
            problems.append("basket unit not positive")
            break

    c = correlations.entries
    if correlations.dim != basket.n_indices:
        problems.append("correlation dimension mismatch")
    if not np.all(np.isfinite(c)):
        problems.append("correlation entries not finite")
    else:
        if np.max(np.abs(c - c.T)) > SYMMETRY_TOL:
            problems.append("correlation not symmetric")
        if np.max(np.abs(np.diag(c) - 1.0)) > DIAGONAL_TOL:
            problems.append("correlation diagonal not one")
        if np.max(np.abs(c)) > 1.0 + ENTRY_RANGE_TOL:
            problems.append("correlation out of range")
        else:
            sym = 0.5 * (c + c.T)
            try:
                eigmin = float(np.linalg.eigvalsh(sym).min())
            except np.linalg.LinAlgError:
                eigmin = -math.inf
            if eigmin < -EIGENVALUE_TOL:
                problems.append("correlation not positive semi-definite")

    times = schedule.times
    if len(times) == 0:
        problems.append("empty observation schedule")
    else:
        if not all(_finite(t) for t in times) or not _finite(schedule.maturity):
            problems.append("observation times not finite")
        else:
            if any(t <= 0.0 for t in times):
                problems.append("observation times not positive")
            if any(b <= a for a, b in zip(times, times[1:])):
                problems.append("observation times not increasing")
            if max(times) > schedule.maturity:
                problems.append("observation after maturity")
            if schedule.maturity <= 0.0:
                problems.append("maturity not positive")

    if not _finite(discount.rate):
        problems.append("rate not finite")

    return ValidationReport(tuple(problems))


def _as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, str):
        try:
            return dt.date.fromisoformat(value)
        except ValueError as exc:
            raise ValueError(f"unparseable date {value!r}") from exc
    raise ValueError(f"unparseable date {value!r}")


def year_fraction(valuation_date, target) -> float:
    """ACT/365 fixed day count from the valuation date."""
    d0 = _as_date(valuation_date)
    d1 = _as_date(target)
    return (d1 - d0).days / DAY_COUNT_BASE


def build_schedule_from_dates(valuation_date, dates, maturity_date) -> ObservationSchedule:
    """Convert calendar observation dates to an ObservationSchedule.

    Times are ACT/365 fixed year fractions from the valuation date.  Dates
    on or before valuation, or out of order, surface later through
    validate_market rather than here.
    """
    times = tuple(year_fraction(valuation_date, d) for d in dates)
    return ObservationSchedule(times, year_fraction(valuation_date, maturity_date))
