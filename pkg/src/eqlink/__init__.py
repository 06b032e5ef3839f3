"""Pricing of equity-linked securities on discretely averaged index baskets.

The model side approximates the time average of a correlated GBM basket by
matching three moments to a shifted lognormal, with a two-moment lognormal
benchmark, analytic hedge ratios, a segregated-fund maturity guarantee, and
a reproducible Monte Carlo oracle for everything.
"""

from .market import (BasketSpec, CorrelationMatrix, DiscountSpec, GuaranteeSpec,
                     IndexSpec, MarketDataError, ObservationSchedule, SegFundSpec,
                     ValidationReport, build_basket, build_schedule_from_dates,
                     validate_market, year_fraction)
from .moments import (MomentSet, asian_moments, central_from_raw,
                      gbm_average_moments, terminal_moments)
from .fitting import (DegenerateDistributionError, LognormalFit,
                      ShiftedLognormalFit, UnmatchableSkewError, fit_lognormal,
                      fit_shifted_lognormal, skew_cubic_root)
from .pricing import (PriceResult, asian_call_price, asian_put_price,
                      floored_return_value, levy_call_price, security_value,
                      segfund_put_price, shifted_lognormal_call,
                      shifted_lognormal_put)
from .greeks import GreeksResult, analytic_greeks, fd_greeks, model_price_fn
from .montecarlo import (AsianCallPayoff, FlooredReturnPayoff, GbmPathSampler,
                         McConfig, McEstimate, SecurityPayoff, SegFundPutPayoff,
                         correlation_factor, mc_price, mc_samples,
                         simulate_basket_paths)

__version__ = "0.1.0"

__all__ = [
    "BasketSpec", "CorrelationMatrix", "DiscountSpec", "GuaranteeSpec",
    "IndexSpec", "MarketDataError", "ObservationSchedule", "SegFundSpec",
    "ValidationReport", "build_basket", "build_schedule_from_dates",
    "validate_market", "year_fraction",
    "MomentSet", "asian_moments", "central_from_raw", "gbm_average_moments",
    "terminal_moments",
    "DegenerateDistributionError", "LognormalFit", "ShiftedLognormalFit",
    "UnmatchableSkewError", "fit_lognormal", "fit_shifted_lognormal",
    "skew_cubic_root",
    "PriceResult", "asian_call_price", "asian_put_price", "floored_return_value",
    "levy_call_price", "security_value", "segfund_put_price",
    "shifted_lognormal_call", "shifted_lognormal_put",
    "GreeksResult", "analytic_greeks", "fd_greeks", "model_price_fn",
    "AsianCallPayoff", "FlooredReturnPayoff", "GbmPathSampler", "McConfig",
    "McEstimate", "SecurityPayoff", "SegFundPutPayoff", "correlation_factor",
    "mc_price", "mc_samples", "simulate_basket_paths",
]
