"""Closed-form moments of the time average of a weighted GBM basket.

The average Y = (1/N) sum_k Z(t_k), with Z(t) = sum_j alpha_j I_j(t) and the
indices following correlated geometric Brownian motions, has raw moments
that reduce to finite sums of exponentials of the drift and covariance
accumulated up to the pairwise minimum observation times.  This module
evaluates the first three of them.

The variance and third central moment are computed directly from expm1
kernels instead of differencing raw moments: at low volatility m2 - m1^2
cancels catastrophically while the expm1 form stays fully accurate, and the
raw moments are then recovered from exact polynomial identities.  All big
reductions run through math.fsum so results do not depend on summation
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import BasketSpec, CorrelationMatrix, ObservationSchedule

DEGENERATE_VARIANCE_REL_TOL = 1e-14
NEGATIVE_VARIANCE_REL_TOL = 1e-12


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.ravel().tolist())


@dataclass(frozen=True)
class MomentSet:
    """First three raw moments plus the derived central quantities.

    degenerate is set when the variance is below tolerance relative to the
    squared mean, in which case skew is reported as nan and downstream
    fitting must not be attempted.
    """

    m1: float
    m2: float
    m3: float
    mu2: float
    mu3: float
    skew: float
    degenerate: bool

    @classmethod
    def from_raw(cls, m1: float, m2: float, m3: float) -> "MomentSet":
        mu2, mu3, skew = central_from_raw(m1, m2, m3)
        degenerate = not math.isfinite(skew)
        return cls(m1, m2, m3, mu2, mu3, skew, degenerate)

    @classmethod
    def from_central(cls, m1: float, mu2: float, mu3: float) -> "MomentSet":
        m2 = mu2 + m1 * m1
        m3 = mu3 + 3.0 * m1 * mu2 + m1 ** 3
        degenerate = mu2 <= 0.0 or mu2 < DEGENERATE_VARIANCE_REL_TOL * m1 * m1
        skew = mu3 / mu2 ** 1.5 if not degenerate else math.nan
        return cls(m1, m2, m3, mu2, mu3, skew, degenerate)


def central_from_raw(m1: float, m2: float, m3: float):
    """Central moments and skewness from raw moments.

    Returns (mu2, mu3, skew).  Raises ValueError when the implied variance
    is negative beyond tolerance, which signals inconsistent inputs rather
    than rounding.  A variance below the degeneracy tolerance yields
    skew = nan so callers can flag the distribution as a point mass.
    """
    for v in (m1, m2, m3):
        if not math.isfinite(v):
            raise ValueError("moments must be finite")
    mu2 = m2 - m1 * m1
    scale = max(m1 * m1, abs(m2))
    if mu2 < -NEGATIVE_VARIANCE_REL_TOL * scale:
        raise ValueError("negative variance: raw moments are inconsistent")
    mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 ** 3
    if mu2 < DEGENERATE_VARIANCE_REL_TOL * m1 * m1 or mu2 <= 0.0:
        return mu2, mu3, math.nan
    return mu2, mu3, mu3 / mu2 ** 1.5


def _kernel_inputs(units, spots, drifts, vols, corr, times):
    units = np.asarray(units, dtype=float)
    spots = np.asarray(spots, dtype=float)
    drifts = np.asarray(drifts, dtype=float)
    vols = np.asarray(vols, dtype=float)
    corr = np.asarray(corr, dtype=float)
    times = np.asarray(times, dtype=float)
    # fwd[k, j] is the forward contribution of index j at observation k
    fwd = units[None, :] * spots[None, :] * np.exp(np.outer(times, drifts))
    tau = np.minimum.outer(times, times)
    cov = (vols[:, None] * vols[None, :]) * corr
    return fwd, tau, cov


def gbm_average_moments(units, spots, drifts, vols, corr, times) -> MomentSet:
    """Moments of (1/N) sum_k sum_j units_j I_j(t_k) under correlated GBM.

    units, spots, drifts, vols are length-M vectors, corr is MxM, times is
    the length-N vector of observation year fractions.
    """
    fwd, tau, cov = _kernel_inputs(units, spots, drifts, vols, corr, times)
    n_obs = fwd.shape[0]

    m1 = _fsum(fwd) / n_obs

    # pair kernel: E[(Z_k - E Z_k)(Z_l - E Z_l)] summed over observations
    growth = np.expm1(cov[None, None, :, :] * tau[:, :, None, None])
    pair = fwd[:, None, :, None] * fwd[None, :, None, :] * growth
    mu2 = _fsum(pair) / n_obs ** 2

    # triple kernel: products over the three pairs, each pair accumulating
    # covariance up to the earlier of its two observation times
    g12 = growth[:, :, None, :, :, None]
    g13 = growth[:, None, :, :, None, :]
    g23 = growth[None, :, :, None, :, :]
    f3 = (fwd[:, None, None, :, None, None]
          * fwd[None, :, None, None, :, None]
          * fwd[None, None, :, None, None, :])
    mixed = g12 * g13 + g12 * g23 + g13 * g23 + g12 * g13 * g23
    mu3 = _fsum(f3 * mixed) / n_obs ** 3

    return MomentSet.from_central(m1, mu2, mu3)


def asian_moments(basket: BasketSpec, correlations: CorrelationMatrix,
                  schedule: ObservationSchedule, rate: float) -> MomentSet:
    """Moments of the averaged basket for the frozen participation units."""
    return gbm_average_moments(
        basket.unit_array(), basket.spots, basket.drifts(rate), basket.vols,
        correlations.entries, schedule.times)


def terminal_moments(units, indices, correlations: CorrelationMatrix,
                     maturity: float, rate: float) -> MomentSet:
    """Moments of sum_j units_j I_j(T), a single-observation special case."""
    spots = np.array([ix.spot for ix in indices])
    vols = np.array([ix.vol for ix in indices])
    drifts = np.array([ix.drift(rate) for ix in indices])
    return gbm_average_moments(units, spots, drifts, vols,
                               correlations.entries, [maturity])


def gbm_moment_derivatives(units, spots, drifts, vols, corr, times):
    """Analytic derivatives of the raw moments (m1, m2, m3).

    Returns (d_spot, d_vol), each of shape (3, M): row q holds the
    derivative of m_{q+1} with respect to every spot (at fixed units) or
    every vol.  Raw kernels are used here because derivatives do not suffer
    the cancellation that the level computation does.
    """
    units = np.asarray(units, dtype=float)
    spots = np.asarray(spots, dtype=float)
    vols = np.asarray(vols, dtype=float)
    corr_arr = np.asarray(corr, dtype=float)
    times_arr = np.asarray(times, dtype=float)
    fwd, tau, cov = _kernel_inputs(units, spots, drifts, vols, corr_arr, times_arr)
    n_obs = fwd.shape[0]
    n_idx = fwd.shape[1]

    pair = fwd[:, None, :, None] * fwd[None, :, None, :] * np.exp(
        cov[None, None, :, :] * tau[:, :, None, None])

    c12 = np.exp(cov[None, None, None, :, :, None] * tau[:, :, None, None, None, None])
    c13 = np.exp(cov[None, None, None, :, None, :] * tau[:, None, :, None, None, None])
    c23 = np.exp(cov[None, None, None, None, :, :] * tau[None, :, :, None, None, None])
    f3 = (fwd[:, None, None, :, None, None]
          * fwd[None, :, None, None, :, None]
          * fwd[None, None, :, None, None, :])
    triple = f3 * c12 * c13 * c23

    d_spot = np.zeros((3, n_idx))
    d_vol = np.zeros((3, n_idx))

    d_spot[0] = fwd.sum(axis=0) / (n_obs * spots)

    # spot enters each kernel linearly through the forwards it multiplies
    d_spot[1] = (np.einsum("klpj->p", pair) + np.einsum("klip->p", pair)) / (n_obs ** 2 * spots)
    d_spot[2] = (np.einsum("lmnpjk->p", triple)
                 + np.einsum("lmnipk->p", triple)
                 + np.einsum("lmnijp->p", triple)) / (n_obs ** 3 * spots)

    # vol enters through the accumulated covariances sigma_i sigma_j rho_ij
    sr = vols[None, :] * corr_arr
    d_vol[1] = (np.einsum("klpj,kl,pj->p", pair, tau, sr)
                + np.einsum("klip,kl,pi->p", pair, tau, sr)) / n_obs ** 2
    d_vol[2] = (np.einsum("lmnpjk,lm,pj->p", triple, tau, sr)
                + np.einsum("lmnipk,lm,pi->p", triple, tau, sr)
                + np.einsum("lmnpjk,ln,pk->p", triple, tau, sr)
                + np.einsum("lmnijp,ln,pi->p", triple, tau, sr)
                + np.einsum("lmnipk,mn,pk->p", triple, tau, sr)
                + np.einsum("lmnijp,mn,pj->p", triple, tau, sr)) / n_obs ** 3

    return d_spot, d_vol


def asian_moment_derivatives(basket: BasketSpec, correlations: CorrelationMatrix,
                             schedule: ObservationSchedule, rate: float):
    """Raw-moment sensitivities to each spot and vol, units held fixed."""
    return gbm_moment_derivatives(
        basket.unit_array(), basket.spots, basket.drifts(rate), basket.vols,
        correlations.entries, schedule.times)
