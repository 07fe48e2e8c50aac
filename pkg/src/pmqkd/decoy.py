"""Decoy-state estimation of per-photon-number yields and errors.

Solves the truncated Poisson-mixture linear systems
Q_mu = sum_k P_mu(k) Y_k and E_mu Q_mu = sum_k e_k P_mu(k) Y_k by
bounded least squares.  Poisson mass beyond the truncation is handled
by bracketing: central estimates attribute nothing to the tail, while
the reported yield interval also solves the worst case (tail yield 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from .detection import binary_entropy
from .rate import PmParams, RateBreakdown, misalignment_e_delta
from .simcore import Tally

ILL_CONDITIONED_THRESHOLD = 1e10


class IllConditionedSystemError(ValueError):
    def __init__(self, condition_number: float):
        super().__init__(f"decoy system is ill-conditioned (cond = {condition_number:.3e})")
        self.condition_number = condition_number


@dataclass
class DecoyEstimate:
    k_max: int
    yields: np.ndarray  # central estimates, k = 0..k_max
    yields_lo: np.ndarray
    yields_hi: np.ndarray
    bit_errors: np.ndarray  # e^Z_k central estimates
    condition_number: float
    tail_mass: np.ndarray  # per supplied intensity


def _poisson_matrix(intensities: np.ndarray, k_max: int) -> np.ndarray:
    a = np.empty((len(intensities), k_max + 1))
    for i, mu in enumerate(intensities):
        row = np.empty(k_max + 1)
        term = math.exp(-mu)
        for k in range(k_max + 1):
            row[k] = term
            term *= mu / (k + 1)
        a[i] = row
    return a


def _bounded_fit(a: np.ndarray, b: np.ndarray, upper: np.ndarray) -> np.ndarray:
    res = lsq_linear(a, b, bounds=(np.zeros(a.shape[1]), upper), method="bvls")
    return res.x


def decoy_estimate(tallies: list[Tally], k_max: int) -> DecoyEstimate:
    """Estimate Y_k and e^Z_k for k <= k_max from per-intensity tallies.

    Requires at least k_max + 1 distinct intensities.  Raises
    IllConditionedSystemError when the Poisson design matrix cannot
    support the requested truncation.
    """
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    if len(tallies) < k_max + 1:
        raise ValueError(
            f"need at least k_max+1 = {k_max + 1} intensities, got {len(tallies)}"
        )
    intensities = np.array([t.intensity for t in tallies], dtype=float)
    if len(set(intensities.tolist())) != len(intensities):
        raise ValueError("intensities must be distinct")
    q_hat = np.array([t.q_hat for t in tallies])
    eq_hat = np.array([t.ez_hat * t.q_hat for t in tallies])

    a = _poisson_matrix(intensities, k_max)
    tail = np.maximum(1.0 - a.sum(axis=1), 0.0)
    cond = float(np.linalg.cond(a))
    if cond > ILL_CONDITIONED_THRESHOLD:
        raise IllConditionedSystemError(cond)

    ones = np.ones(k_max + 1)
    # Central estimates attribute zero yield/error to the Poisson tail;
    # the interval brackets the worst case (tail yield 1, error 1/2).
    y_mid = _bounded_fit(a, q_hat, ones)
    y_lo = _bounded_fit(a, q_hat - tail, ones)
    lo = np.minimum(y_lo, y_mid)
    hi = np.maximum(y_lo, y_mid)

    z_mid = _bounded_fit(a, eq_hat, np.maximum(y_mid, 1e-300))
    with np.errstate(divide="ignore", invalid="ignore"):
        e_mid = np.where(y_mid > 1e-12, z_mid / np.maximum(y_mid, 1e-300), 0.5)

    return DecoyEstimate(
        k_max=k_max,
        yields=y_mid,
        yields_lo=lo,
        yields_hi=hi,
        bit_errors=e_mid,
        condition_number=cond,
        tail_mass=tail,
    )


@dataclass
class EmpiricalRate:
    breakdown: RateBreakdown
    q_se: float
    ez_se: float


def empirical_rate(tallies: list[Tally], estimate: DecoyEstimate, pm: PmParams) -> EmpiricalRate:
    """Key rate assembled from measured gain/QBER and estimated yields.

    Uses the tally whose intensity equals ``pm.mu_total``.  Vacuum
    rounds are charged the fixed error 1/2; every photon order beyond
    the kept odd ones counts as full phase error.
    """
    signal = None
    for t in tallies:
        if abs(t.intensity - pm.mu_total) < 1e-12:
            signal = t
            break
    if signal is None:
        raise ValueError(f"no tally at the signal intensity {pm.mu_total}")

    q_hat = signal.q_hat
    if q_hat <= 0.0 or signal.sifted == 0:
        zero = RateBreakdown(
            gain_Q=q_hat,
            qber_Z=0.5,
            phase_err_X=0.5,
            fractions={},
            q_odd=0.0,
            bit_errors={},
            e_delta=misalignment_e_delta(pm.m_slices),
            rate_R=0.0,
        )
        return EmpiricalRate(breakdown=zero, q_se=signal.q_se, ez_se=signal.ez_se)

    ez_hat = min(signal.ez_hat, 0.5)
    mu = pm.mu_total
    orders = [0] + [k for k in pm.odd_orders if k <= estimate.k_max]
    fractions = {}
    for k in orders:
        poisson = math.exp(-mu) * mu**k / math.factorial(k)
        fractions[k] = poisson * float(estimate.yields[k]) / q_hat
    bit_errors = {k: (0.5 if k == 0 else float(estimate.bit_errors[k])) for k in orders}

    ex = 0.5 * fractions[0]
    kept = fractions[0]
    for k in orders[1:]:
        ex += fractions[k] * bit_errors[k]
        kept += fractions[k]
    ex += 1.0 - kept
    ex = min(max(ex, 0.0), 0.5)

    bracket = 1.0 - pm.f_ec * binary_entropy(ez_hat) - binary_entropy(ex)
    rate = max((2.0 / pm.m_slices) * q_hat * bracket, 0.0)
    breakdown = RateBreakdown(
        gain_Q=q_hat,
        qber_Z=ez_hat,
        phase_err_X=ex,
        fractions=fractions,
        q_odd=sum(v for k, v in fractions.items() if k % 2 == 1),
        bit_errors=bit_errors,
        e_delta=misalignment_e_delta(pm.m_slices),
        rate_R=rate,
    )
    return EmpiricalRate(breakdown=breakdown, q_se=signal.q_se, ez_se=signal.ez_se)
