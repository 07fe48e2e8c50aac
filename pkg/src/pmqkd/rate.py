"""Analytic performance of the phase-matching protocol.

Yields, gain, bit/phase error rates, photon-number fractions, the final
key rate, and intensity optimization.  The production formulas follow
the reference closed forms term by term (including their clamping
behavior) so that results are bit-comparable with a straight port of
them; tighter or exact variants live in the test oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .detection import ChannelParams, binary_entropy


@dataclass(frozen=True)
class PmParams:
    """Source and postprocessing parameters.

    ``mu_total`` is the combined intensity; each party sends half.
    ``truncation_k`` is the largest odd photon order kept in the
    phase-error bound.
    """

    mu_total: float
    m_slices: int = 16
    f_ec: float = 1.15
    truncation_k: int = 5

    def __post_init__(self):
        if not (self.mu_total > 0):
            raise ValueError("mu_total must be positive")
        if self.m_slices < 2 or self.m_slices % 2 != 0:
            raise ValueError("m_slices must be an even integer >= 2")
        if self.f_ec < 1.0:
            raise ValueError("f_ec must be >= 1")
        if self.truncation_k < 1 or self.truncation_k % 2 != 1:
            raise ValueError("truncation_k must be a positive odd integer")

    @property
    def odd_orders(self) -> tuple[int, ...]:
        return tuple(range(1, self.truncation_k + 1, 2))


@dataclass(frozen=True)
class RateBreakdown:
    """Every intermediate of one key-rate evaluation."""

    gain_Q: float
    qber_Z: float
    phase_err_X: float
    fractions: dict[int, float]  # q_k for k = 0 and the odd orders
    q_odd: float
    bit_errors: dict[int, float]  # e^Z_k for the same k
    e_delta: float
    rate_R: float


def yield_k(k: int, ch: ChannelParams) -> float:
    """Click yield of a k-photon input: 1 - (1-2*p_d)*(1-eta)^k.

    The vacuum yield is written as 2*p_d directly so it is exact; the
    general form keeps the reference expression order for parity.
    """
    if k < 0:
        raise ValueError("photon number must be nonnegative")
    if k == 0:
        return 2.0 * ch.p_d
    return 1.0 - (1.0 - 2.0 * ch.p_d) * (1.0 - ch.eta_arm) ** k


def gain(ch: ChannelParams, pm: PmParams) -> float:
    """Probability of an exactly-one-detector click per round."""
    return 1.0 - (1.0 - 2.0 * ch.p_d) * math.exp(-pm.mu_total * ch.eta_arm)


def misalignment_e_delta(m_slices) -> float:
    """Slice-misalignment error rate pi/M - (M/pi)^2 * sin^3(pi/M).

    Accepts ``math.inf`` for the ideal no-slicing limit, which gives 0.
    """
    if m_slices == math.inf:
        return 0.0
    if m_slices < 2:
        raise ValueError("m_slices must be >= 2")
    x = math.pi / m_slices
    return x - (m_slices / math.pi) ** 2 * math.sin(x) ** 3


def bit_error_k(k: int, ch: ChannelParams, m_slices) -> float:
    """Bit error rate of the k-photon component.

    Dark-count clicks contribute error 1/2, photon clicks contribute
    the slice misalignment e_delta.  The degenerate no-click case
    (p_d = 0 with k = 0 or eta = 0) returns the random-guess value 1/2.
    """
    if k < 0:
        raise ValueError("photon number must be nonnegative")
    y = yield_k(k, ch)
    if y <= 0.0:
        return 0.5
    e_delta = misalignment_e_delta(m_slices)
    loss_k = (1.0 - ch.eta_arm) ** k
    return (ch.p_d * loss_k + e_delta * (1.0 - loss_k)) / y


def qber(ch: ChannelParams, pm: PmParams) -> float:
    """Quantum bit error rate (p_d + eta*mu*e_delta)*exp(-eta*mu)/Q."""
    q = gain(ch, pm)
    if q <= 0.0:
        return 0.5
    e_delta = misalignment_e_delta(pm.m_slices)
    x = ch.eta_arm * pm.mu_total
    val = (ch.p_d + x * e_delta) * math.exp(-x) / q
    return min(max(val, 0.0), 0.5)


def photon_fraction(k: int, ch: ChannelParams, pm: PmParams) -> float:
    """Fraction q_k of detected signal attributed to k-photon inputs."""
    if k < 0:
        raise ValueError("photon number must be nonnegative")
    q = gain(ch, pm)
    if q <= 0.0:
        return 0.0
    mu = pm.mu_total
    return yield_k(k, ch) * mu**k * math.exp(-mu) / (math.factorial(k) * q)


def odd_fraction(ch: ChannelParams, pm: PmParams) -> float:
    """Closed-form sum of all odd-order fractions q_1 + q_3 + ..."""
    q = gain(ch, pm)
    if q <= 0.0:
        return 0.0
    mu = pm.mu_total
    num = math.sinh(mu) - (1.0 - 2.0 * ch.p_d) * math.sinh((1.0 - ch.eta_arm) * mu)
    return math.exp(-mu) * num / q


def phase_error_bound(ch: ChannelParams, pm: PmParams, *, tail: str = "truncated") -> float:
    """Upper bound on the phase error rate, clamped to [0, 0.5].

    ``tail="truncated"`` charges everything beyond the kept orders as
    full error (1 - q_0 - q_1 - q_3 - q_5).  ``tail="odd"`` uses the
    closed-form odd-fraction sum for the tail instead, which is tighter.
    """
    q0 = photon_fraction(0, ch, pm)
    odd_qs = [photon_fraction(k, ch, pm) for k in pm.odd_orders]
    odd_es = [bit_error_k(k, ch, pm.m_slices) for k in pm.odd_orders]
    # accumulation order mirrors the reference expression for parity
    ex = q0 * 0.5
    for q, e in zip(odd_qs, odd_es):
        ex = ex + q * e
    if tail == "truncated":
        tail_term = 1.0 - q0
        for q in odd_qs:
            tail_term = tail_term - q
    elif tail == "odd":
        tail_term = 1.0 - q0 - odd_fraction(ch, pm)
    else:
        raise ValueError(f"unknown tail mode {tail!r}")
    ex = ex + tail_term
    return min(max(ex, 0.0), 0.5)


def key_rate(ch: ChannelParams, pm: PmParams, *, tail: str = "truncated") -> RateBreakdown:
    """Key rate per emitted pulse pair, (2/M)*Q*[1 - f*H(E^Z) - H(E^X)].

    Negative bracket values are floored to rate 0.
    """
    q = gain(ch, pm)
    ez = qber(ch, pm)
    ex = phase_error_bound(ch, pm, tail=tail)
    fractions = {0: photon_fraction(0, ch, pm)}
    bit_errors = {0: bit_error_k(0, ch, pm.m_slices)}
    for k in pm.odd_orders:
        fractions[k] = photon_fraction(k, ch, pm)
        bit_errors[k] = bit_error_k(k, ch, pm.m_slices)
    bracket = -pm.f_ec * binary_entropy(ez) + 1.0 - binary_entropy(ex)
    rate = max((2.0 / pm.m_slices) * q * bracket, 0.0)
    return RateBreakdown(
        gain_Q=q,
        qber_Z=ez,
        phase_err_X=ex,
        fractions=fractions,
        q_odd=odd_fraction(ch, pm),
        bit_errors=bit_errors,
        e_delta=misalignment_e_delta(pm.m_slices),
        rate_R=rate,
    )


def _golden_max(f, lo: float, hi: float, tol: float = 1e-9) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal function."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc >= fd else d
    return x, max(fc, fd)


def optimize_mu(
    ch: ChannelParams,
    pm_template: PmParams,
    mu_range: tuple[float, float] = (0.01, 2.0),
    *,
    tail: str = "truncated",
) -> tuple[float, RateBreakdown]:
    """Deterministic intensity optimization.

    Scans a 200-point grid over ``mu_range`` and refines the best
    bracket by golden-section search.  When the rate vanishes
    everywhere the smallest grid intensity is returned with rate 0.
    """
    lo, hi = mu_range
    if not (0.0 < lo < hi <= 4.0):
        raise ValueError("mu_range must satisfy 0 < lo < hi <= 4")
    n_grid = 200

    def rate_at(mu: float) -> float:
        return key_rate(ch, _with_mu(pm_template, mu), tail=tail).rate_R

    mus = [lo + (hi - lo) * i / (n_grid - 1) for i in range(n_grid)]
    vals = [rate_at(m) for m in mus]
    best = max(range(n_grid), key=lambda i: vals[i])
    if vals[best] <= 0.0:
        mu0 = mus[0]
        return mu0, key_rate(ch, _with_mu(pm_template, mu0), tail=tail)
    a = mus[max(best - 1, 0)]
    b = mus[min(best + 1, n_grid - 1)]
    mu_opt, _ = _golden_max(rate_at, a, b, tol=1e-9 * (hi - lo))
    if rate_at(mu_opt) < vals[best]:
        mu_opt = mus[best]
    return mu_opt, key_rate(ch, _with_mu(pm_template, mu_opt), tail=tail)


def _with_mu(pm: PmParams, mu: float) -> PmParams:
    return PmParams(
        mu_total=mu,
        m_slices=pm.m_slices,
        f_ec=pm.f_ec,
        truncation_k=pm.truncation_k,
    )
