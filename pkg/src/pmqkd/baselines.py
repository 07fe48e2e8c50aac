"""Comparison protocols and repeaterless capacity bounds.

Decoy-state BB84 and MDI-QKD in the standard threshold-detector model,
plus the TGW and PLOB upper bounds on repeaterless secret-key capacity.
BB84 and the bounds take the full-distance transmittance; MDI takes
per-arm values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .detection import ChannelParams, binary_entropy


@dataclass(frozen=True)
class Bb84Params:
    """Decoy-state BB84 inputs; ``channel.eta_arm`` holds the full-distance
    transmittance (source to measurement, detector efficiency included)."""

    mu: float
    e_d: float
    f_ec: float
    channel: ChannelParams

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if not (0.0 <= self.e_d <= 1.0):
            raise ValueError("e_d must be in [0, 1]")
        if self.f_ec < 1.0:
            raise ValueError("f_ec must be >= 1")


@dataclass(frozen=True)
class MdiBreakdown:
    """Intermediates of one MDI-QKD rate evaluation."""

    Y_11: float
    e_11: float
    Q_rect: float
    E_rect: float
    Q_rect_C: float
    Q_rect_E: float
    mu_prime: float
    x_param: float
    rate_R: float


def bb84_rate(p: Bb84Params) -> float:
    """Asymptotic decoy-state BB84 key rate per emitted pulse.

    R = (1/2) * Q_mu * { -f*H(E_mu) + q_1*[1 - H(e_1)] } with the
    single-photon yield and error taken from the infinite-decoy model
    (Y_0 = 2*p_d, e_0 = 1/2), floored at 0.
    """
    eta = p.channel.eta_arm
    pd = p.channel.p_d
    y0 = 2.0 * pd
    e0 = 0.5
    q_mu = 1.0 - (1.0 - y0) * math.exp(-eta * p.mu)
    if q_mu <= 0.0:
        return 0.0
    e_mu = p.e_d + (e0 - p.e_d) * y0 / q_mu
    y1 = 1.0 - (1.0 - y0) * (1.0 - eta)
    e1 = p.e_d + (e0 - p.e_d) * y0 / y1 if y1 > 0 else e0
    q1 = math.exp(-p.mu) * p.mu * y1 / q_mu
    e_mu = min(e_mu, 0.5)
    e1 = min(e1, 0.5)
    rate = 0.5 * q_mu * (-p.f_ec * binary_entropy(e_mu) + q1 * (1.0 - binary_entropy(e1)))
    return max(rate, 0.0)


def _bessel_i0(z: float) -> float:
    # power series; z is small in every regime used here
    total = 1.0
    term = 1.0
    for k in range(1, 512):
        term *= (z * z) / (4.0 * k * k)
        total += term
        if term < 1e-16 * total:
            break
    return total


def mdi_rate(
    mu_a: float,
    mu_b: float,
    eta_a: float,
    eta_b: float,
    p_d: float,
    e_d: float,
    f_ec: float,
) -> MdiBreakdown:
    """MDI-QKD rate in the rectilinear-basis threshold-detector model.

    R = (1/2) * { Q_11*[1 - H(e_11)] - f*Q_rect*H(E_rect) } with
    Q_11 = mu_a*mu_b*exp(-mu_a-mu_b)*Y_11, floored at 0.
    """
    if min(mu_a, mu_b) < 0 or not (0 <= eta_a <= 1) or not (0 <= eta_b <= 1):
        raise ValueError("intensities must be nonnegative and transmittances in [0, 1]")
    e0 = 0.5
    y11 = (1.0 - p_d) ** 2 * (
        eta_a * eta_b / 2.0
        + (2.0 * eta_a + 2.0 * eta_b - 3.0 * eta_a * eta_b) * p_d
        + 4.0 * (1.0 - eta_a) * (1.0 - eta_b) * p_d**2
    )
    if y11 > 0.0:
        e11 = (e0 * y11 - (e0 - e_d) * (1.0 - p_d**2) * eta_a * eta_b / 2.0) / y11
        e11 = min(max(e11, 0.0), 0.5)
    else:
        e11 = e0
    mu_prime = eta_a * mu_a + eta_b * mu_b
    x = 0.5 * math.sqrt(eta_a * mu_a * eta_b * mu_b)
    damp = math.exp(-mu_prime / 2.0)
    q_c = (
        2.0
        * (1.0 - p_d) ** 2
        * damp
        * (1.0 - (1.0 - p_d) * math.exp(-eta_a * mu_a / 2.0))
        * (1.0 - (1.0 - p_d) * math.exp(-eta_b * mu_b / 2.0))
    )
    q_e = 2.0 * p_d * (1.0 - p_d) ** 2 * damp * (_bessel_i0(2.0 * x) - (1.0 - p_d) * damp)
    q_rect = q_c + q_e
    if q_rect > 0.0:
        e_rect = (e_d * q_c + (1.0 - e_d) * q_e) / q_rect
        e_rect = min(max(e_rect, 0.0), 0.5)
    else:
        e_rect = e0
    q11 = mu_a * mu_b * math.exp(-mu_a - mu_b) * y11
    rate = 0.5 * (
        q11 * (1.0 - binary_entropy(e11)) - f_ec * q_rect * binary_entropy(e_rect)
    )
    return MdiBreakdown(
        Y_11=y11,
        e_11=e11,
        Q_rect=q_rect,
        E_rect=e_rect,
        Q_rect_C=q_c,
        Q_rect_E=q_e,
        mu_prime=mu_prime,
        x_param=x,
        rate_R=max(rate, 0.0),
    )


def tgw_bound(eta: float) -> float:
    """Takeoka-Guha-Wilde bound -log2((1-eta)/(1+eta))."""
    if not (0.0 <= eta < 1.0):
        raise ValueError("eta must be in [0, 1)")
    return -math.log2((1.0 - eta) / (1.0 + eta))


def plob_bound(eta: float) -> float:
    """Pirandola-Laurenza-Ottaviani-Banchi bound -log2(1-eta)."""
    if not (0.0 <= eta < 1.0):
        raise ValueError("eta must be in [0, 1)")
    return -math.log1p(-eta) / math.log(2.0)
