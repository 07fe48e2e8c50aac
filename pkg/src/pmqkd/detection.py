"""Detection model of the untrusted interference node.

Click probabilities for Fock and coherent-state inputs on a 50/50 beam
splitter followed by two threshold detectors, dark-count composition,
and the phase-mismatch distribution induced by coarse phase slicing.
All functions are pure and stateless.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

TWO_PI = 2.0 * math.pi

PROB_SUM_TOL = 1e-12


def _check_prob(name: str, value: float) -> None:
    if math.isnan(value) or not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {value!r}")


def wrap_phase(phi: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.fmod(phi, TWO_PI)
    if w > math.pi:
        w -= TWO_PI
    elif w <= -math.pi:
        w += TWO_PI
    return w


@dataclass(frozen=True)
class ChannelParams:
    """Physical layer shared by every protocol formula.

    ``eta_arm`` is the transmittance of one arm from a source to the
    measurement node with detector efficiency folded in.  ``p_d`` is a
    dark-count probability per detector per round.  The distance fields
    are metadata describing how ``eta_arm`` was derived; use
    :meth:`from_distance` to keep them consistent.
    """

    eta_arm: float
    p_d: float
    eta_d: float = 1.0
    alpha_db_per_km: float = 0.2
    distance_km: float = 0.0

    def __post_init__(self):
        _check_prob("eta_arm", self.eta_arm)
        _check_prob("p_d", self.p_d)
        _check_prob("eta_d", self.eta_d)
        if self.alpha_db_per_km <= 0:
            raise ValueError("alpha_db_per_km must be positive")
        if self.distance_km < 0:
            raise ValueError("distance_km must be nonnegative")

    @classmethod
    def from_distance(
        cls,
        distance_km: float,
        *,
        eta_d: float,
        p_d: float,
        alpha_db_per_km: float = 0.2,
    ) -> "ChannelParams":
        """Channel with per-arm transmittance for a total A-B distance.

        Each arm spans half the distance, so
        ``eta_arm = eta_d * 10**(-alpha * (l/2) / 10)``.
        """
        eta_arm = eta_d * 10.0 ** (-alpha_db_per_km * (distance_km / 2.0) / 10.0)
        return cls(
            eta_arm=eta_arm,
            p_d=p_d,
            eta_d=eta_d,
            alpha_db_per_km=alpha_db_per_km,
            distance_km=distance_km,
        )

    def with_eta(self, eta_arm: float) -> "ChannelParams":
        return replace(self, eta_arm=eta_arm)


@dataclass(frozen=True)
class ClickProbs:
    """Probabilities of the four detector outcomes in one round."""

    p_none: float
    p_left: float
    p_right: float
    p_double: float

    def __post_init__(self):
        for name in ("p_none", "p_left", "p_right", "p_double"):
            v = getattr(self, name)
            if math.isnan(v) or v < -PROB_SUM_TOL or v > 1.0 + PROB_SUM_TOL:
                raise ValueError(f"{name} out of range: {v!r}")
        if abs(self.total() - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"click probabilities must sum to 1, got {self.total()!r}")

    def total(self) -> float:
        return self.p_none + self.p_left + self.p_right + self.p_double

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_none, self.p_left, self.p_right, self.p_double)


@dataclass(frozen=True)
class PhaseGeometry:
    """Phase-slice geometry: M slices, reference deviation, per-round mismatch."""

    m_slices: int
    phi_0: float = 0.0
    phi_delta: float = 0.0

    def __post_init__(self):
        if self.m_slices < 2 or self.m_slices % 2 != 0:
            raise ValueError("m_slices must be an even integer >= 2")


def single_photon_clicks(eta: float, phi_delta: float) -> ClickProbs:
    """Outcome probabilities for one photon split over the two arms.

    The photon survives with probability ``eta``; a surviving photon
    exits toward L with probability cos^2(phi_delta/2) and toward R
    with sin^2(phi_delta/2).  A single photon can never double-click.
    """
    _check_prob("eta", eta)
    half = 0.5 * phi_delta
    c2 = math.cos(half) ** 2
    return ClickProbs(1.0 - eta, eta * c2, eta * (1.0 - c2), 0.0)


def k_photon_clicks(k: int, eta: float, phi_delta: float) -> ClickProbs:
    """Outcome probabilities for a k-photon input.

    Treats the k photons as identical independent single-photon events:
    no click requires every photon lost, an L (R) click requires at
    least one photon at L (R) and none at R (L), the remainder is a
    double click.
    """
    if k < 0:
        raise ValueError(f"photon number must be nonnegative, got {k}")
    p1 = single_photon_clicks(eta, phi_delta)
    if k == 1:
        return p1
    p0k = p1.p_none**k
    pl = (p1.p_none + p1.p_left) ** k - p0k
    pr = (p1.p_none + p1.p_right) ** k - p0k
    plr = 1.0 + p0k - (p1.p_none + p1.p_left) ** k - (p1.p_none + p1.p_right) ** k
    return ClickProbs(p0k, pl, pr, max(plr, 0.0))


def with_dark_counts(raw: ClickProbs, p_d: float) -> ClickProbs:
    """Compose photon-click outcomes with independent dark counts.

    Each detector independently dark-fires with probability ``p_d``;
    the four joint dark-count cases reshuffle the raw outcomes.
    """
    _check_prob("p_d", p_d)
    q = 1.0 - p_d
    p0 = q * q * raw.p_none
    pl = p_d * q * raw.p_none + q * raw.p_left
    pr = p_d * q * raw.p_none + q * raw.p_right
    plr = (1.0 - p_d * p_d) * raw.p_double + p_d * q * (raw.p_left + raw.p_right) + p_d * p_d
    return ClickProbs(p0, pl, pr, plr)


def coherent_clicks(
    mu_total: float, eta: float, phi_delta: float, p_d: float
) -> tuple[float, float]:
    """Marginal click probabilities (P_L, P_R) for coherent inputs.

    Both parties send mu_total/2, so the interfered intensities are
    eta*mu*cos^2(phi_delta/2) at L and eta*mu*sin^2(phi_delta/2) at R.
    The two detectors are statistically independent: joint outcome
    probabilities are products of these marginals.

    Uses expm1/log1p so that probabilities of order p_d ~ 1e-7 keep
    full relative precision.
    """
    if mu_total < 0 or math.isnan(mu_total):
        raise ValueError(f"mean photon number must be nonnegative, got {mu_total!r}")
    _check_prob("eta", eta)
    _check_prob("p_d", p_d)
    half = 0.5 * phi_delta
    c2 = math.cos(half) ** 2
    s2 = math.sin(half) ** 2
    log_q = math.log1p(-p_d) if p_d < 1.0 else -math.inf
    p_left = -math.expm1(log_q - eta * mu_total * c2)
    p_right = -math.expm1(log_q - eta * mu_total * s2)
    return (p_left, p_right)


def phase_diff_pdf(phi: float, phi_0: float, m_slices: int) -> float:
    """Density of the phase difference phi_b - phi_a on matched slices.

    Both announced phases are uniform over one slice of width 2*pi/M,
    Bob's offset by the reference deviation phi_0, so the difference is
    triangular on [phi_0 - 2*pi/M, phi_0 + 2*pi/M) with peak M/(2*pi).
    """
    if m_slices < 2:
        raise ValueError("m_slices must be >= 2")
    w = TWO_PI / m_slices
    h2 = (m_slices / TWO_PI) ** 2
    if phi_0 - w <= phi < phi_0:
        return h2 * (phi + (w - phi_0))
    if phi_0 <= phi < phi_0 + w:
        return h2 * (-phi + (w + phi_0))
    return 0.0


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits, with H(0) = H(1) = 0."""
    if math.isnan(x) or not (0.0 <= x <= 1.0):
        raise ValueError(f"entropy argument must be in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)
