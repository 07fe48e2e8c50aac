"""Beam-splitting attack analysis.

Eve taps both arms with transmittance-eta beam splitters, keeps the
reflected light, and after the phase announcement runs unambiguous
state discrimination on her copies.  Comparing the resulting key-rate
upper bound against the tagging-style (GLLP) single-photon formula
shows the latter overshoots it in a large parameter region, while the
phase-error-based rate stays below the bound everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .detection import binary_entropy

NORMALIZATIONS = ("per_click", "literal")


@dataclass(frozen=True)
class AttackPoint:
    """All rates at one (mu, eta) point, per sifted click."""

    eta: float
    mu: float
    p_suc: float
    p_bs: float
    i_ke: float
    r_bs: float
    r_gllp: float  # per-click normalization
    r_pm: float


@dataclass(frozen=True)
class ViolationReport:
    """Where the tagging formula exceeds the attack upper bound."""

    fixed_name: str  # "mu" or "eta"
    fixed_value: float
    sweep_name: str
    sweep_range: tuple[float, float]
    violation_intervals: tuple[tuple[float, float], ...]
    crossovers: tuple[float, ...]
    normalization: str = "per_click"

    @property
    def has_violation(self) -> bool:
        return bool(self.violation_intervals)


def _check_point(mu_total: float, eta: float) -> None:
    if mu_total < 0:
        raise ValueError("mu_total must be nonnegative")
    if not (0.0 <= eta <= 1.0):
        raise ValueError("eta must be in [0, 1]")


def usd_success(mu_total: float, eta: float) -> float:
    """Probability of unambiguously reading one party's key bit.

    Eve's tapped copy carries intensity (1-eta)*mu/2, and the optimal
    unambiguous discrimination of the two opposite coherent states
    succeeds with 1 - |<alpha|-alpha>| = 1 - exp(-(1-eta)*mu).
    """
    _check_point(mu_total, eta)
    return -math.expm1(-(1.0 - eta) * mu_total)


def bs_attack(mu_total: float, eta: float) -> AttackPoint:
    """Full attack evaluation at one parameter point.

    Eve needs either party's bit, so her success probability is
    P_BS = 1 - (1 - P_suc)^2 and her information equals P_BS;
    the surviving rate is r_BS = exp(-2*(1-eta)*mu).
    """
    p_suc = usd_success(mu_total, eta)
    p_bs = 1.0 - (1.0 - p_suc) ** 2
    r_bs = math.exp(-2.0 * (1.0 - eta) * mu_total)
    return AttackPoint(
        eta=eta,
        mu=mu_total,
        p_suc=p_suc,
        p_bs=p_bs,
        i_ke=p_bs,
        r_bs=r_bs,
        r_gllp=gllp_rate_under_bs(mu_total, eta),
        r_pm=pm_rate_under_bs(mu_total, eta),
    )


def gllp_rate_under_bs(
    mu_total: float, eta: float, normalization: str = "per_click"
) -> float:
    """Tagging-style rate under the attack: the single-photon fraction.

    The attack is error-free, so the formula reduces to q_1.  In
    ``per_click`` normalization q_1 = eta*mu*exp(-mu)/(1-exp(-eta*mu))
    (fraction of clicked rounds); ``literal`` drops the gain
    denominator and returns eta*mu*exp(-mu).
    """
    _check_point(mu_total, eta)
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    bare = eta * mu_total * math.exp(-mu_total)
    if normalization == "literal":
        return bare
    q_mu = -math.expm1(-eta * mu_total)
    if q_mu <= 0.0:
        # eta*mu -> 0 limit: every click is single-photon
        return math.exp(-mu_total)
    return bare / q_mu


def pm_rate_under_bs(mu_total: float, eta: float) -> float:
    """Phase-error-based rate under the attack, 1 - H(E^X).

    With no dark counts Y_k = 1-(1-eta)^k, all bit errors vanish, and
    E^X = 1 - q_1 - q_3 - q_5 clamped to [0, 0.5].
    """
    _check_point(mu_total, eta)
    q_mu = -math.expm1(-eta * mu_total)
    if q_mu <= 0.0:
        return 0.0
    q_sum = 0.0
    for k in (1, 3, 5):
        y_k = -math.expm1(k * math.log1p(-eta)) if eta < 1.0 else 1.0
        q_sum += math.exp(-mu_total) * mu_total**k / math.factorial(k) * y_k / q_mu
    ex = min(max(1.0 - q_sum, 0.0), 0.5)
    return 1.0 - binary_entropy(ex)


def find_gllp_violation(
    *,
    fixed_mu: float | None = None,
    fixed_eta: float | None = None,
    sweep_range: tuple[float, float] | None = None,
    steps: int = 400,
    normalization: str = "per_click",
) -> ViolationReport:
    """Locate the region where r_GLLP exceeds r_BS along one axis.

    Exactly one of ``fixed_mu``/``fixed_eta`` must be given; the other
    variable is swept.  Sign changes of r_GLLP - r_BS are refined by
    bisection.  An empty violation set is a valid result.
    """
    if (fixed_mu is None) == (fixed_eta is None):
        raise ValueError("fix exactly one of mu or eta")
    if fixed_mu is not None:
        fixed_name, fixed_value, sweep_name = "mu", fixed_mu, "eta"
        lo, hi = sweep_range if sweep_range else (1e-3, 1.0 - 1e-9)

        def diff(x: float) -> float:
            return gllp_rate_under_bs(fixed_value, x, normalization) - bs_attack(
                fixed_value, x
            ).r_bs

    else:
        fixed_name, fixed_value, sweep_name = "eta", fixed_eta, "mu"
        lo, hi = sweep_range if sweep_range else (1e-3, 2.0)

        def diff(x: float) -> float:
            return gllp_rate_under_bs(x, fixed_value, normalization) - bs_attack(
                x, fixed_value
            ).r_bs

    if not (lo < hi):
        raise ValueError("sweep range must satisfy lo < hi")
    xs = [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]
    ds = [diff(x) for x in xs]

    crossovers = []
    for i in range(steps - 1):
        if (ds[i] > 0) != (ds[i + 1] > 0):
            a, b = xs[i], xs[i + 1]
            for _ in range(80):
                m = 0.5 * (a + b)
                if (diff(a) > 0) != (diff(m) > 0):
                    b = m
                else:
                    a = m
            crossovers.append(0.5 * (a + b))

    intervals = []
    start = None
    for x, d in zip(xs, ds):
        if d > 0 and start is None:
            start = x
        elif d <= 0 and start is not None:
            intervals.append((start, x))
            start = None
    if start is not None:
        intervals.append((start, xs[-1]))

    return ViolationReport(
        fixed_name=fixed_name,
        fixed_value=fixed_value,
        sweep_name=sweep_name,
        sweep_range=(lo, hi),
        violation_intervals=tuple(intervals),
        crossovers=tuple(crossovers),
        normalization=normalization,
    )
