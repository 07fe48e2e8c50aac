"""Phase-matching QKD toolkit.

Analytic rate model, baseline protocols and capacity bounds,
beam-splitting attack analysis, a truncated-Fock-space oracle, and a
round-level Monte Carlo simulator with decoy-state estimation.
"""
from .detection import (
    ChannelParams,
    ClickProbs,
    PhaseGeometry,
    binary_entropy,
    coherent_clicks,
    k_photon_clicks,
    phase_diff_pdf,
    single_photon_clicks,
    with_dark_counts,
)
from .rate import (
    PmParams,
    RateBreakdown,
    bit_error_k,
    gain,
    key_rate,
    misalignment_e_delta,
    odd_fraction,
    optimize_mu,
    phase_error_bound,
    photon_fraction,
    qber,
    yield_k,
)
from .baselines import Bb84Params, MdiBreakdown, bb84_rate, mdi_rate, plob_bound, tgw_bound
from .attacks import (
    AttackPoint,
    ViolationReport,
    bs_attack,
    find_gllp_violation,
    gllp_rate_under_bs,
    pm_rate_under_bs,
    usd_success,
)
from .simcore import (
    Outcome,
    Phi0Model,
    RoundRecord,
    SimConfig,
    SimResult,
    Tally,
    postcompensate,
    run_rounds,
    sift,
    simulate,
    tallies_to_csv,
)
from .decoy import DecoyEstimate, EmpiricalRate, decoy_estimate, empirical_rate

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "ClickProbs",
    "PhaseGeometry",
    "binary_entropy",
    "coherent_clicks",
    "k_photon_clicks",
    "phase_diff_pdf",
    "single_photon_clicks",
    "with_dark_counts",
    "PmParams",
    "RateBreakdown",
    "bit_error_k",
    "gain",
    "key_rate",
    "misalignment_e_delta",
    "odd_fraction",
    "optimize_mu",
    "phase_error_bound",
    "photon_fraction",
    "qber",
    "yield_k",
    "Bb84Params",
    "MdiBreakdown",
    "bb84_rate",
    "mdi_rate",
    "plob_bound",
    "tgw_bound",
    "AttackPoint",
    "ViolationReport",
    "bs_attack",
    "find_gllp_violation",
    "gllp_rate_under_bs",
    "pm_rate_under_bs",
    "usd_success",
    "Outcome",
    "Phi0Model",
    "RoundRecord",
    "SimConfig",
    "SimResult",
    "Tally",
    "postcompensate",
    "run_rounds",
    "sift",
    "simulate",
    "tallies_to_csv",
    "DecoyEstimate",
    "EmpiricalRate",
    "decoy_estimate",
    "empirical_rate",
]
