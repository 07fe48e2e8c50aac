import math

import numpy as np
import pytest
from scipy import integrate

from pmqkd.detection import ChannelParams, binary_entropy, k_photon_clicks, with_dark_counts
from pmqkd.rate import (
    PmParams,
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

from reference_port import pm_key

PI = math.pi
FIG3B = dict(p_d=7.2e-8, eta_d=0.145, m_slices=16, f_ec=1.15)


def ch(eta, pd=0.0):
    return ChannelParams(eta_arm=eta, p_d=pd)


# --- yields and gain ---------------------------------------------------------


def test_yield_single_photon_no_dark():
    assert yield_k(1, ch(0.1)) == pytest.approx(0.1, rel=1e-12)


def test_yield_vacuum_is_double_dark():
    for pd in (0.0, 1e-8, 1e-3):
        assert yield_k(0, ch(0.3, pd)) == pytest.approx(2 * pd, abs=1e-18)


def test_yield_three_photon_monte_carlo():
    eta, pd = 0.05, 1e-6
    y = yield_k(3, ch(eta, pd))
    assert y == pytest.approx(0.142627, abs=5e-7)
    rng = np.random.default_rng(31)
    n = 4_000_000
    arrived = rng.binomial(3, eta, size=n)  # matched phases: photons all head to L
    click_l = (arrived > 0) | (rng.random(n) < pd)
    click_r = rng.random(n) < pd
    single = click_l ^ click_r
    p_hat = single.mean()
    se = math.sqrt(y * (1 - y) / n)
    assert abs(p_hat - y) < 4 * se


def test_gain_dark_count_floor():
    pm = PmParams(mu_total=1e-12, **{k: v for k, v in FIG3B.items() if k != "p_d" and k != "eta_d"})
    assert gain(ch(0.1, 1e-7), pm) == pytest.approx(2e-7, rel=1e-3)


def test_gain_monte_carlo():
    eta, mu = 0.1, 0.5
    pm = PmParams(mu_total=mu, m_slices=16, f_ec=1.15)
    q = gain(ch(eta), pm)
    assert q == pytest.approx(1 - math.exp(-0.05), rel=1e-12)
    # joint outcomes from the independent-detector marginals
    from pmqkd.detection import coherent_clicks

    p_l, p_r = coherent_clicks(mu, eta, 0.0, 0.0)
    rng = np.random.default_rng(101)
    n = 2_000_000
    l = rng.random(n) < p_l
    r = rng.random(n) < p_r
    p_hat = (l ^ r).mean()
    se = math.sqrt(q * (1 - q) / n)
    assert abs(p_hat - q) < 4 * se


def test_gain_matches_reference_grid():
    rng = np.random.default_rng(5)
    for _ in range(100):
        eta = 10 ** rng.uniform(-6, 0)
        mu = rng.uniform(0.01, 1.0)
        pd = rng.uniform(0.0, 1e-5)
        pm = PmParams(mu_total=mu)
        expected = 1 - (1 - 2 * pd) * math.exp(-mu * eta)
        assert gain(ch(eta, pd), pm) == expected


# --- misalignment ------------------------------------------------------------


def _e_delta_integral(m: int) -> float:
    """Quadrature oracle: integral over the reference deviation of the
    sliced-phase mismatch density against sin^2(phi/2), split at the
    density kink for full quad precision."""
    w = 2 * PI / m
    h2 = (m / (2 * PI)) ** 2

    def inner(phi0: float) -> float:
        a, _ = integrate.quad(
            lambda p: h2 * (p + (w - phi0)) * math.sin(p / 2) ** 2, phi0 - w, phi0
        )
        b, _ = integrate.quad(
            lambda p: h2 * (-p + (w + phi0)) * math.sin(p / 2) ** 2, phi0, phi0 + w
        )
        return a + b

    val, _ = integrate.quad(inner, -PI / m, PI / m, limit=100)
    return val


@pytest.mark.parametrize("m,frozen", [(16, 0.0037534816159972), (12, 0.0088396290391157)])
def test_e_delta_against_quadrature(m, frozen):
    closed = misalignment_e_delta(m)
    assert closed == pytest.approx(frozen, rel=1e-12)
    assert closed == pytest.approx(_e_delta_integral(m), abs=1e-9)


def test_e_delta_vanishes_for_fine_slicing():
    assert misalignment_e_delta(2**16) < 1e-9
    assert misalignment_e_delta(math.inf) == 0.0


# --- bit errors ---------------------------------------------------------------


def test_bit_error_limits():
    assert bit_error_k(1, ch(0.3, 0.0), 2**20) == pytest.approx(0.0, abs=1e-15)
    # eta = 0 corner keeps the reference cancellation, so only ~1e-9 here
    assert bit_error_k(1, ch(0.0, 1e-7), 16) == pytest.approx(0.5, abs=1e-8)
    assert bit_error_k(0, ch(0.3, 1e-7), 16) == 0.5
    # degenerate zero-yield case falls back to a random guess
    assert bit_error_k(0, ch(0.3, 0.0), 16) == 0.5


def test_bit_error_single_photon_against_quadrature():
    eta, pd, m = 0.1, 7.2e-8, 16
    e_delta_int = _e_delta_integral(m)
    oracle = (pd * (1 - eta) + e_delta_int * eta) / (eta + 2 * pd * (1 - eta))
    got = bit_error_k(1, ch(eta, pd), m)
    assert got == pytest.approx(oracle, abs=1e-9)
    assert got == pytest.approx(3.7541248e-3, abs=5e-9)


# --- QBER ---------------------------------------------------------------------


def test_qber_dark_count_limit():
    pm = PmParams(mu_total=1e-10, m_slices=16)
    assert qber(ch(0.1, 1e-7), pm) == pytest.approx(0.5, abs=1e-4)


def test_qber_value_fig3b_point():
    pm = PmParams(mu_total=0.5, m_slices=16)
    assert qber(ch(0.1, 7.2e-8), pm) == pytest.approx(3.6618e-3, abs=5e-7)


def test_qber_matches_reference_grid():
    rng = np.random.default_rng(9)
    for _ in range(100):
        eta = 10 ** rng.uniform(-6, 0)
        mu = rng.uniform(0.01, 1.0)
        pd = rng.uniform(0.0, 1e-5)
        m = int(rng.choice([8, 16, 32]))
        e_delta = PI / m - (m / PI) ** 2 * math.sin(PI / m) ** 3
        q = 1 - (1 - 2 * pd) * math.exp(-mu * eta)
        expected = (pd + eta * mu * e_delta) * math.exp(-eta * mu) / q
        assert qber(ch(eta, pd), PmParams(mu_total=mu, m_slices=m)) == pytest.approx(
            expected, rel=1e-15
        )


# --- photon fractions ----------------------------------------------------------


def test_vacuum_fraction_zero_without_dark_counts():
    assert photon_fraction(0, ch(0.2, 0.0), PmParams(mu_total=0.4)) == 0.0


def test_fraction_normalization_identity():
    for eta, mu, pd in [(0.1, 0.5, 0.0), (1e-3, 0.2, 7.2e-8), (0.9, 1.5, 1e-6)]:
        pm = PmParams(mu_total=mu)
        total = sum(photon_fraction(k, ch(eta, pd), pm) for k in range(41))
        assert total == pytest.approx(1.0, abs=1e-9)


def test_single_fraction_fig3b_point():
    # cross-check against the exact detection model mixed over Poisson inputs
    eta, mu, pd = 1.45e-4, 0.2, 7.2e-8
    pm = PmParams(mu_total=mu)
    got = photon_fraction(1, ch(eta, pd), pm)

    def exact_yield(k):
        p = with_dark_counts(k_photon_clicks(k, eta, 0.0), pd)
        return p.p_left + p.p_right

    weights = [math.exp(-mu) * mu**k / math.factorial(k) for k in range(41)]
    q_exact = sum(w * exact_yield(k) for k, w in enumerate(weights))
    oracle = weights[1] * exact_yield(1) / q_exact
    assert got == pytest.approx(oracle, rel=1e-4)
    assert got == pytest.approx(0.81551, abs=5e-5)


def test_odd_fraction_closed_forms():
    mu = 0.7
    pm = PmParams(mu_total=mu)
    lossless = odd_fraction(ch(1.0, 0.0), pm)
    assert lossless == pytest.approx(
        math.exp(-mu) * math.sinh(mu) / (1 - math.exp(-mu)), rel=1e-12
    )
    rng = np.random.default_rng(13)
    for _ in range(50):
        eta = float(rng.random())
        pd = float(rng.uniform(0, 1e-4))
        pmx = PmParams(mu_total=float(rng.uniform(0.05, 2.0)))
        q_odd = odd_fraction(ch(eta, pd), pmx)
        partial = sum(photon_fraction(k, ch(eta, pd), pmx) for k in (1, 3, 5))
        assert q_odd >= partial - 1e-12


def test_odd_fraction_tail_is_small():
    pm = PmParams(mu_total=0.5)
    q_odd = odd_fraction(ch(0.1, 0.0), pm)
    partial = sum(photon_fraction(k, ch(0.1, 0.0), pm) for k in (1, 3, 5))
    tail = sum(photon_fraction(k, ch(0.1, 0.0), pm) for k in range(7, 41, 2))
    assert q_odd - partial == pytest.approx(tail, abs=1e-12)
    assert q_odd - partial < 2e-5


# --- phase error bound ----------------------------------------------------------


def test_phase_error_sinh_identity_lossless():
    # with full transmission and no dark counts the odd-tail mode reduces
    # to [Q - exp(-mu)*sinh(mu)] / Q
    mu = 0.2
    pm = PmParams(mu_total=mu, m_slices=2**16)
    q = 1 - math.exp(-mu)
    oracle = (q - math.exp(-mu) * math.sinh(mu)) / q
    assert oracle == pytest.approx(0.0906346234610, abs=1e-10)
    got_odd = phase_error_bound(ch(1.0, 0.0), pm, tail="odd")
    assert got_odd == pytest.approx(oracle, abs=1e-10)
    got_trunc = phase_error_bound(ch(1.0, 0.0), pm, tail="truncated")
    assert got_trunc == pytest.approx(oracle, abs=3e-6)


def test_phase_error_clamped_at_half():
    pm = PmParams(mu_total=0.5)
    assert phase_error_bound(ch(1e-9, 1e-3), pm) == 0.5


def test_truncated_bound_at_least_odd_bound():
    rng = np.random.default_rng(21)
    for _ in range(100):
        c = ch(float(rng.random()), float(rng.uniform(0, 1e-4)))
        pm = PmParams(mu_total=float(rng.uniform(0.05, 2.0)), m_slices=int(rng.choice([8, 16, 32])))
        t = phase_error_bound(c, pm, tail="truncated")
        o = phase_error_bound(c, pm, tail="odd")
        assert t >= o - 1e-12


# --- key rate --------------------------------------------------------------------


def test_key_rate_zero_at_vanishing_intensity():
    pm = PmParams(mu_total=1e-12, m_slices=16)
    assert key_rate(ch(0.1, 1e-7), pm).rate_R == 0.0


def test_key_rate_fig3b_300km():
    c = ChannelParams.from_distance(300.0, eta_d=0.145, p_d=7.2e-8)
    bd = key_rate(c, PmParams(mu_total=0.2, m_slices=16, f_ec=1.15))
    assert bd.rate_R == pytest.approx(1.0219e-6, rel=2e-4)
    assert 0.8e-6 < bd.rate_R < 1.2e-6


def test_key_rate_reference_parity_grid():
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(1000):
        eta = 10 ** rng.uniform(-6, 0)
        mu = rng.uniform(1e-3, 1.0)
        pd = rng.uniform(0.0, 1e-5)
        m = int(rng.choice([8, 16, 32]))
        ours = key_rate(ch(eta, pd), PmParams(mu_total=mu, m_slices=m, f_ec=1.15)).rate_R
        ref = pm_key(eta, mu, pd, m, 1.15)
        if ref == 0.0:
            assert ours == 0.0
        else:
            worst = max(worst, abs(ours - ref) / ref)
    assert worst < 1e-12


def test_key_rate_finite_and_continuous():
    c = ChannelParams.from_distance(200.0, eta_d=0.145, p_d=7.2e-8)

    def max_step(n):
        mus = np.linspace(0.01, 2.0, n)
        rates = [
            key_rate(c, PmParams(mu_total=float(m), m_slices=16, f_ec=1.15)).rate_R
            for m in mus
        ]
        assert all(math.isfinite(r) and r >= 0 for r in rates)
        return float(np.abs(np.diff(rates)).max())

    # grid refinement shrinks the largest jump: no discontinuities
    assert max_step(1200) < 0.5 * max_step(300)


def test_rate_scaling_sqrt_of_total_transmittance():
    # per-arm rate ratio approaches 2 when eta halves, in the fine-slicing
    # no-dark-count regime
    pm = PmParams(mu_total=0.3, m_slices=2**16)
    for eta in (1e-3, 1e-4):
        r1 = key_rate(ch(eta, 0.0), pm).rate_R
        r2 = key_rate(ch(eta / 2, 0.0), pm).rate_R
        assert r1 / r2 == pytest.approx(2.0, rel=1e-2)


def test_breakdown_ranges():
    rng = np.random.default_rng(77)
    for _ in range(200):
        c = ch(10 ** rng.uniform(-6, 0), float(rng.uniform(0, 1e-5)))
        pm = PmParams(mu_total=float(rng.uniform(0.01, 2.0)), m_slices=int(rng.choice([8, 16, 32])))
        bd = key_rate(c, pm)
        assert 0.0 <= bd.qber_Z <= 0.5
        assert 0.0 <= bd.phase_err_X <= 0.5
        assert 0.0 <= bd.gain_Q <= 1.0
        assert bd.rate_R >= 0.0
        assert sum(bd.fractions.values()) <= 1.0 + 1e-12


# --- optimization -----------------------------------------------------------------


def test_optimize_mu_is_argmax_on_grid():
    c = ch(1.0, 0.0)
    pm = PmParams(mu_total=0.5, m_slices=16, f_ec=1.15)
    mu_opt, best = optimize_mu(c, pm, (0.01, 2.0))
    for mu in np.linspace(0.01, 2.0, 200):
        assert best.rate_R >= key_rate(c, PmParams(mu_total=float(mu), m_slices=16, f_ec=1.15)).rate_R - 1e-15


def test_optimize_mu_fig3b_300km_band():
    c = ChannelParams.from_distance(300.0, eta_d=0.145, p_d=7.2e-8)
    mu_opt, bd = optimize_mu(c, PmParams(mu_total=0.5, m_slices=16, f_ec=1.15))
    assert 0.1 <= mu_opt <= 0.4
    assert bd.rate_R > 0


def test_optimize_mu_monotone_in_distance():
    pm = PmParams(mu_total=0.5, m_slices=16, f_ec=1.15)
    rates = []
    for dist in (100.0, 200.0, 300.0, 400.0):
        c = ChannelParams.from_distance(dist, eta_d=0.145, p_d=7.2e-8)
        rates.append(optimize_mu(c, pm)[1].rate_R)
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_optimize_mu_dead_channel_returns_grid_minimum():
    c = ch(0.0, 0.0)
    mu_opt, bd = optimize_mu(c, PmParams(mu_total=0.5), (0.01, 2.0))
    assert mu_opt == pytest.approx(0.01)
    assert bd.rate_R == 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        PmParams(mu_total=0.0)
    with pytest.raises(ValueError):
        PmParams(mu_total=0.5, m_slices=7)
    with pytest.raises(ValueError):
        PmParams(mu_total=0.5, f_ec=0.9)
    with pytest.raises(ValueError):
        optimize_mu(ch(0.1), PmParams(mu_total=0.5), (0.0, 2.0))
