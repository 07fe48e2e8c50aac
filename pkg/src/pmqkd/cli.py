"""Command-line front end.

Subcommands: ``rate`` (one parameter point), ``sweep`` (distance/eta/mu
scans with optional intensity optimization), ``attack`` (beam-splitting
attack comparison), ``simulate`` (Monte Carlo protocol run from a JSON
config), ``fock-check`` (truncated-Fock-space self-checks).

The distance-to-transmittance mapping lives here: phase-matching and
MDI use the per-arm value over half the distance, BB84 and the
capacity bounds use the full distance.  Exit codes: 0 success,
1 domain error, 2 usage error, 3 failed statistical/numerical check.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import attacks, backend, baselines, focklab, rate, simcore
from .detection import ChannelParams, k_photon_clicks

THREADS_ENV = "PMQKD_THREADS"

MU_RANGE = (0.01, 2.0)

SWEEP_COLUMNS = [
    "distance_km",
    "eta_arm",
    "eta_total",
    "mu_opt",
    "R_pm",
    "R_bb84",
    "R_mdi",
    "R_plob",
    "R_tgw",
]

ALL_PROTOCOLS = ("pm", "bb84", "mdi", "plob", "tgw")


@dataclass(frozen=True)
class Preset:
    p_d: float
    f_ec: float
    eta_d: float
    m_slices: int
    e_d: float  # baseline-protocol misalignment only
    alpha_db_per_km: float


PRESETS = {
    "fig3b": Preset(
        p_d=7.2e-8, f_ec=1.15, eta_d=0.145, m_slices=16, e_d=0.015, alpha_db_per_km=0.2
    ),
}


def eta_arm_from_distance(distance_km: float, eta_d: float, alpha_db_per_km: float) -> float:
    """Per-arm transmittance over half the total distance."""
    return eta_d * 10.0 ** (-alpha_db_per_km * (distance_km / 2.0) / 10.0)


def eta_full_from_distance(distance_km: float, eta_d: float, alpha_db_per_km: float) -> float:
    """End-to-end transmittance, detector efficiency included."""
    return eta_d * 10.0 ** (-alpha_db_per_km * distance_km / 10.0)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)


# ---------------------------------------------------------------------------
# shared parameter resolution
# ---------------------------------------------------------------------------


def _apply_preset(args) -> None:
    preset = PRESETS.get(args.preset) if args.preset else None
    defaults = {
        "p_d": preset.p_d if preset else 0.0,
        "eta_d": preset.eta_d if preset else 1.0,
        "m_slices": preset.m_slices if preset else 16,
        "f_ec": preset.f_ec if preset else 1.15,
        "e_d": preset.e_d if preset else 0.015,
        "alpha": preset.alpha_db_per_km if preset else 0.2,
    }
    for name, value in defaults.items():
        if getattr(args, name, None) is None:
            setattr(args, name, value)


def _resolve_rate_args(args) -> tuple[ChannelParams, rate.PmParams, float | None]:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            doc = json.load(f)
        for key in ("distance_km", "eta_arm", "mu", "p_d", "eta_d", "m_slices", "f_ec",
                    "alpha_db_per_km", "preset"):
            flag = {"distance_km": "distance", "eta_arm": "eta",
                    "alpha_db_per_km": "alpha"}.get(key, key)
            if getattr(args, flag, None) is None and key in doc:
                setattr(args, flag, doc[key])
    _apply_preset(args)
    if args.mu is None:
        raise ValueError("an intensity --mu is required")
    if (args.distance is None) == (args.eta is None):
        raise ValueError("give exactly one of --distance or --eta")
    if args.distance is not None:
        ch = ChannelParams.from_distance(
            float(args.distance), eta_d=args.eta_d, p_d=args.p_d,
            alpha_db_per_km=args.alpha,
        )
        distance = float(args.distance)
    else:
        ch = ChannelParams(eta_arm=float(args.eta), p_d=args.p_d, eta_d=args.eta_d,
                           alpha_db_per_km=args.alpha)
        distance = None
    pm = rate.PmParams(
        mu_total=float(args.mu), m_slices=int(args.m_slices), f_ec=float(args.f_ec)
    )
    return ch, pm, distance


# ---------------------------------------------------------------------------
# rate
# ---------------------------------------------------------------------------


def cmd_rate(args) -> int:
    ch, pm, distance = _resolve_rate_args(args)
    breakdown = rate.key_rate(ch, pm, tail=args.tail)
    rows: list[tuple[str, object]] = []
    if distance is not None:
        rows.append(("distance_km", distance))
    rows.extend(
        [
            ("eta_arm", ch.eta_arm),
            ("p_d", ch.p_d),
            ("mu", pm.mu_total),
            ("m_slices", pm.m_slices),
            ("f_ec", pm.f_ec),
            ("gain_Q", breakdown.gain_Q),
            ("qber_Z", breakdown.qber_Z),
            ("phase_err_X", breakdown.phase_err_X),
            ("e_delta", breakdown.e_delta),
            ("q_odd", breakdown.q_odd),
        ]
    )
    for k in sorted(breakdown.fractions):
        rows.append((f"q_{k}", breakdown.fractions[k]))
    for k in sorted(breakdown.bit_errors):
        rows.append((f"eZ_{k}", breakdown.bit_errors[k]))
    rows.append(("rate_R", breakdown.rate_R))
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {_fmt(value)}")
    if args.csv:
        header = ",".join(name for name, _ in rows)
        line = ",".join(_fmt(v) for _, v in rows)
        _write_text(args.csv, header + "\n" + line + "\n")
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _grid_maximize(f, lo: float, hi: float, n: int = 200) -> tuple[float, float]:
    xs = [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    vals = [f(x) for x in xs]
    best = max(range(n), key=lambda i: vals[i])
    if vals[best] <= 0.0:
        return xs[0], 0.0
    a = xs[max(best - 1, 0)]
    b = xs[min(best + 1, n - 1)]
    x_opt, v_opt = rate._golden_max(f, a, b, tol=1e-9 * (hi - lo))
    if v_opt < vals[best]:
        return xs[best], vals[best]
    return x_opt, v_opt


def _sweep_point(task) -> dict:
    (value, variable, preset, protocols, optimize, fixed_mu, distance_for_mu) = task
    p_d, f_ec, eta_d, m_slices, e_d, alpha = preset

    if variable == "distance_km":
        distance = value
        eta_arm = eta_arm_from_distance(distance, eta_d, alpha)
        eta_total = eta_full_from_distance(distance, eta_d, alpha)
    elif variable == "eta":
        distance = None
        eta_arm = value
        eta_total = min(value * value / eta_d, 1.0) if eta_d > 0 else value * value
    elif variable == "mu":
        distance = distance_for_mu
        eta_arm = eta_arm_from_distance(distance, eta_d, alpha)
        eta_total = eta_full_from_distance(distance, eta_d, alpha)
    else:
        raise ValueError(f"unknown sweep variable {variable!r}")

    row: dict[str, object] = {
        "distance_km": distance,
        "eta_arm": eta_arm,
        "eta_total": eta_total,
        "mu_opt": None,
    }
    ch_arm = ChannelParams(eta_arm=eta_arm, p_d=p_d, eta_d=eta_d, alpha_db_per_km=alpha)

    def pm_pmparams(mu):
        return rate.PmParams(mu_total=mu, m_slices=m_slices, f_ec=f_ec)

    if "pm" in protocols:
        if variable == "mu":
            mu_pm = value
            r_pm = rate.key_rate(ch_arm, pm_pmparams(mu_pm)).rate_R
        elif optimize:
            mu_pm, bd = rate.optimize_mu(ch_arm, pm_pmparams(0.5), MU_RANGE)
            r_pm = bd.rate_R
        else:
            mu_pm = fixed_mu
            r_pm = rate.key_rate(ch_arm, pm_pmparams(mu_pm)).rate_R
        row["mu_opt"] = mu_pm
        row["R_pm"] = r_pm

    if "bb84" in protocols:
        ch_full = ChannelParams(eta_arm=eta_total, p_d=p_d, eta_d=eta_d, alpha_db_per_km=alpha)

        def bb84_at(mu):
            return baselines.bb84_rate(
                baselines.Bb84Params(mu=mu, e_d=e_d, f_ec=f_ec, channel=ch_full)
            )

        if variable == "mu":
            row["R_bb84"] = bb84_at(value)
        elif optimize:
            _, r = _grid_maximize(bb84_at, *MU_RANGE)
            row["R_bb84"] = r
        else:
            row["R_bb84"] = bb84_at(fixed_mu)

    if "mdi" in protocols:

        def mdi_at(mu):
            return baselines.mdi_rate(
                mu / 2.0, mu / 2.0, eta_arm, eta_arm, p_d, e_d, f_ec
            ).rate_R

        if variable == "mu":
            row["R_mdi"] = mdi_at(value)
        elif optimize:
            _, r = _grid_maximize(mdi_at, *MU_RANGE)
            row["R_mdi"] = r
        else:
            row["R_mdi"] = mdi_at(fixed_mu)

    if "plob" in protocols:
        row["R_plob"] = baselines.plob_bound(min(eta_total, 1.0 - 1e-15))
    if "tgw" in protocols:
        row["R_tgw"] = baselines.tgw_bound(min(eta_total, 1.0 - 1e-15))
    return row


def run_sweep(
    variable: str,
    start: float,
    stop: float,
    step: float,
    protocols: tuple[str, ...],
    preset: Preset,
    optimize_mu: bool,
    fixed_mu: float = 0.5,
    distance_for_mu: float = 0.0,
    threads: int = 1,
) -> list[dict]:
    """Evaluate every protocol on the grid; rows come back in grid order."""
    if not (start < stop) or step <= 0:
        raise ValueError("sweep needs start < stop and step > 0")
    if not protocols:
        raise ValueError("protocol set must be nonempty")
    unknown = set(protocols) - set(ALL_PROTOCOLS)
    if unknown:
        raise ValueError(f"unknown protocols: {sorted(unknown)}")
    values = []
    v = start
    while v <= stop + 1e-12:
        values.append(round(v, 12))
        v += step
    preset_tuple = (
        preset.p_d, preset.f_ec, preset.eta_d, preset.m_slices, preset.e_d,
        preset.alpha_db_per_km,
    )
    tasks = [
        (value, variable, preset_tuple, protocols, optimize_mu, fixed_mu, distance_for_mu)
        for value in values
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_sweep_point, tasks, chunksize=16))
    return [_sweep_point(t) for t in tasks]


def sweep_rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in SWEEP_COLUMNS))
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    _apply_preset(args)
    preset = Preset(
        p_d=args.p_d, f_ec=args.f_ec, eta_d=args.eta_d, m_slices=int(args.m_slices),
        e_d=args.e_d, alpha_db_per_km=args.alpha,
    )
    protocols = tuple(p.strip() for p in args.protocols.split(",") if p.strip())
    threads = int(os.environ.get(THREADS_ENV, "1"))
    rows = run_sweep(
        variable=args.variable,
        start=args.start,
        stop=args.stop,
        step=args.step,
        protocols=protocols,
        preset=preset,
        optimize_mu=args.optimize_mu,
        fixed_mu=args.mu if args.mu is not None else 0.5,
        distance_for_mu=args.distance if args.distance is not None else 0.0,
        threads=max(threads, 1),
    )
    _write_text(args.output, sweep_rows_to_csv(rows))
    return 0


# ---------------------------------------------------------------------------
# attack
# ---------------------------------------------------------------------------


def cmd_attack(args) -> int:
    if (args.fix_mu is None) == (args.fix_eta is None):
        raise ValueError("give exactly one of --fix-mu or --fix-eta")

    def parse_range(text, default):
        if text is None:
            return default
        lo, _, hi = text.partition(":")
        return (float(lo), float(hi))

    if args.fix_mu is not None:
        lo, hi = parse_range(args.eta_range, (1e-3, 1.0 - 1e-9))
        sweep_name = "eta"
        report = attacks.find_gllp_violation(
            fixed_mu=args.fix_mu, sweep_range=(lo, hi), steps=args.steps
        )
    else:
        lo, hi = parse_range(args.mu_range, (1e-3, 2.0))
        sweep_name = "mu"
        report = attacks.find_gllp_violation(
            fixed_eta=args.fix_eta, sweep_range=(lo, hi), steps=args.steps
        )

    lines = [f"{sweep_name},r_gllp_per_click,r_gllp_literal,r_bs,r_pm"]
    for i in range(args.steps):
        x = lo + (hi - lo) * i / (args.steps - 1)
        if args.fix_mu is not None:
            mu, eta = args.fix_mu, x
        else:
            mu, eta = x, args.fix_eta
        point = attacks.bs_attack(mu, eta)
        lines.append(
            f"{_fmt(x)},{_fmt(point.r_gllp)},"
            f"{_fmt(attacks.gllp_rate_under_bs(mu, eta, 'literal'))},"
            f"{_fmt(point.r_bs)},{_fmt(point.r_pm)}"
        )
    if report.has_violation:
        spans = ";".join(f"{_fmt(a)}..{_fmt(b)}" for a, b in report.violation_intervals)
        crossings = ";".join(_fmt(c) for c in report.crossovers)
        summary = (
            f"# violation({report.normalization}): {sweep_name} in {spans}"
            + (f" crossover={crossings}" if crossings else "")
        )
    else:
        summary = f"# violation({report.normalization}): none"
    lines.append(summary)
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = simcore.SimConfig.from_json_file(args.config)
    result = simcore.simulate(cfg)
    _write_text(args.output, simcore.tallies_to_csv(result.tallies))
    comparisons = simcore.compare_to_model(result)
    print(f"backend {backend.active_backend()}")
    print(f"j_d_opt {result.j_d_opt}")
    ok = True
    for c in comparisons:
        print(
            f"intensity {_fmt(c.intensity)}  "
            f"Q_hat {_fmt(c.q_hat)} Q_model {_fmt(c.q_model)} z_Q {c.z_q:+.3f}  "
            f"EZ_hat {_fmt(c.ez_hat)} EZ_model {_fmt(c.ez_model)} z_EZ {c.z_ez:+.3f}"
        )
        ok = ok and c.consistent
    print(f"consistency {'ok' if ok else 'FAIL'} (|z| < 4)")
    return 0 if ok else 3


# ---------------------------------------------------------------------------
# fock-check
# ---------------------------------------------------------------------------


def cmd_fock_check(args) -> int:
    cutoff = args.cutoff
    if args.max_k > cutoff:
        print(f"error: --max-k {args.max_k} exceeds --cutoff {cutoff}", file=sys.stderr)
        return 2
    ok = True
    for k in range(1, args.max_k + 1):
        res = focklab.lemma1_check(k, cutoff)
        good = res.relation_residual < 1e-10 and res.identity_residual < 1e-10
        ok = ok and good
        print(
            f"k={k} e_x {res.e_x:.6f} e_z {res.e_z:.6f} "
            f"relation_residual {res.relation_residual:.3e} "
            f"identity_residual {res.identity_residual:.3e} "
            f"{'ok' if good else 'FAIL'}"
        )
    worst = 0.0
    for k in range(0, 5):
        for eta in (0.25, 0.5, 1.0):
            for phi in (0.0, math.pi / 2.0, math.pi):
                oracle = focklab.k_photon_interference_probs(k, eta, phi)
                model = k_photon_clicks(k, eta, phi)
                worst = max(
                    worst,
                    max(
                        abs(a - b)
                        for a, b in zip(oracle.as_tuple(), model.as_tuple())
                    ),
                )
    click_ok = worst < 1e-9
    ok = ok and click_ok
    print(f"click-model max |oracle - formula| for k<=4: {worst:.3e} {'ok' if click_ok else 'FAIL'}")
    print("OK" if ok else "FAIL")
    return 0 if ok else 3


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmqkd",
        description="Phase-matching QKD performance, attack analysis and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--preset", choices=sorted(PRESETS), default=None)
        p.add_argument("--pd", dest="p_d", type=float, default=None,
                       help="dark count probability per detector per round")
        p.add_argument("--eta-d", dest="eta_d", type=float, default=None)
        p.add_argument("--m-slices", dest="m_slices", type=int, default=None)
        p.add_argument("--f-ec", dest="f_ec", type=float, default=None)
        p.add_argument("--e-d", dest="e_d", type=float, default=None,
                       help="baseline-protocol misalignment error")
        p.add_argument("--alpha", dest="alpha", type=float, default=None,
                       help="fiber attenuation dB/km")

    p_rate = sub.add_parser("rate", help="key-rate breakdown at one point")
    p_rate.add_argument("--distance", type=float, default=None, help="total distance km")
    p_rate.add_argument("--eta", type=float, default=None, help="per-arm transmittance")
    p_rate.add_argument("--mu", type=float, default=None, help="total intensity")
    p_rate.add_argument("--tail", choices=("truncated", "odd"), default="truncated")
    p_rate.add_argument("--config", default=None, help="JSON file with the same keys")
    p_rate.add_argument("--csv", default=None, help="also write a one-row CSV")
    add_common(p_rate)
    p_rate.set_defaults(func=cmd_rate)

    p_sweep = sub.add_parser("sweep", help="protocol comparison over a grid")
    p_sweep.add_argument("--variable", choices=("distance_km", "eta", "mu"),
                         default="distance_km")
    p_sweep.add_argument("--start", type=float, required=True)
    p_sweep.add_argument("--stop", type=float, required=True)
    p_sweep.add_argument("--step", type=float, required=True)
    p_sweep.add_argument("--optimize-mu", action="store_true")
    p_sweep.add_argument("--mu", type=float, default=None,
                         help="fixed intensity when not optimizing")
    p_sweep.add_argument("--distance", type=float, default=None,
                         help="fixed distance for --variable mu")
    p_sweep.add_argument("--protocols", default="pm,bb84,mdi,plob,tgw")
    p_sweep.add_argument("--output", default="-")
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_attack = sub.add_parser("attack", help="beam-splitting attack comparison")
    p_attack.add_argument("--fix-mu", type=float, default=None)
    p_attack.add_argument("--fix-eta", type=float, default=None)
    p_attack.add_argument("--eta-range", default=None, help="lo:hi")
    p_attack.add_argument("--mu-range", default=None, help="lo:hi")
    p_attack.add_argument("--steps", type=int, default=200)
    p_attack.add_argument("--output", default="-")
    p_attack.set_defaults(func=cmd_attack)

    p_sim = sub.add_parser("simulate", help="Monte Carlo protocol run")
    p_sim.add_argument("config", help="SimConfig JSON path")
    p_sim.add_argument("--output", default="-", help="tally CSV destination")
    p_sim.set_defaults(func=cmd_simulate)

    p_fock = sub.add_parser("fock-check", help="Fock-space parity/click self-checks")
    p_fock.add_argument("--max-k", dest="max_k", type=int, default=6)
    p_fock.add_argument("--cutoff", type=int, default=focklab.DEFAULT_CUTOFF)
    p_fock.set_defaults(func=cmd_fock_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
