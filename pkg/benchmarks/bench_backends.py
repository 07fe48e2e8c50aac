"""Benchmark the compiled simulation kernel against the NumPy fallback.

Times the full round pipeline (generation, offset search, sifting,
tallies) and the bare kernel, and checks that both backends produce
identical tallies from the same seed.

Usage:  python benchmarks/bench_backends.py [--rounds N]
"""
import argparse
import time

from pmqkd import backend, simcore
from pmqkd.detection import ChannelParams


def build_config(rounds: int) -> simcore.SimConfig:
    return simcore.SimConfig(
        rounds=rounds,
        seed=42,
        m_slices=16,
        intensities=(0.1, 0.2, 0.5),
        channel=ChannelParams(eta_arm=0.1, p_d=7.2e-8),
        sample_fraction=0.2,
    )


def time_kernel_only(name: str, cfg: simcore.SimConfig, repeats: int) -> float:
    """Time the uniforms-to-outcomes map alone, RNG excluded."""
    import numpy as np

    backend.set_backend(name)
    n = min(cfg.rounds, simcore.RNG_BLOCK_ROUNDS)
    u = np.random.default_rng(0).random((7, n))
    intensities = np.asarray(cfg.intensities)
    out = dict(
        kappa_a=np.empty(n, dtype=np.int8),
        kappa_b=np.empty(n, dtype=np.int8),
        mu_idx=np.empty(n, dtype=np.int16),
        j_a=np.empty(n, dtype=np.int16),
        j_b=np.empty(n, dtype=np.int16),
        outcome=np.empty(n, dtype=np.int8),
        phi_a=np.empty(n),
        phi_b=np.empty(n),
    )
    loops = max(cfg.rounds // n, 1)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(loops):
            backend.simulate_block(
                u, cfg.channel.eta_arm, cfg.channel.p_d, intensities, cfg.m_slices,
                0.0, 0.0, 0, out["kappa_a"], out["kappa_b"], out["mu_idx"],
                out["j_a"], out["j_b"], out["outcome"], out["phi_a"], out["phi_b"],
            )
        best = min(best, (time.perf_counter() - t0) / loops / n)
    return best * cfg.rounds


def time_one(name: str, cfg: simcore.SimConfig, repeats: int):
    backend.set_backend(name)
    best_pipeline = float("inf")
    best_rounds = float("inf")
    tallies = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _block in simcore.run_blocks(cfg):
            pass
        best_rounds = min(best_rounds, time.perf_counter() - t0)
        t0 = time.perf_counter()
        result = simcore.simulate(cfg)
        best_pipeline = min(best_pipeline, time.perf_counter() - t0)
        tallies = [(t.emitted, t.clicked_single, t.sifted, t.errors) for t in result.tallies]
    return best_rounds, best_pipeline, tallies


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rounds", type=int, default=4_000_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    cfg = build_config(args.rounds)
    names = backend.available_backends()
    print(f"backends: {', '.join(names)}   rounds: {args.rounds:,}")
    print(
        f"{'backend':<10} {'kernel-only [s]':>16} {'gen+kernel [s]':>15} "
        f"{'Mrounds/s':>11} {'pipeline [s]':>13}"
    )
    results = {}
    for name in names:
        pure = time_kernel_only(name, cfg, args.repeats)
        kern, pipe, tallies = time_one(name, cfg, args.repeats)
        results[name] = tallies
        print(
            f"{name:<10} {pure:16.3f} {kern:15.3f} "
            f"{args.rounds / pure / 1e6:11.2f} {pipe:13.3f}"
        )
    if len(results) == 2:
        a, b = results.values()
        print(f"identical tallies across backends: {a == b}")
    backend.set_backend("compiled" if backend.HAVE_COMPILED else "numpy")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
