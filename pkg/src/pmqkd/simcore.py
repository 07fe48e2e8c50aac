"""Round-level Monte Carlo simulation of the practical protocol.

Generates rounds in fixed-size blocks whose RNG substreams derive from
(seed, block index), so serial and concurrent execution produce
identical tallies.  Detection uses the independent-detector coherent
click model; exactly-one-click rounds count as successes and double
clicks are discarded.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator

import numpy as np

from . import backend
from .detection import ChannelParams
from .rate import misalignment_e_delta

TWO_PI = 2.0 * math.pi

# Rounds per RNG block.  Part of the random-stream definition: changing
# it changes which uniforms drive which round.
RNG_BLOCK_ROUNDS = 1 << 18

_ROUND_STREAM = 0
_SAMPLE_STREAM = 1

MIN_SAMPLED_CLICKS = 100


class InsufficientSamplesError(ValueError):
    """Too few sampled clicked rounds to search the slice offset."""


class Outcome(IntEnum):
    NONE = 0
    LEFT = 1
    RIGHT = 2
    DOUBLE = 3


@dataclass(frozen=True)
class Phi0Model:
    """Reference deviation phi_0: fixed, or drifting linearly per round."""

    kind: str = "fixed"  # "fixed" | "slow_drift"
    value_rad: float = 0.0
    rate_rad_per_round: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "slow_drift"):
            raise ValueError("phi0 kind must be 'fixed' or 'slow_drift'")
        if self.kind == "fixed" and self.rate_rad_per_round != 0.0:
            raise ValueError("fixed phi0 cannot have a drift rate")


@dataclass(frozen=True)
class SimConfig:
    rounds: int
    seed: int
    m_slices: int
    intensities: tuple[float, ...]
    channel: ChannelParams
    sample_fraction: float = 0.1
    phi0: Phi0Model = field(default_factory=Phi0Model)
    jd_block_rounds: int | None = None  # None: one offset for the whole run

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not (0 <= self.seed < 2**63):
            raise ValueError("seed must be a nonnegative 63-bit integer")
        if self.m_slices < 2 or self.m_slices % 2 != 0:
            raise ValueError("m_slices must be an even integer >= 2")
        if len(self.intensities) == 0:
            raise ValueError("intensities must be nonempty")
        if len(set(self.intensities)) != len(self.intensities):
            raise ValueError("intensities must be distinct")
        if any(mu < 0 for mu in self.intensities):
            raise ValueError("intensities must be nonnegative")
        if not (0.0 < self.sample_fraction < 1.0):
            raise ValueError("sample_fraction must be in (0, 1)")
        if self.jd_block_rounds is not None and self.jd_block_rounds < 1:
            raise ValueError("jd_block_rounds must be positive")

    # -- JSON round trip ----------------------------------------------------

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SimConfig":
        ch = doc["channel"]
        if "eta_arm" in ch:
            channel = ChannelParams(
                eta_arm=float(ch["eta_arm"]),
                p_d=float(ch["p_d"]),
                eta_d=float(ch.get("eta_d", 1.0)),
                alpha_db_per_km=float(ch.get("alpha_db_per_km", 0.2)),
                distance_km=float(ch.get("distance_km", 0.0)),
            )
        else:
            channel = ChannelParams.from_distance(
                float(ch["distance_km"]),
                eta_d=float(ch["eta_d"]),
                p_d=float(ch["p_d"]),
                alpha_db_per_km=float(ch.get("alpha_db_per_km", 0.2)),
            )
        phi0_doc = doc.get("phi0", {})
        phi0 = Phi0Model(
            kind=phi0_doc.get("kind", "fixed"),
            value_rad=float(phi0_doc.get("value_rad", 0.0)),
            rate_rad_per_round=float(phi0_doc.get("rate_rad_per_round", 0.0)),
        )
        blk = doc.get("jd_block_rounds")
        return cls(
            rounds=int(doc["rounds"]),
            seed=int(doc["seed"]),
            m_slices=int(doc["m_slices"]),
            intensities=tuple(float(m) for m in doc["intensities"]),
            channel=channel,
            sample_fraction=float(doc.get("sample_fraction", 0.1)),
            phi0=phi0,
            jd_block_rounds=int(blk) if blk is not None else None,
        )

    @classmethod
    def from_json_file(cls, path) -> "SimConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))

    def to_json_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "seed": self.seed,
            "m_slices": self.m_slices,
            "intensities": list(self.intensities),
            "sample_fraction": self.sample_fraction,
            "phi0": {
                "kind": self.phi0.kind,
                "value_rad": self.phi0.value_rad,
                "rate_rad_per_round": self.phi0.rate_rad_per_round,
            },
            "channel": {
                "eta_arm": self.channel.eta_arm,
                "p_d": self.channel.p_d,
                "eta_d": self.channel.eta_d,
                "alpha_db_per_km": self.channel.alpha_db_per_km,
                "distance_km": self.channel.distance_km,
            },
            "jd_block_rounds": self.jd_block_rounds,
        }


@dataclass(frozen=True)
class RoundRecord:
    kappa_a: int
    kappa_b: int
    phi_a: float
    phi_b: float
    j_a: int
    j_b: int
    mu_used: float
    outcome: Outcome


@dataclass
class RoundData:
    """Struct-of-arrays view of simulated rounds."""

    kappa_a: np.ndarray  # int8
    kappa_b: np.ndarray  # int8
    mu_idx: np.ndarray  # int16, index into the config intensities
    j_a: np.ndarray  # int16
    j_b: np.ndarray  # int16
    outcome: np.ndarray  # int8
    phi_a: np.ndarray
    phi_b: np.ndarray

    def __len__(self) -> int:
        return len(self.outcome)

    def single_click_mask(self) -> np.ndarray:
        return (self.outcome == Outcome.LEFT) | (self.outcome == Outcome.RIGHT)

    def take(self, index) -> "RoundData":
        return RoundData(
            kappa_a=self.kappa_a[index],
            kappa_b=self.kappa_b[index],
            mu_idx=self.mu_idx[index],
            j_a=self.j_a[index],
            j_b=self.j_b[index],
            outcome=self.outcome[index],
            phi_a=self.phi_a[index],
            phi_b=self.phi_b[index],
        )


def _block_rng(seed: int, block_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, _ROUND_STREAM, block_index]))
    )


def _sample_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _SAMPLE_STREAM])))


def run_blocks(cfg: SimConfig) -> Iterator[RoundData]:
    """Yield successive round blocks; layout is fixed by (seed, config)."""
    intensities = np.asarray(cfg.intensities, dtype=np.float64)
    phi0 = cfg.phi0
    produced = 0
    block_index = 0
    while produced < cfg.rounds:
        n = min(RNG_BLOCK_ROUNDS, cfg.rounds - produced)
        u = _block_rng(cfg.seed, block_index).random((7, n))
        data = RoundData(
            kappa_a=np.empty(n, dtype=np.int8),
            kappa_b=np.empty(n, dtype=np.int8),
            mu_idx=np.empty(n, dtype=np.int16),
            j_a=np.empty(n, dtype=np.int16),
            j_b=np.empty(n, dtype=np.int16),
            outcome=np.empty(n, dtype=np.int8),
            phi_a=np.empty(n, dtype=np.float64),
            phi_b=np.empty(n, dtype=np.float64),
        )
        backend.simulate_block(
            u,
            cfg.channel.eta_arm,
            cfg.channel.p_d,
            intensities,
            cfg.m_slices,
            phi0.value_rad,
            phi0.rate_rad_per_round,
            produced,
            data.kappa_a,
            data.kappa_b,
            data.mu_idx,
            data.j_a,
            data.j_b,
            data.outcome,
            data.phi_a,
            data.phi_b,
        )
        yield data
        produced += n
        block_index += 1


def collect_rounds(cfg: SimConfig) -> RoundData:
    blocks = list(run_blocks(cfg))
    if len(blocks) == 1:
        return blocks[0]
    return RoundData(
        kappa_a=np.concatenate([b.kappa_a for b in blocks]),
        kappa_b=np.concatenate([b.kappa_b for b in blocks]),
        mu_idx=np.concatenate([b.mu_idx for b in blocks]),
        j_a=np.concatenate([b.j_a for b in blocks]),
        j_b=np.concatenate([b.j_b for b in blocks]),
        outcome=np.concatenate([b.outcome for b in blocks]),
        phi_a=np.concatenate([b.phi_a for b in blocks]),
        phi_b=np.concatenate([b.phi_b for b in blocks]),
    )


def run_rounds(cfg: SimConfig) -> Iterator[RoundRecord]:
    """Per-round record stream (convenience view of :func:`run_blocks`)."""
    for block in run_blocks(cfg):
        mus = np.asarray(cfg.intensities)[block.mu_idx]
        for i in range(len(block)):
            yield RoundRecord(
                kappa_a=int(block.kappa_a[i]),
                kappa_b=int(block.kappa_b[i]),
                phi_a=float(block.phi_a[i]),
                phi_b=float(block.phi_b[i]),
                j_a=int(block.j_a[i]),
                j_b=int(block.j_b[i]),
                mu_used=float(mus[i]),
                outcome=Outcome(int(block.outcome[i])),
            )


# ---------------------------------------------------------------------------
# sifting and phase postcompensation
# ---------------------------------------------------------------------------


@dataclass
class SiftResult:
    """Aligned key-bit pairs of the sifted single-click rounds."""

    indices: np.ndarray  # positions in the input data
    alice_bits: np.ndarray
    bob_bits: np.ndarray  # after R-click and half-turn flips

    def errors(self) -> np.ndarray:
        return self.alice_bits != self.bob_bits


def sift(data: RoundData, j_d: int, m_slices: int) -> SiftResult:
    """Keep single-click rounds whose compensated slices match.

    A round survives when (j_b + j_d - j_a) mod M is 0 or M/2; Bob
    flips his bit on an R-click announcement and again in the M/2 case.
    """
    single = data.single_click_mask()
    dmod = (data.j_b.astype(np.int32) + j_d - data.j_a.astype(np.int32)) % m_slices
    half = m_slices // 2
    keep = single & ((dmod == 0) | (dmod == half))
    idx = np.nonzero(keep)[0]
    bob = (
        data.kappa_b[idx].astype(np.int8)
        ^ (data.outcome[idx] == Outcome.RIGHT).astype(np.int8)
        ^ (dmod[idx] == half).astype(np.int8)
    )
    return SiftResult(indices=idx, alice_bits=data.kappa_a[idx].copy(), bob_bits=bob)


@dataclass
class PostcompResult:
    j_d_opt: int
    qber_table: np.ndarray  # sampled QBER per candidate offset, NaN if unsampled
    sampled_clicks: int


def postcompensate(
    data: RoundData,
    sample_fraction: float,
    rng: np.random.Generator,
    m_slices: int,
) -> PostcompResult:
    """Search the slice offset minimizing the sampled QBER.

    Draws the announced test sample from the single-click rounds with a
    dedicated generator, evaluates the sampled QBER for every offset,
    and returns the minimizer (smallest index on ties) with the table.
    """
    single_idx = np.nonzero(data.single_click_mask())[0]
    picked = single_idx[rng.random(len(single_idx)) < sample_fraction]
    if len(picked) < MIN_SAMPLED_CLICKS:
        raise InsufficientSamplesError(
            f"only {len(picked)} sampled clicked rounds; need >= {MIN_SAMPLED_CLICKS}"
        )
    sample = data.take(picked)
    table = np.full(m_slices, np.nan)
    for j_d in range(m_slices):
        res = sift(sample, j_d, m_slices)
        if len(res.indices) > 0:
            table[j_d] = float(np.mean(res.errors()))
    if np.all(np.isnan(table)):
        raise InsufficientSamplesError("no sampled round satisfied any sifting condition")
    j_d_opt = int(np.nanargmin(table))
    return PostcompResult(j_d_opt=j_d_opt, qber_table=table, sampled_clicks=len(picked))


# ---------------------------------------------------------------------------
# tallies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tally:
    """Per-intensity counters and the derived estimates."""

    intensity: float
    emitted: int
    clicked_single: int
    sifted: int
    errors: int

    @property
    def q_hat(self) -> float:
        return self.clicked_single / self.emitted if self.emitted else 0.0

    @property
    def q_se(self) -> float:
        if not self.emitted:
            return 0.0
        p = self.q_hat
        return math.sqrt(p * (1.0 - p) / self.emitted)

    @property
    def ez_hat(self) -> float:
        return self.errors / self.sifted if self.sifted else 0.0

    @property
    def ez_se(self) -> float:
        if not self.sifted:
            return 0.0
        p = self.ez_hat
        return math.sqrt(p * (1.0 - p) / self.sifted)


@dataclass
class SimResult:
    config: SimConfig
    tallies: list[Tally]
    j_d_opt: int  # offset of the first adaptation block
    qber_table: np.ndarray
    block_offsets: list[tuple[int, int, int]]  # (start, stop, j_d)


def simulate(cfg: SimConfig) -> SimResult:
    """Run the full pipeline: rounds, offset search, sifting, tallies."""
    data = collect_rounds(cfg)
    n = len(data)
    chunk = cfg.jd_block_rounds if cfg.jd_block_rounds is not None else n
    starts = list(range(0, n, chunk))

    emitted = np.zeros(len(cfg.intensities), dtype=np.int64)
    clicked = np.zeros(len(cfg.intensities), dtype=np.int64)
    sifted = np.zeros(len(cfg.intensities), dtype=np.int64)
    errors = np.zeros(len(cfg.intensities), dtype=np.int64)

    np.add.at(emitted, data.mu_idx, 1)
    np.add.at(clicked, data.mu_idx[data.single_click_mask()], 1)

    first_result: PostcompResult | None = None
    block_offsets = []
    for bi, start in enumerate(starts):
        stop = min(start + chunk, n)
        part = data.take(slice(start, stop))
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([cfg.seed, _SAMPLE_STREAM, bi]))
        )
        post = postcompensate(part, cfg.sample_fraction, rng, cfg.m_slices)
        if first_result is None:
            first_result = post
        res = sift(part, post.j_d_opt, cfg.m_slices)
        mu_sifted = part.mu_idx[res.indices]
        np.add.at(sifted, mu_sifted, 1)
        np.add.at(errors, mu_sifted[res.errors()], 1)
        block_offsets.append((start, stop, post.j_d_opt))

    tallies = [
        Tally(
            intensity=cfg.intensities[i],
            emitted=int(emitted[i]),
            clicked_single=int(clicked[i]),
            sifted=int(sifted[i]),
            errors=int(errors[i]),
        )
        for i in range(len(cfg.intensities))
    ]
    assert first_result is not None
    return SimResult(
        config=cfg,
        tallies=tallies,
        j_d_opt=first_result.j_d_opt,
        qber_table=first_result.qber_table,
        block_offsets=block_offsets,
    )


def tallies_to_csv(tallies: list[Tally]) -> str:
    """Fixed-order CSV with 17-significant-digit floats."""
    lines = ["intensity,emitted,clicked,sifted,errors,Q_hat,Q_se,EZ_hat,EZ_se"]
    for t in tallies:
        lines.append(
            f"{t.intensity:.17g},{t.emitted},{t.clicked_single},{t.sifted},{t.errors},"
            f"{t.q_hat:.17g},{t.q_se:.17g},{t.ez_hat:.17g},{t.ez_se:.17g}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# comparison against the analytic model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelComparison:
    intensity: float
    q_hat: float
    q_model: float
    z_q: float
    ez_hat: float
    ez_model: float
    z_ez: float

    @property
    def consistent(self) -> bool:
        return abs(self.z_q) < 4.0 and abs(self.z_ez) < 4.0


def compare_to_model(result: SimResult) -> list[ModelComparison]:
    """Score-test z values of the tallies against the analytic formulas.

    Standard errors use the model probabilities, which keeps the test
    defined when the observed error count is zero.
    """
    cfg = result.config
    eta = cfg.channel.eta_arm
    pd = cfg.channel.p_d
    e_delta = misalignment_e_delta(cfg.m_slices)
    rows = []
    for t in result.tallies:
        mu = t.intensity
        q_model = 1.0 - (1.0 - 2.0 * pd) * math.exp(-eta * mu)
        ez_model = (
            min((pd + eta * mu * e_delta) * math.exp(-eta * mu) / q_model, 0.5)
            if q_model > 0
            else 0.5
        )
        q_se = math.sqrt(q_model * (1.0 - q_model) / t.emitted) if t.emitted else math.inf
        ez_se = math.sqrt(ez_model * (1.0 - ez_model) / t.sifted) if t.sifted else math.inf
        rows.append(
            ModelComparison(
                intensity=mu,
                q_hat=t.q_hat,
                q_model=q_model,
                z_q=(t.q_hat - q_model) / q_se if q_se > 0 else math.inf,
                ez_hat=t.ez_hat,
                ez_model=ez_model,
                z_ez=(t.ez_hat - ez_model) / ez_se if ez_se > 0 else math.inf,
            )
        )
    return rows
