"""End-to-end trial campaigns: distillation and channel coding.

Trial model (classical reduction, both stages):

* amplitude stage -- per inner block, a uniform word z is observed through
  the amplitude view (bit flips at the marginal rate, or erasures); the
  block's inner frozen coordinates of transform(z) are disclosed and the
  block is SC-decoded alone. One error counter per block feeds eps1_hat.
* phase stage -- a uniform u-word per block is observed through the
  conditional phase view, whose crossover at each position depends on the
  *decoded* amplitude error bit there (erasures wipe the same positions in
  both stages). The outer levels are decoded with the interleaved schedule;
  the inner frozen coordinates are never disclosed and are handled per
  phase_mode. Whole-stage failure feeds eps2_hat (unconditional).

Channel-coding mode differs only in where the level values come from: outer
frozen coordinates take the code's pseudorandom fill values, the rest carry
a fresh random message, and success means exact message recovery. For the
single-layer classical kinds (bsc/bec) the trial is the reverse-pipeline
encode -> noise -> interleaved decode with disclosed (shaped) inner values.

Determinism: every trial owns a spawned SeedSequence child keyed by its
absolute trial number; all of a trial's randomness is drawn from that child
in a fixed order before any batching. Chunk boundaries and worker count
therefore cannot change any counter.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    BinarySymmetricView,
    ChannelModel,
    ErasureParams,
    amplitude_view,
    phase_view,
    sample_erasure,
    sample_pauli,
)
from .concat import decode_interleaved, outer_fill_bits, shape_inner_batch
from .construction import ConcatCode, build_concat_code
from .polar_core import EXHAUSTIVE_LIMIT, LLR_CLAMP, prob_one_to_llr, sc_decode, transform

# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


def fidelity_bound(eps1: float, eps2: float, M: int) -> float:
    """sqrt(2 eps2) + sqrt(2 M eps1): the output-fidelity deficit bound."""
    if not (0.0 <= eps1 <= 1.0 and 0.0 <= eps2 <= 1.0):
        raise ValueError("eps arguments must be probabilities")
    if M < 1:
        raise ValueError("M must be at least 1")
    return float(np.sqrt(2.0 * eps2) + np.sqrt(2.0 * M * eps1))


def rate_report(code: ConcatCode) -> float:
    """(K*M - sum |O_j|) / N: message coordinates per channel use."""
    return code.rate


@dataclass
class TrialReport:
    """Aggregated campaign result."""

    trials: int
    amp_block_errors: int
    phase_block_errors: int
    eps1_hat: float
    eps1_stderr: float
    eps2_hat: float
    eps2_stderr: float
    rate: float
    fidelity_bound: float
    wall_time: float
    seed: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for v in (self.eps1_hat, self.eps2_hat):
            if not 0.0 <= v <= 1.0:
                raise ValueError("eps estimates must be in [0, 1]")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must be in [0, 1]")

    def to_obj(self, timing: bool = False) -> dict:
        return {
            "schema": 1,
            "config": self.config,
            "seed": int(self.seed),
            "metrics": {
                "eps1": self.eps1_hat,
                "eps1_stderr": self.eps1_stderr,
                "eps2": self.eps2_hat,
                "eps2_stderr": self.eps2_stderr,
                "rate": self.rate,
                "fidelity_bound": self.fidelity_bound,
                "trials": int(self.trials),
                "amp_block_errors": int(self.amp_block_errors),
                "phase_block_errors": int(self.phase_block_errors),
            },
            "timing_s": float(self.wall_time) if timing else 0.0,
        }

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_obj(timing=timing), separators=(",", ":")) + "\n"


@dataclass
class CampaignConfig:
    """Everything a campaign needs; a pure function of this + nothing else.

    ``jobs``, ``out`` and ``timing`` steer execution and reporting plumbing
    only -- they are excluded from the config echo so reports stay
    byte-identical across worker counts and output paths.
    """

    channel: ChannelModel
    L: int
    M: int
    trials: int
    seed: int
    mode: str = "distill"  # distill | channel
    phase_mode: str = "randomized"  # randomized | marginalized
    eps_inner: float = 1e-3
    eps_outer: float = 1e-3
    rate_cap: float | None = None
    construct_trials: int = 2000
    n_samples: int = 32
    code: ConcatCode | None = None
    jobs: int | None = None
    out: str | None = None
    timing: bool = False

    def echo_obj(self) -> dict:
        return {
            "mode": self.mode,
            "channel": self.channel.to_obj(),
            "L": int(self.L),
            "M": int(self.M),
            "eps_inner": self.eps_inner,
            "eps_outer": self.eps_outer,
            "rate_cap": self.rate_cap,
            "trials": int(self.trials),
            "phase_mode": self.phase_mode,
            "n_samples": int(self.n_samples),
            "construct_trials": int(self.construct_trials),
        }


# ---------------------------------------------------------------------------
# per-trial randomness (fixed draw order)
# ---------------------------------------------------------------------------


def _trial_child(seed: int, trial_index: int) -> np.random.SeedSequence:
    # identical to SeedSequence(seed).spawn(...)[trial_index] without
    # materializing the prefix; key (1, t) keeps trials disjoint from the
    # construction stream at key (0,)
    return np.random.SeedSequence(entropy=seed, spawn_key=(1, trial_index))


def _branch_count(code: ConcatCode, mode: str, phase_mode: str, n_samples: int) -> int:
    if code.channel.kind in ("bsc", "bec"):
        return 1  # inner values disclosed; no branches
    F = code.inner_frozen.idx.size
    if phase_mode == "randomized":
        return 1
    if phase_mode == "marginalized":
        return (1 << F) if F <= EXHAUSTIVE_LIMIT else n_samples
    if phase_mode == "exact":
        raise ValueError(
            "exact phase handling needs disclosed inner values; two-stage "
            "campaigns leave them unobserved (use randomized or marginalized)"
        )
    raise ValueError(f"unknown phase mode {phase_mode!r}")


def _draw_trial(code: ConcatCode, mode: str, phase_mode: str, n_samples: int, rng) -> dict:
    """Draw every random object one trial consumes, in a fixed order."""
    L, M, F = code.L, code.M, code.inner_frozen.idx.size
    kind = code.channel.kind
    out: dict = {}
    if mode == "channel":
        out["msg"] = rng.integers(0, 2, size=code.num_message_bits, dtype=np.uint8)
    if kind == "pauli":
        out["e_x"], out["e_z"] = sample_pauli(code.channel.pauli, (M, L), rng)
    elif kind in ("erasure", "bec"):
        out["flags"] = sample_erasure(ErasureParams(code.channel.p), (M, L), rng)
    else:  # bsc
        out["noise"] = (rng.random((M, L)) < code.channel.p).astype(np.uint8)
    if kind in ("pauli", "erasure"):
        out["z"] = rng.integers(0, 2, size=(M, L), dtype=np.uint8)
        if mode == "distill":
            out["u"] = rng.integers(0, 2, size=(M, L), dtype=np.uint8)
        else:
            out["u_frozen"] = rng.integers(0, 2, size=(M, F), dtype=np.uint8)
        R = _branch_count(code, mode, phase_mode, n_samples)
        if phase_mode == "randomized" or F > EXHAUSTIVE_LIMIT:
            out["fills"] = rng.integers(0, 2, size=(M, R, F), dtype=np.uint8)
    else:
        out["shaper_u"] = rng.random((M, F))
    return out


# ---------------------------------------------------------------------------
# batched stages
# ---------------------------------------------------------------------------


def _amplitude_stage(code: ConcatCode, Z, EX=None, FLAGS=None):
    """Decode T*M independent amplitude blocks; return (x_hat, per-block errors, y)."""
    T, M, L = Z.shape
    v_true = transform(Z)
    values = v_true[:, :, code.inner_frozen.idx].reshape(T * M, -1)
    if EX is not None:
        view = amplitude_view(code.channel.pauli)
        y = Z ^ EX
        ev = view.evidence(y)
    else:
        y = Z
        sign = np.where(Z == 0, LLR_CLAMP, -LLR_CLAMP)
        ev = np.where(FLAGS == 1, 0.0, sign)
    out = sc_decode(ev.reshape(T * M, L), code.inner_frozen, frozen_values=values)
    x_hat = out.x_hat.reshape(T, M, L)
    block_err = np.any(x_hat != Z, axis=2)
    return x_hat, block_err, y


def _phase_stage(
    code: ConcatCode,
    U,
    outer_vals: list[np.ndarray],
    t_true: list[np.ndarray],
    phase_mode: str,
    n_samples: int,
    fills,
    EZ=None,
    ex_hat=None,
    FLAGS=None,
):
    """Interleaved phase decode with undisclosed inner coordinates.

    Returns per-trial stage failure (any level coordinate wrong).
    """
    x_phys = transform(U)
    if EZ is not None:
        ev = phase_view(code.channel.pauli).evidence(x_phys ^ EZ, ex_hat)
    else:
        sign = np.where(x_phys == 0, LLR_CLAMP, -LLR_CLAMP)
        ev = np.where(FLAGS == 1, 0.0, sign)
    res = decode_interleaved(
        code,
        ev,
        None,
        outer_vals,
        phase_mode=phase_mode,
        n_samples=n_samples,
        fills=fills,
    )
    T = U.shape[0]
    fail = np.zeros(T, dtype=bool)
    for j in range(code.K):
        fail |= np.any(res["t_hat"][j] != t_true[j], axis=1)
    return fail


def _level_words(code: ConcatCode, MSG: np.ndarray, ovals: list[np.ndarray]) -> list[np.ndarray]:
    """Per-level outer words t^(j) of shape (T, M): frozen values + message."""
    T = MSG.shape[0]
    t_levels = []
    at = 0
    for j, spec in enumerate(code.outer_frozen):
        data_pos = np.flatnonzero(~spec.mask)
        tj = np.empty((T, code.M), dtype=np.uint8)
        tj[:, spec.idx] = ovals[j]
        tj[:, data_pos] = MSG[:, at : at + data_pos.size]
        at += data_pos.size
        t_levels.append(tj)
    return t_levels


def _classical_chunk(code: ConcatCode, draws: list[dict]) -> tuple[np.ndarray, np.ndarray]:
    """bsc/bec channel-coding trials: encode, add noise, decode disclosed."""
    T = len(draws)
    M, L, F = code.M, code.L, code.inner_frozen.idx.size
    ovals = outer_fill_bits(code)
    MSG = np.stack([d["msg"] for d in draws]) if code.num_message_bits else np.zeros((T, 0), np.uint8)
    t_levels = _level_words(code, MSG, ovals)
    cols = np.stack([transform(tj) for tj in t_levels], axis=2) if code.K else np.zeros((T, M, 0), np.uint8)
    uniforms = np.stack([d["shaper_u"] for d in draws]) if T else np.zeros((0, M, F))
    v = shape_inner_batch(cols, code, uniforms)
    x = transform(v)
    prior = code.channel.prior_one
    if code.channel.kind == "bsc":
        noise = np.stack([d["noise"] for d in draws])
        view = BinarySymmetricView(crossover=code.channel.p, prior_one=prior)
        ev = view.evidence(x ^ noise)
    else:
        flags = np.stack([d["flags"] for d in draws])
        prior_llr = float(prob_one_to_llr(prior))
        sign = np.clip(np.where(x == 0, LLR_CLAMP, -LLR_CLAMP) + prior_llr, -LLR_CLAMP, LLR_CLAMP)
        ev = np.where(flags == 1, prior_llr, sign)
    inner_vals = v[:, :, code.inner_frozen.idx]
    outer_tiled = [np.broadcast_to(o, (T, o.size)) for o in ovals]
    res = decode_interleaved(code, ev, inner_vals, outer_tiled, phase_mode="exact")
    amp_err = np.any(res["x_hat"] != x, axis=2)
    msg_fail = np.zeros(T, dtype=bool)
    at = 0
    for j, spec in enumerate(code.outer_frozen):
        data_pos = np.flatnonzero(~spec.mask)
        if data_pos.size:
            want = MSG[:, at : at + data_pos.size]
            msg_fail |= np.any(res["t_hat"][j][:, data_pos] != want, axis=1)
            at += data_pos.size
    return amp_err, msg_fail


def run_chunk(
    code: ConcatCode,
    mode: str,
    phase_mode: str,
    n_samples: int,
    seed: int,
    start: int,
    count: int,
) -> dict:
    """Execute trials [start, start+count) and return raw counters."""
    draws = []
    for t in range(start, start + count):
        rng = np.random.default_rng(_trial_child(seed, t))
        draws.append(_draw_trial(code, mode, phase_mode, n_samples, rng))
    kind = code.channel.kind
    T = count
    if kind in ("bsc", "bec"):
        amp_err, stage_fail = _classical_chunk(code, draws)
        return {
            "amp_block_errors": int(amp_err.sum()),
            "amp_any_errors": int(np.any(amp_err, axis=1).sum()),
            "phase_block_errors": int(stage_fail.sum()),
            "trials": T,
        }
    M, L, F = code.M, code.L, code.inner_frozen.idx.size
    Z = np.stack([d["z"] for d in draws])
    if kind == "pauli":
        EX = np.stack([d["e_x"] for d in draws])
        EZ = np.stack([d["e_z"] for d in draws])
        FLAGS = None
    else:
        EX = EZ = None
        FLAGS = np.stack([d["flags"] for d in draws])
    x_hat_amp, amp_err, y_amp = _amplitude_stage(code, Z, EX=EX, FLAGS=FLAGS)
    ex_hat = (y_amp ^ x_hat_amp) if kind == "pauli" else None
    # phase truth
    if mode == "distill":
        U = np.stack([d["u"] for d in draws])
        t_true = [transform(U[:, :, k]) for k in code.level_order]
        outer_vals = [t_true[j][:, code.outer_frozen[j].idx] for j in range(code.K)]
    else:
        ovals = outer_fill_bits(code)
        MSG = np.stack([d["msg"] for d in draws]) if code.num_message_bits else np.zeros((T, 0), np.uint8)
        t_true = _level_words(code, MSG, ovals)
        U = np.empty((T, M, L), dtype=np.uint8)
        for j, k in enumerate(code.level_order):
            U[:, :, k] = transform(t_true[j])
        UF = np.stack([d["u_frozen"] for d in draws]) if F else np.zeros((T, M, 0), np.uint8)
        U[:, :, code.inner_frozen.idx] = UF
        outer_vals = [np.broadcast_to(o, (T, o.size)) for o in ovals]
    fills = None
    if phase_mode == "randomized" or F > EXHAUSTIVE_LIMIT:
        fills = np.stack([d["fills"] for d in draws])
    stage_fail = _phase_stage(
        code,
        U,
        outer_vals,
        t_true,
        phase_mode,
        n_samples,
        fills,
        EZ=EZ,
        ex_hat=ex_hat,
        FLAGS=FLAGS,
    )
    return {
        "amp_block_errors": int(amp_err.sum()),
        "amp_any_errors": int(np.any(amp_err, axis=1).sum()),
        "phase_block_errors": int(stage_fail.sum()),
        "trials": T,
    }


def _chunk_worker(args) -> dict:
    code_json, mode, phase_mode, n_samples, seed, start, count = args
    code = ConcatCode.from_json(code_json)
    return run_chunk(code, mode, phase_mode, n_samples, seed, start, count)


# ---------------------------------------------------------------------------
# single-trial operations
# ---------------------------------------------------------------------------


def distill_trial(code: ConcatCode, channel: ChannelModel, seed: int) -> dict:
    """One distillation trial: sample the channel, run both stages.

    Success means the amplitude pattern of every block and every phase-level
    coordinate were recovered exactly (degenerate corrections count as
    failures -- a conservative under-count).
    """
    _check_code_channel(code, channel, need_two_stage=True)
    counts = run_chunk(code, "distill", "randomized", 32, seed, 0, 1)
    return _trial_outcome(counts)


def channel_coding_trial(code: ConcatCode, channel: ChannelModel, seed: int) -> dict:
    """One channel-coding trial; success = exact message recovery."""
    _check_code_channel(code, channel, need_two_stage=False)
    counts = run_chunk(code, "channel", "randomized", 32, seed, 0, 1)
    return _trial_outcome(counts)


def _trial_outcome(counts: dict) -> dict:
    return {
        "amp_block_errors": counts["amp_block_errors"],
        "phase_error": bool(counts["phase_block_errors"]),
        "success": counts["amp_block_errors"] == 0 and counts["phase_block_errors"] == 0,
    }


def _check_code_channel(code: ConcatCode, channel: ChannelModel, need_two_stage: bool) -> None:
    if channel.to_obj() != code.channel.to_obj():
        raise ValueError("code was built for a different channel")
    if need_two_stage and channel.kind not in ("pauli", "erasure"):
        raise ValueError("distillation trials need a Pauli or erasure channel")


# ---------------------------------------------------------------------------
# campaign driver
# ---------------------------------------------------------------------------


def _chunk_size(code: ConcatCode, R: int) -> int:
    # target ~150 MB of engine state; formula fixed so chunk boundaries are
    # a pure function of the code and mode, never of worker count
    per_trial = code.M * code.L * max(R, 1) * 20
    return int(max(1, min(4096, 1.5e8 // max(per_trial, 1))))


def _construction_seed(seed: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(0,)).generate_state(1)[0])


def campaign_code(config: CampaignConfig) -> ConcatCode:
    """The code a campaign will use: supplied, or built deterministically."""
    if config.code is not None:
        return config.code
    return build_concat_code(
        config.channel,
        config.L,
        config.M,
        eps_inner=config.eps_inner,
        eps_outer=config.eps_outer,
        trials=config.construct_trials,
        seed=_construction_seed(config.seed),
        rate_cap=config.rate_cap,
    )


def _campaign_identity(config: CampaignConfig, code: ConcatCode) -> str:
    blob = json.dumps(config.echo_obj(), separators=(",", ":")) + code.to_json() + str(config.seed)
    return hashlib.sha256(blob.encode()).hexdigest()


def run_campaign(config: CampaignConfig, progress=None) -> TrialReport:
    """Run a trial campaign and aggregate a TrialReport.

    Deterministic: the report is a pure function of (config echo, seed).
    Parallelism (``jobs``) partitions whole chunks across processes and
    merges counters in chunk order. When ``config.out`` is set, progress is
    checkpointed to ``<out>.ckpt`` every ~1000 trials and a matching
    interrupted campaign resumes from it.
    """
    t0 = time.perf_counter()
    if config.mode not in ("distill", "channel"):
        raise ValueError(f"unknown campaign mode {config.mode!r}")
    if config.mode == "distill" and config.channel.kind not in ("pauli", "erasure"):
        raise ValueError("distillation campaigns need a Pauli or erasure channel")
    code = campaign_code(config)
    counters = {"amp_block_errors": 0, "amp_any_errors": 0, "phase_block_errors": 0, "trials": 0}
    chunks_done = 0
    chunks: list[tuple[int, int]] = []
    if config.trials > 0:
        R = _branch_count(code, config.mode, config.phase_mode, config.n_samples)
        size = _chunk_size(code, R)
        chunks = [(s, min(size, config.trials - s)) for s in range(0, config.trials, size)]
    ckpt_path = (config.out + ".ckpt") if config.out else None
    identity = _campaign_identity(config, code)
    if ckpt_path and os.path.exists(ckpt_path):
        try:
            with open(ckpt_path, "r", encoding="utf-8") as fh:
                ck = json.load(fh)
            if ck.get("identity") == identity and 0 < ck.get("chunks_done", 0) <= len(chunks):
                chunks_done = ck["chunks_done"]
                counters = ck["counters"]
                if progress:
                    progress(f"resuming from checkpoint: {counters['trials']} trials done")
        except (json.JSONDecodeError, KeyError, OSError):
            pass  # unreadable checkpoint: start over
    todo = chunks[chunks_done:]
    args = [
        (code.to_json(), config.mode, config.phase_mode, config.n_samples, config.seed, s, c)
        for s, c in todo
    ]
    since_ckpt = 0

    def absorb(res: dict) -> None:
        nonlocal chunks_done, since_ckpt
        for k in counters:
            counters[k] += res[k]
        chunks_done += 1
        since_ckpt += res["trials"]
        if ckpt_path and since_ckpt >= 1000:
            _write_checkpoint(ckpt_path, identity, chunks_done, counters)
            since_ckpt = 0
        if progress:
            progress(f"{counters['trials']}/{config.trials} trials")

    jobs = config.jobs if config.jobs is not None else (os.cpu_count() or 1)
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_chunk_worker, args):
                absorb(res)
    else:
        for a in args:
            absorb(_chunk_worker(a))
    if counters["trials"] != config.trials:
        raise RuntimeError("campaign accounting mismatch")
    # union-bound consistency, sharp integer form: a trial with any failed
    # amplitude block contributes at least one block failure, so
    # P_hat(any fails) <= M * eps1_hat follows from this count inequality
    assert counters["amp_any_errors"] <= counters["amp_block_errors"], "union bound violated"

    trials = config.trials
    blocks = trials * code.M
    eps1 = counters["amp_block_errors"] / blocks if blocks else 0.0
    eps2 = counters["phase_block_errors"] / trials if trials else 0.0
    eps1_se = float(np.sqrt(eps1 * (1 - eps1) / blocks)) if blocks else 0.0
    eps2_se = float(np.sqrt(eps2 * (1 - eps2) / trials)) if trials else 0.0
    report = TrialReport(
        trials=trials,
        amp_block_errors=counters["amp_block_errors"],
        phase_block_errors=counters["phase_block_errors"],
        eps1_hat=eps1,
        eps1_stderr=eps1_se,
        eps2_hat=eps2,
        eps2_stderr=eps2_se,
        rate=code.rate,
        fidelity_bound=fidelity_bound(eps1, eps2, code.M),
        wall_time=time.perf_counter() - t0,
        seed=config.seed,
        config=config.echo_obj(),
    )
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json(timing=config.timing))
        if ckpt_path and os.path.exists(ckpt_path):
            os.remove(ckpt_path)
    return report


def _write_checkpoint(path: str, identity: str, chunks_done: int, counters: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump({"identity": identity, "chunks_done": chunks_done, "counters": counters}, fh)
    os.replace(tmp, path)
