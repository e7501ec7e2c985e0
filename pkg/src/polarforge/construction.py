"""Code construction: reliability profiles and frozen-set selection.

Three profile sources, one selection rule:

* exact erasure recursion (``bec_profile``), metric = synthetic-channel
  erasure parameter, zero standard error;
* genie-aided Monte Carlo over any binary view (``mc_profile``), metric =
  per-index first-error frequency;
* the multilevel profiler (``multilevel_profile``), which measures the
  super-channels the *outer* layer actually sees: for each non-frozen inner
  position it feeds the outer decoder the inner decision LLRs produced
  mid-recursion, with earlier levels forced true (genie) and the inner
  frozen coordinates handled exactly the way the real decoder handles them
  (random fills).

Metrics are "bigger is worse" throughout; thresholds are interpreted on the
scale the profile carries (erasure parameter for the exact recursion, error
frequency for Monte Carlo -- the former upper-bounds the latter, so an
epsilon target met on one is met on the other).
"""

from __future__ import annotations

import csv
import io
import json
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
from .polar_core import (
    LLR_CLAMP,
    FrozenSpec,
    SCEngine,
    _check_power_of_two,
    bits_to_hex,
    genie_index_stats,
    hex_to_bits,
    transform,
)

# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


@dataclass
class ReliabilityProfile:
    """Per-index unreliability metric for one polar block.

    value[i] is the badness of u-index i (error frequency or erasure
    parameter, per ``label``); stderr[i] its standard error (zero for exact
    profiles).
    """

    N: int
    value: np.ndarray
    stderr: np.ndarray
    label: str = "mc-genie"

    def __post_init__(self):
        _check_power_of_two(self.N)
        self.value = np.asarray(self.value, dtype=np.float64)
        self.stderr = np.asarray(self.stderr, dtype=np.float64)
        if self.value.shape != (self.N,) or self.stderr.shape != (self.N,):
            raise ValueError("profile arrays must have shape (N,)")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "value", "stderr"])
        for i in range(self.N):
            w.writerow([i, repr(float(self.value[i])), repr(float(self.stderr[i]))])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, label: str = "csv") -> "ReliabilityProfile":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["index", "value", "stderr"]:
            raise ValueError("profile CSV must start with header index,value,stderr")
        body = [r for r in rows[1:] if r]
        N = len(body)
        value = np.empty(N)
        stderr = np.empty(N)
        for r in body:
            i = int(r[0])
            value[i] = float(r[1])
            stderr[i] = float(r[2])
        return ReliabilityProfile(N=N, value=value, stderr=stderr, label=label)


def bec_profile(p: float, N: int) -> ReliabilityProfile:
    """Exact synthetic-channel erasure parameters for a BEC(p) of length N.

    One halving step maps a vector of erasure parameters z elementwise to
    the interleaved pair (2z - z^2, z^2): even child = the degraded branch,
    odd child = the upgraded one, matching natural index order.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"erasure probability must be in [0, 1], got {p}")
    n = _check_power_of_two(N)
    z = np.array([p], dtype=np.float64)
    for _ in range(n):
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2.0 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return ReliabilityProfile(N=N, value=z, stderr=np.zeros(N), label="bec-exact")


def _view_sampler(view, N: int):
    """Turn a channel view into a (rng, count) -> (x, llr) evidence sampler."""
    if isinstance(view, ChannelModel):
        if view.kind == "pauli":
            view = amplitude_view(view.pauli)
        elif view.kind == "bsc":
            view = BinarySymmetricView(crossover=view.p, prior_one=view.prior_one)
        elif view.kind in ("bec", "erasure"):
            view = ErasureParams(view.p)
        else:  # pragma: no cover - ChannelModel validates kinds
            raise ValueError(view.kind)
    if isinstance(view, BinarySymmetricView):

        def sample(rng: np.random.Generator, count: int):
            x = (rng.random((count, N)) < view.prior_one).astype(np.uint8)
            y = x ^ (rng.random((count, N)) < view.crossover)
            return x, view.evidence(y)

        return sample
    if isinstance(view, ErasureParams):

        def sample(rng: np.random.Generator, count: int):
            x = rng.integers(0, 2, size=(count, N), dtype=np.uint8)
            flags = sample_erasure(view, (count, N), rng)
            llr = np.where(x == 0, LLR_CLAMP, -LLR_CLAMP)
            return x, np.where(flags == 1, 0.0, llr)

        return sample
    raise TypeError(f"no evidence sampler for {type(view).__name__}")


def mc_profile(view, N: int, trials: int, seed: int) -> ReliabilityProfile:
    """Genie-aided Monte Carlo reliability profile over a binary channel view.

    ``view`` may be a BinarySymmetricView, ErasureParams, or a ChannelModel
    (a Pauli model profiles its amplitude reduction). Metric: per-index
    decision error frequency with all earlier indices forced true.
    """
    freq, stderr = genie_index_stats(_view_sampler(view, N), N, trials, seed)
    return ReliabilityProfile(N=N, value=freq, stderr=stderr, label="mc-genie")


# ---------------------------------------------------------------------------
# frozen-set selection
# ---------------------------------------------------------------------------


def select_frozen(
    profile: ReliabilityProfile,
    epsilon: float | None = None,
    rate: float | None = None,
    count: int | None = None,
    values: np.ndarray | None = None,
) -> FrozenSpec:
    """Choose a frozen set from a reliability profile.

    Exactly one selection mode:

    epsilon
        Freeze every index whose metric strictly exceeds the threshold.
    rate
        Freeze the ceil(N * (1 - rate)) worst indices.
    count
        Freeze exactly ``count`` worst indices.

    Worst-first order breaks metric ties by lower index. ``values`` pins the
    frozen values (aligned to the ascending frozen index list); default all
    zeros.
    """
    modes = sum(x is not None for x in (epsilon, rate, count))
    if modes != 1:
        raise ValueError("pass exactly one of epsilon, rate, count")
    N = profile.N
    if count is None:
        if epsilon is not None:
            chosen = np.flatnonzero(profile.value > epsilon)
        else:
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate must be in [0, 1], got {rate}")
            count = int(np.ceil(N * (1.0 - rate)))
            chosen = None
    if count is not None:
        if not 0 <= count <= N:
            raise ValueError(f"cannot freeze {count} of {N} indices")
        worst_first = np.lexsort((np.arange(N), -profile.value))
        chosen = np.sort(worst_first[:count])
    idx = np.sort(np.asarray(chosen, dtype=np.int64))
    if values is None:
        values = np.zeros(idx.size, dtype=np.uint8)
    return FrozenSpec(N=N, idx=idx, val=np.asarray(values, dtype=np.uint8))


# ---------------------------------------------------------------------------
# concatenated code record
# ---------------------------------------------------------------------------


@dataclass
class ConcatCode:
    """Two-layer code description.

    The inner layer is a length-L polar block applied to every group of L
    positions; ``inner_frozen`` lists its frozen coordinates. Each of the K
    non-frozen inner positions (``level_order``, ascending) feeds one outer
    length-M polar code; ``outer_frozen[j]`` is level j's frozen set.
    ``fill_seed`` pins the pseudorandom stream used wherever the code needs
    reproducible bit material (outer frozen values in channel-coding mode).
    """

    L: int
    M: int
    inner_frozen: FrozenSpec
    outer_frozen: list[FrozenSpec]
    level_order: list[int]
    fill_seed: int
    channel: ChannelModel

    def __post_init__(self):
        _check_power_of_two(self.L)
        _check_power_of_two(self.M)
        if self.inner_frozen.N != self.L:
            raise ValueError("inner frozen spec is for the wrong block length")
        expect = [i for i in range(self.L) if i not in set(self.inner_frozen.idx.tolist())]
        if list(self.level_order) != expect:
            raise ValueError("level_order must list the non-frozen inner positions ascending")
        if len(self.outer_frozen) != len(self.level_order):
            raise ValueError("one outer frozen spec per level required")
        for spec in self.outer_frozen:
            if spec.N != self.M:
                raise ValueError("outer frozen spec is for the wrong block length")

    @property
    def K(self) -> int:
        return len(self.level_order)

    @property
    def N(self) -> int:
        return self.L * self.M

    @property
    def num_message_bits(self) -> int:
        return sum(self.M - spec.idx.size for spec in self.outer_frozen)

    @property
    def num_disclosed_bits(self) -> int:
        """Total side-information bits per N-position block (both layers)."""
        return self.M * self.inner_frozen.idx.size + sum(s.idx.size for s in self.outer_frozen)

    @property
    def rate(self) -> float:
        """Net rate: 1 - |inner frozen|/L - sum |outer frozen| / (L M)."""
        return 1.0 - self.num_disclosed_bits / self.N

    # -- serialization ------------------------------------------------------

    def to_obj(self) -> dict:
        return {
            "schema": 1,
            "L": self.L,
            "M": self.M,
            "inner_frozen": {
                "idx": [int(i) for i in self.inner_frozen.idx],
                "val_hex": bits_to_hex(self.inner_frozen.val),
            },
            "outer_frozen": [
                {"idx": [int(i) for i in s.idx], "val_hex": bits_to_hex(s.val)}
                for s in self.outer_frozen
            ],
            "level_order": [int(k) for k in self.level_order],
            "fill_seed": int(self.fill_seed),
            "channel": self.channel.to_obj(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), separators=(",", ":")) + "\n"

    @staticmethod
    def from_obj(obj: dict) -> "ConcatCode":
        if obj.get("schema") != 1:
            raise ValueError(f"unsupported code schema {obj.get('schema')!r}")
        L, M = int(obj["L"]), int(obj["M"])
        inf = obj["inner_frozen"]
        inner = FrozenSpec(
            N=L,
            idx=np.asarray(inf["idx"], dtype=np.int64),
            val=hex_to_bits(inf["val_hex"], len(inf["idx"])),
        )
        outer = [
            FrozenSpec(N=M, idx=np.asarray(s["idx"], dtype=np.int64), val=hex_to_bits(s["val_hex"], len(s["idx"])))
            for s in obj["outer_frozen"]
        ]
        return ConcatCode(
            L=L,
            M=M,
            inner_frozen=inner,
            outer_frozen=outer,
            level_order=[int(k) for k in obj["level_order"]],
            fill_seed=int(obj["fill_seed"]),
            channel=ChannelModel.from_obj(obj["channel"]),
        )

    @staticmethod
    def from_json(text: str) -> "ConcatCode":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupt code file: {exc}") from exc
        return ConcatCode.from_obj(obj)


# ---------------------------------------------------------------------------
# multilevel (outer super-channel) profiling
# ---------------------------------------------------------------------------


def multilevel_profile(
    channel: ChannelModel,
    L: int,
    inner_frozen: FrozenSpec,
    M: int,
    trials: int,
    seed: int,
    batch: int | None = None,
) -> list[ReliabilityProfile]:
    """Per-level outer reliability profiles for a two-layer phase stage.

    For each trial, samples the channel, builds the phase-stage leaf
    evidence with a genie-true amplitude error pattern, and walks the inner
    recursion of all M blocks in lockstep. At every non-frozen inner
    position k (level j) the M decision LLRs form the outer layer's
    observation vector; a genie-aided outer decode of the true level word
    tallies per-index errors. Earlier levels are forced true before the
    inner recursion advances; the inner frozen coordinates get one uniform
    random fill per trial, exactly as the randomized decoder treats them.

    Returns K profiles (metric: outer-index error frequency), ordered like
    the ascending non-frozen inner positions.
    """
    _check_power_of_two(L)
    _check_power_of_two(M)
    if inner_frozen.N != L:
        raise ValueError("inner frozen spec is for the wrong block length")
    if channel.kind not in ("pauli", "erasure"):
        raise ValueError("multilevel profiling applies to the two-stage channels only")
    fmask = inner_frozen.mask
    levels = np.flatnonzero(~fmask)
    K = levels.size
    level_of = {int(k): j for j, k in enumerate(levels)}
    errors = np.zeros((K, M), dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if batch is None:
        # keep the inner engines near 200 MB
        batch = max(1, int(2.0e8 / (M * L * 18)))
    done = 0
    while done < trials:
        T = min(batch, trials - done)
        u_true = rng.integers(0, 2, size=(T, M, L), dtype=np.uint8)
        x_phys = transform(u_true)
        if channel.kind == "pauli":
            e_x, e_z = sample_pauli(channel.pauli, (T, M, L), rng)
            llr = phase_view(channel.pauli).evidence(x_phys ^ e_z, e_x)
        else:
            flags = sample_erasure(ErasureParams(channel.p), (T, M, L), rng)
            sign = np.where(x_phys == 0, LLR_CLAMP, -LLR_CLAMP)
            llr = np.where(flags == 1, 0.0, sign)
        eng = SCEngine(llr.reshape(T * M, L))
        for k in range(L):
            step_llr = eng.step()
            if fmask[k]:
                fills = rng.integers(0, 2, size=(T, M), dtype=np.uint8)
                eng.commit(fills.reshape(T * M))
                continue
            j = level_of[k]
            t_true = transform(u_true[:, :, k])
            outer = SCEngine(step_llr.reshape(T, M))
            for m in range(M):
                dec = outer.step() < 0.0
                errors[j, m] += int(np.count_nonzero(dec != (t_true[:, m] != 0)))
                outer.commit(t_true[:, m])
            eng.commit(u_true[:, :, k].reshape(T * M))
        done += T
    out = []
    for j in range(K):
        freq = errors[j] / trials
        stderr = np.sqrt(np.maximum(freq * (1.0 - freq), 0.0) / trials)
        out.append(ReliabilityProfile(N=M, value=freq, stderr=stderr, label=f"outer-level-{j}"))
    return out


# ---------------------------------------------------------------------------
# end-to-end builder
# ---------------------------------------------------------------------------


def build_concat_code(
    channel: ChannelModel,
    L: int,
    M: int,
    eps_inner: float = 1e-3,
    eps_outer: float = 1e-3,
    trials: int = 2000,
    seed: int = 0,
    rate_cap: float | None = None,
    inner_trials: int | None = None,
) -> ConcatCode:
    """Construct a two-layer code for a channel.

    Inner frozen set: amplitude-stage profile thresholded at ``eps_inner``
    (exact erasure recursion for erasure channels, genie Monte Carlo with
    ``inner_trials`` samples otherwise). Outer frozen sets: multilevel
    profiles thresholded at ``eps_outer``. ``rate_cap``, if given, freezes
    additional outer coordinates (globally worst metric first) until the net
    rate is at or below the cap.

    Determinism: all randomness derives from ``seed`` via independent
    spawned streams; the resulting code (and its JSON form) is a pure
    function of the arguments.
    """
    if channel.kind not in ("pauli", "erasure", "bsc", "bec"):
        raise ValueError(f"unknown channel kind {channel.kind!r}")
    two_stage = channel.kind in ("pauli", "erasure")
    s_amp, s_multi, s_fill = np.random.SeedSequence(seed).spawn(3)
    if inner_trials is None:
        inner_trials = 10 * trials
    if channel.kind in ("erasure", "bec"):
        amp_profile = bec_profile(channel.p, L)
    else:
        amp_profile = mc_profile(channel, L, inner_trials, int(s_amp.generate_state(1)[0]))
    inner = select_frozen(amp_profile, epsilon=eps_inner)
    if inner.idx.size == L:
        raise ValueError("every inner index failed the reliability target; nothing to code over")
    levels = [i for i in range(L) if i not in set(inner.idx.tolist())]
    if two_stage:
        profiles = multilevel_profile(channel, L, inner, M, trials, int(s_multi.generate_state(1)[0]))
    else:
        # classical single-observation channels: the outer layer sees the
        # inner decision LLRs of a plain (non-phase) decode; profile them the
        # same way but with amplitude-style evidence
        profiles = _classical_outer_profiles(channel, L, inner, M, trials, int(s_multi.generate_state(1)[0]))
    outer = [select_frozen(p, epsilon=eps_outer) for p in profiles]
    code = ConcatCode(
        L=L,
        M=M,
        inner_frozen=inner,
        outer_frozen=outer,
        level_order=levels,
        fill_seed=int(s_fill.generate_state(1)[0]),
        channel=channel,
    )
    if rate_cap is not None and code.rate > rate_cap:
        need = int(np.ceil((code.rate - rate_cap) * L * M))
        order = []
        for j, prof in enumerate(profiles):
            frozen_set = set(outer[j].idx.tolist())
            for m in range(M):
                if m not in frozen_set:
                    order.append((-prof.value[m], j, m))
        order.sort()
        extra: dict[int, list[int]] = {}
        for _, j, m in order[:need]:
            extra.setdefault(j, []).append(m)
        new_outer = []
        for j, spec in enumerate(outer):
            if j in extra:
                idx = np.sort(np.concatenate([spec.idx, np.asarray(extra[j], dtype=np.int64)]))
                new_outer.append(FrozenSpec(N=M, idx=idx, val=np.zeros(idx.size, dtype=np.uint8)))
            else:
                new_outer.append(spec)
        code = ConcatCode(
            L=L,
            M=M,
            inner_frozen=inner,
            outer_frozen=new_outer,
            level_order=levels,
            fill_seed=code.fill_seed,
            channel=channel,
        )
    return code


def _classical_outer_profiles(
    channel: ChannelModel,
    L: int,
    inner_frozen: FrozenSpec,
    M: int,
    trials: int,
    seed: int,
) -> list[ReliabilityProfile]:
    """Outer profiles for single-layer classical channels (bsc / bec).

    Same genie schedule as :func:`multilevel_profile`, but the leaf evidence
    is the channel's own observation of the inner codeword and the inner
    frozen coordinates are *known* (committed true): classically they are
    disclosed or shaper-shared, not marginalized over.
    """
    fmask = inner_frozen.mask
    levels = np.flatnonzero(~fmask)
    K = levels.size
    level_of = {int(k): j for j, k in enumerate(levels)}
    errors = np.zeros((K, M), dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    batch = max(1, int(2.0e8 / (M * L * 18)))
    prior = channel.prior_one
    done = 0
    while done < trials:
        T = min(batch, trials - done)
        u_true = rng.integers(0, 2, size=(T, M, L), dtype=np.uint8)
        x = transform(u_true)
        if channel.kind == "bsc":
            view = BinarySymmetricView(crossover=channel.p, prior_one=prior)
            y = x ^ (rng.random((T, M, L)) < channel.p)
            llr = view.evidence(y)
        else:
            flags = sample_erasure(ErasureParams(channel.p), (T, M, L), rng)
            sign = np.where(x == 0, LLR_CLAMP, -LLR_CLAMP)
            llr = np.where(flags == 1, 0.0, sign)
        eng = SCEngine(llr.reshape(T * M, L))
        for k in range(L):
            step_llr = eng.step()
            if not fmask[k]:
                j = level_of[k]
                t_true = transform(u_true[:, :, k])
                outer = SCEngine(step_llr.reshape(T, M))
                for m in range(M):
                    dec = outer.step() < 0.0
                    errors[j, m] += int(np.count_nonzero(dec != (t_true[:, m] != 0)))
                    outer.commit(t_true[:, m])
            eng.commit(u_true[:, :, k].reshape(T * M))
        done += T
    out = []
    for j in range(K):
        freq = errors[j] / trials
        stderr = np.sqrt(np.maximum(freq * (1.0 - freq), 0.0) / trials)
        out.append(ReliabilityProfile(N=M, value=freq, stderr=stderr, label=f"outer-level-{j}"))
    return out
