"""Polar transform and successive-cancellation machinery.

Everything here works on the u-butterfly convention: one stage maps the pair
(a, b) to (a XOR b, b), and the full transform is that butterfly applied
recursively in natural index order. No bit-reversal permutation anywhere.
The transform is an involution over GF(2), so encoder and "inverse" are the
same function.

Log-likelihood ratios follow the convention llr = log P(bit=0) / P(bit=1):
positive favors 0, an erased or uninformative observation is exactly 0.0,
and magnitudes saturate at ``LLR_CLAMP`` so BEC-style evidence stays on the
three-point lattice {-LLR_CLAMP, 0, +LLR_CLAMP} through the whole recursion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Saturation magnitude for all LLR arithmetic. tanh(20.0) rounds to 1.0 in
# float64, so clamped evidence behaves as a certainty through the check-node
# rule and the lattice {-40, 0, 40} is closed under both update rules.
LLR_CLAMP = 40.0

# ---------------------------------------------------------------------------
# bit packing helpers
# ---------------------------------------------------------------------------


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Big-endian bit vector of ``value``, index 0 = most significant."""
    if value < 0 or value >= (1 << width):
        raise ValueError(f"value {value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in np.asarray(bits).ravel():
        out = (out << 1) | int(b)
    return out


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack a 1-D uint8 bit array into bytes, MSB first within each byte."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="big").tobytes()


def unpack_bits(data: bytes, nbits: int) -> np.ndarray:
    out = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="big")
    if len(out) < nbits:
        raise ValueError(f"{len(data)} bytes hold {len(out)} bits, need {nbits}")
    return out[:nbits].astype(np.uint8)


def bits_to_hex(bits: np.ndarray) -> str:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size == 0:
        return ""
    return pack_bits(bits).hex()


def hex_to_bits(hexstr: str, nbits: int) -> np.ndarray:
    if nbits == 0:
        return np.zeros(0, dtype=np.uint8)
    return unpack_bits(bytes.fromhex(hexstr), nbits)


def _check_power_of_two(N: int) -> int:
    """Return n = log2(N), rejecting non powers of two."""
    if N < 1 or (N & (N - 1)) != 0:
        raise ValueError(f"block length must be a power of two, got {N}")
    return N.bit_length() - 1


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------


def transform(x: np.ndarray) -> np.ndarray:
    """Apply the GF(2) polar transform along the last axis.

    Parameters
    ----------
    x : ndarray
        Bit array (any leading batch shape, last axis a power of two).

    Returns
    -------
    ndarray
        Transformed bits, same shape, dtype uint8. Applying the function
        twice returns the input: the transform is its own inverse.
    """
    x = np.asarray(x)
    N = x.shape[-1]
    _check_power_of_two(N)
    u = x.astype(np.uint8).copy()
    lead = u.shape[:-1]
    span = N >> 1
    while span >= 1:
        v = u.reshape(*lead, N // (2 * span), 2, span)
        v[..., 0, :] ^= v[..., 1, :]
        span >>= 1
    return u


# ---------------------------------------------------------------------------
# LLR update rules
# ---------------------------------------------------------------------------


def check_llr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Check-node (upper-branch) LLR combine: 2 atanh(tanh(a/2) tanh(b/2)).

    Exact rule, not the min-sum approximation. Saturated inputs produce
    atanh(+-1) = +-inf which is immediately clamped back to +-LLR_CLAMP, so
    the rule is total on the clamped domain.
    """
    t = np.tanh(np.multiply(a, 0.5)) * np.tanh(np.multiply(b, 0.5))
    with np.errstate(divide="ignore"):
        r = 2.0 * np.arctanh(t)
    return np.clip(r, -LLR_CLAMP, LLR_CLAMP)


def bit_llr(a: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Bit-node (lower-branch) combine: (-1)^u * a + b, clamped."""
    r = np.where(u.astype(bool), -a, a) + b
    return np.clip(r, -LLR_CLAMP, LLR_CLAMP)


def llr_to_prob_one(llr: np.ndarray) -> np.ndarray:
    """P(bit = 1) implied by an LLR, numerically safe at the clamp."""
    return 1.0 / (1.0 + np.exp(np.clip(llr, -LLR_CLAMP, LLR_CLAMP)))


def prob_one_to_llr(p1: np.ndarray) -> np.ndarray:
    """Inverse of :func:`llr_to_prob_one`, clamped; p1 in [0, 1]."""
    p1 = np.asarray(p1, dtype=np.float64)
    with np.errstate(divide="ignore"):
        r = np.log1p(-p1) - np.log(p1)
    return np.clip(r, -LLR_CLAMP, LLR_CLAMP)


# ---------------------------------------------------------------------------
# frozen-set description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrozenSpec:
    """Frozen index set with pinned values for one polar block.

    Attributes
    ----------
    N : int
        Block length (power of two).
    idx : ndarray
        Sorted frozen positions, 0-based, dtype int64.
    val : ndarray
        One uint8 value per frozen position, aligned with ``idx``.
    """

    N: int
    idx: np.ndarray
    val: np.ndarray

    def __post_init__(self):
        _check_power_of_two(self.N)
        idx = np.asarray(self.idx, dtype=np.int64)
        val = np.asarray(self.val, dtype=np.uint8)
        if idx.ndim != 1 or val.shape != idx.shape:
            raise ValueError("idx and val must be 1-D and aligned")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.N):
            raise ValueError("idx must be strictly increasing within [0, N)")
        if np.any(val > 1):
            raise ValueError("frozen values must be bits")
        object.__setattr__(self, "idx", idx)
        object.__setattr__(self, "val", val)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.N, dtype=bool)
        m[self.idx] = True
        return m

    @staticmethod
    def from_mask(mask: np.ndarray, values: np.ndarray | None = None) -> "FrozenSpec":
        mask = np.asarray(mask, dtype=bool)
        idx = np.flatnonzero(mask)
        if values is None:
            val = np.zeros(idx.size, dtype=np.uint8)
        else:
            values = np.asarray(values, dtype=np.uint8)
            val = values[idx] if values.size == mask.size else values
        return FrozenSpec(N=int(mask.size), idx=idx, val=val)


@dataclass
class DecodeOutcome:
    """Result of one successive-cancellation decode.

    ``u_hat`` are the sequential decisions (frozen positions included at
    their pinned values); ``x_hat`` is the transform of ``u_hat``, i.e. the
    codeword / source-word estimate; ``llr`` the decision-point LLRs.
    """

    u_hat: np.ndarray
    x_hat: np.ndarray
    llr: np.ndarray


# ---------------------------------------------------------------------------
# batched successive-cancellation engine
# ---------------------------------------------------------------------------


class SCEngine:
    """Stateful batched successive-cancellation evidence tracker.

    One instance walks the u-indices 0..N-1 of B independent blocks in
    lockstep. ``step()`` returns the decision LLR for the current index of
    every block; ``commit(bits)`` fixes the decisions (one bit per block) and
    advances. Callers choose the bits, which is what makes the same engine
    serve plain decoding, genie-aided construction, list-free marginalization
    over branch fills, and the interleaved outer schedule.

    Memory is O(N * B): one evidence array and one partial-sum array per
    recursion depth. Work per full pass is O(N log N * B) with O(N) numpy
    calls total, since step i only refreshes the depths below the lowest
    flipped bit of i.
    """

    def __init__(self, evidence: np.ndarray, count_ops: bool = False):
        ev = np.atleast_2d(np.asarray(evidence, dtype=np.float64))
        # internal layout: (N, B); callers pass (B, N)
        ev = np.clip(ev.T, -LLR_CLAMP, LLR_CLAMP)
        self.N = ev.shape[0]
        self.B = ev.shape[1]
        self.n = _check_power_of_two(self.N)
        # ev[d] holds evidence for the active depth-d node, length N/2^d
        self._ev: list[np.ndarray] = [np.ascontiguousarray(ev)]
        self._px: list[np.ndarray | None] = [None]
        for d in range(1, self.n + 1):
            half = self.N >> d
            self._ev.append(np.empty((half, self.B), dtype=np.float64))
            self._px.append(np.empty((half, self.B), dtype=np.uint8))
        self._i = 0
        self._stepped = False
        self.x_hat: np.ndarray | None = None  # (B, N) after the last commit
        self.count_ops = count_ops
        self.op_count = 0  # scalar butterfly LLR updates performed

    # -- helpers ----------------------------------------------------------

    def _descend_check(self, d_from: int) -> None:
        """Fill ev[d] for d in (d_from, n] with check-node combines."""
        for d in range(d_from + 1, self.n + 1):
            src = self._ev[d - 1]
            half = self.N >> d
            self._ev[d][:] = check_llr(src[:half], src[half:])
            if self.count_ops:
                self.op_count += half * self.B

    @property
    def next_index(self) -> int:
        return self._i

    def step(self) -> np.ndarray:
        """Compute and return the decision LLRs (shape (B,)) for the next index."""
        if self._i >= self.N:
            raise RuntimeError("all indices already committed")
        if self._stepped:
            return self._ev[self.n][0]
        i = self._i
        if i == 0:
            self._descend_check(0)
        else:
            # lowest set bit of i marks the deepest node finishing its top half
            ds = self.n - (i & -i).bit_length() + 1
            src = self._ev[ds - 1]
            half = self.N >> ds
            self._ev[ds][:] = bit_llr(src[:half], src[half:], self._px[ds])
            if self.count_ops:
                self.op_count += half * self.B
            self._descend_check(ds)
        self._stepped = True
        return self._ev[self.n][0]

    def commit(self, bits: np.ndarray) -> None:
        """Fix the current index to ``bits`` (scalar or shape (B,)) and advance."""
        if not self._stepped:
            self.step()
        i = self._i
        x = np.broadcast_to(np.asarray(bits, dtype=np.uint8), (1, self.B)).copy()
        d = self.n
        # fold completed bottom halves upward while i's low bits are ones
        while d >= 1 and (i >> (self.n - d)) & 1:
            top = self._px[d] ^ x
            x = np.concatenate([top, x], axis=0)
            d -= 1
        if d >= 1:
            self._px[d][:] = x
        else:
            self.x_hat = np.ascontiguousarray(x.T)
        self._i = i + 1
        self._stepped = False


def sc_decode(
    evidence: np.ndarray,
    frozen: FrozenSpec,
    frozen_values: np.ndarray | None = None,
) -> DecodeOutcome:
    """Successive-cancellation decode of one or many blocks.

    Parameters
    ----------
    evidence : ndarray
        Leaf LLRs, shape (N,) or (B, N).
    frozen : FrozenSpec
        Frozen positions. Values come from ``frozen_values`` when given
        (shape (F,) or (B, F)), else from ``frozen.val``.

    Decision rule at data positions: bit = 1 iff llr < 0 (an exact tie,
    llr == 0.0, resolves to 0). Operation counting lives on the engine;
    see :func:`decode_op_count`.
    """
    single = np.asarray(evidence).ndim == 1
    ev = np.atleast_2d(np.asarray(evidence, dtype=np.float64))
    B, N = ev.shape
    if N != frozen.N:
        raise ValueError(f"evidence length {N} != frozen spec N {frozen.N}")
    if frozen_values is None:
        fv = np.broadcast_to(frozen.val, (B, frozen.idx.size))
    else:
        fv = np.broadcast_to(np.asarray(frozen_values, dtype=np.uint8), (B, frozen.idx.size))
    eng = SCEngine(ev)
    u_hat = np.empty((B, N), dtype=np.uint8)
    llr = np.empty((B, N), dtype=np.float64)
    fmask = frozen.mask
    fpos = np.cumsum(fmask) - 1  # index into fv columns
    for i in range(N):
        llr[:, i] = eng.step()
        if fmask[i]:
            u_hat[:, i] = fv[:, fpos[i]]
        else:
            u_hat[:, i] = llr[:, i] < 0.0
        eng.commit(u_hat[:, i])
    x_hat = eng.x_hat
    if single:
        return DecodeOutcome(u_hat=u_hat[0], x_hat=x_hat[0], llr=llr[0])
    return DecodeOutcome(u_hat=u_hat, x_hat=x_hat, llr=llr)


def decode_op_count(N: int) -> int:
    """Scalar butterfly updates one SC pass performs on a length-N block.

    Every depth-d refresh touches N/2^d lanes; summed over the schedule the
    total is exactly N log2 N, which the complexity acceptance check fits.
    """
    eng = SCEngine(np.zeros((1, N)), count_ops=True)
    for _ in range(N):
        eng.step()
        eng.commit(np.zeros(1, dtype=np.uint8))
    return eng.op_count


# ---------------------------------------------------------------------------
# genie-aided statistics (Monte Carlo construction primitive)
# ---------------------------------------------------------------------------


def genie_index_stats(
    sample_evidence,
    N: int,
    trials: int,
    seed: int,
    batch: int = 4096,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-index first-error frequency under genie-aided SC decoding.

    Parameters
    ----------
    sample_evidence : callable
        ``sample_evidence(rng, count) -> (x, llr)`` drawing ``count``
        i.i.d. channel uses of a length-N block: true input bits x of shape
        (count, N) and leaf LLRs of the same shape.
    N, trials, seed : int
        Block length, Monte Carlo budget, base seed.

    Returns
    -------
    (freq, stderr) : ndarray pairs of shape (N,)
        For each u-index, the frequency with which the SC decision disagrees
        with the true bit when all previous indices are forced to their true
        values, plus the binomial standard error.

    The genie forcing makes indices independent diagnostics: index i's
    statistic is exactly the error probability of its synthetic channel.
    """
    _check_power_of_two(N)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    errors = np.zeros(N, dtype=np.int64)
    done = 0
    while done < trials:
        count = min(batch, trials - done)
        x, llr = sample_evidence(rng, count)
        u_true = transform(x)
        eng = SCEngine(llr)
        for i in range(N):
            dec = eng.step() < 0.0
            errors[i] += int(np.count_nonzero(dec != (u_true[:, i] != 0)))
            eng.commit(u_true[:, i])
        done += count
    freq = errors / trials
    stderr = np.sqrt(np.maximum(freq * (1.0 - freq), 0.0) / trials)
    return freq, stderr


# ---------------------------------------------------------------------------
# source-prior conditionals
# ---------------------------------------------------------------------------


def _prior_evidence(source_prior: float, N: int) -> np.ndarray:
    # prior on each source bit folds into the leaf LLR; for a product source
    # this is exact, the recursion then computes true conditionals
    if not 0.0 < source_prior < 1.0:
        raise ValueError(f"source prior must be in (0, 1), got {source_prior}")
    return np.full((1, N), float(prob_one_to_llr(source_prior)))


def conditional_prior(prefix: np.ndarray, source_prior: float, N: int) -> float:
    """P(U_i = 1 | U_0..U_{i-1} = prefix) for i = len(prefix).

    The source is i.i.d. Bernoulli(source_prior) in the x-domain; U = the
    polar transform of X. Runs the evidence recursion with prior-only leaf
    LLRs, which computes the conditional exactly.
    """
    prefix = np.asarray(prefix, dtype=np.uint8)
    i = prefix.size
    if i >= N:
        raise ValueError("prefix already covers the whole block")
    eng = SCEngine(_prior_evidence(source_prior, N))
    for k in range(i):
        eng.step()
        eng.commit(prefix[k : k + 1])
    llr = eng.step()
    return float(llr_to_prob_one(llr[0]))


def conditional_prior_engine(source_prior: float, N: int, batch: int) -> SCEngine:
    """Batched engine preloaded with prior-only evidence (shared by the shaper)."""
    ev = np.broadcast_to(_prior_evidence(source_prior, N), (batch, N))
    return SCEngine(ev)


# ---------------------------------------------------------------------------
# decoding with unobserved frozen coordinates
# ---------------------------------------------------------------------------

EXHAUSTIVE_LIMIT = 12  # enumerate fills up to 2^12 assignments, sample beyond


def _fill_matrix(
    unknown_before: np.ndarray,
    n_samples: int,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Assignment matrix (R, U) over the unknown positions before index i."""
    U = unknown_before.size
    if U <= EXHAUSTIVE_LIMIT:
        R = 1 << U
        cols = [(np.arange(R) >> (U - 1 - j)) & 1 for j in range(U)]
        return np.stack(cols, axis=1).astype(np.uint8) if U else np.zeros((1, 0), np.uint8)
    if n_samples < 1:
        raise ValueError(f"{U} unknown coordinates exceed the exhaustive limit; need n_samples >= 1")
    if rng is None:
        raise ValueError("sampled marginalization needs a seed")
    return rng.integers(0, 2, size=(n_samples, U), dtype=np.uint8)


def marginalized_llr(
    evidence: np.ndarray,
    frozen: FrozenSpec,
    unknown: np.ndarray,
    i: int,
    n_samples: int = 32,
    seed: int | None = None,
) -> float:
    """Decision LLR at index i with some frozen coordinates unobserved.

    ``unknown`` lists frozen positions whose pinned values were never
    disclosed. Their prior is uniform, so the exact decision statistic is the
    average of P(U_i | prefix, fill) over all fills of the unknowns that
    precede i. Up to 2**EXHAUSTIVE_LIMIT fills are enumerated (the result is
    then exact); beyond that ``n_samples`` uniform fills are averaged.

    Known frozen positions before i are committed at their pinned values;
    non-frozen positions before i are committed at their plain SC decisions
    under each fill.
    """
    evidence = np.asarray(evidence, dtype=np.float64).ravel()
    N = evidence.size
    unknown = np.asarray(sorted(set(int(u) for u in unknown)), dtype=np.int64)
    if i in unknown:
        raise ValueError("target index cannot be an unknown coordinate")
    known_mask = frozen.mask
    known_mask[unknown] = False
    unknown_before = unknown[unknown < i]
    rng = None if seed is None else np.random.default_rng(np.random.SeedSequence(seed))
    fills = _fill_matrix(unknown_before, n_samples, rng)
    R = fills.shape[0]
    eng = SCEngine(np.broadcast_to(evidence, (R, N)))
    val_at = np.zeros(N, dtype=np.uint8)
    val_at[frozen.idx] = frozen.val
    ucol = {int(p): j for j, p in enumerate(unknown_before)}
    for k in range(i):
        llr = eng.step()
        if k in ucol:
            bits = fills[:, ucol[k]]
        elif known_mask[k]:
            bits = np.full(R, val_at[k], dtype=np.uint8)
        else:
            bits = (llr < 0.0).astype(np.uint8)
        eng.commit(bits)
    llr_i = eng.step()
    p1 = float(np.mean(llr_to_prob_one(llr_i)))
    return float(prob_one_to_llr(p1))


def randomized_fill_decode(
    evidence: np.ndarray,
    frozen: FrozenSpec,
    unknown: np.ndarray,
    seed: int,
) -> DecodeOutcome:
    """SC decode with unobserved frozen coordinates filled by one coin flip each.

    Unknown positions may be listed inside ``frozen`` (their pinned values are
    ignored) or given as extra coordinates on top of it; either way each one is
    pinned to its own coin flip and the rest decode as usual. The error rate of
    the decoded positions matches a decode with any fixed fill (uniform-coset
    symmetry of the channel models here), but it is generally larger than the
    fill-marginalized decoder's: a wrong hard commit still propagates. Unknown
    positions in the returned ``u_hat`` carry the fill, not information.
    """
    evidence = np.asarray(evidence, dtype=np.float64)
    single = evidence.ndim == 1
    ev = np.atleast_2d(evidence)
    unknown = np.asarray(sorted(set(int(u) for u in unknown)), dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    fills = rng.integers(0, 2, size=(ev.shape[0], unknown.size), dtype=np.uint8)
    idx_all = np.union1d(frozen.idx, unknown)
    values = np.zeros((ev.shape[0], idx_all.size), dtype=np.uint8)
    known_cols = np.searchsorted(idx_all, frozen.idx)
    values[:, known_cols] = frozen.val
    values[:, np.searchsorted(idx_all, unknown)] = fills
    merged = frozen if idx_all.size == frozen.idx.size else \
        FrozenSpec(N=frozen.N, idx=idx_all, val=np.zeros(idx_all.size, np.uint8))
    out = sc_decode(ev, merged, frozen_values=values)
    if single:
        return DecodeOutcome(u_hat=out.u_hat[0], x_hat=out.x_hat[0], llr=out.llr[0])
    return out
