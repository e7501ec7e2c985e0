"""Two-layer concatenated source/channel coding and the shaper.

Layout. A length-N = L*M word is M inner blocks of length L. Compression
transforms each inner block, discloses the inner frozen coordinates, then
transforms each *level* (one non-frozen inner position across the M blocks)
with the outer code and discloses that level's frozen coordinates.

Decoding interleaves the layers: the inner recursions of all M blocks run in
lockstep; when they reach non-frozen position k (level j) their decision
LLRs become the outer level's observation vector, the outer code decodes the
level, and only then do the inner blocks advance past k. The schedule is
asserted, never silently reordered.

When the inner frozen coordinates were never disclosed (the phase stage of
the distillation protocol), ``phase_mode`` picks the handling: a single
uniform random fill per coordinate (valid by coset symmetry on symmetric
channels), or marginalization of the decision statistic over fills --
exhaustive up to 2**EXHAUSTIVE_LIMIT assignments, sampled beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .construction import ConcatCode
from .polar_core import (
    EXHAUSTIVE_LIMIT,
    FrozenSpec,
    SCEngine,
    conditional_prior_engine,
    llr_to_prob_one,
    prob_one_to_llr,
    transform,
)

# ---------------------------------------------------------------------------
# payload
# ---------------------------------------------------------------------------


@dataclass
class CompressedPayload:
    """Disclosed bits of one compressed N-word.

    inner_bits: (M, |inner frozen|) uint8, per-block frozen values in
    ascending index order, or None when the inner coordinates are unobserved
    (phase-stage decoding). outer_bits: one value vector per level, aligned
    with that level's frozen index list.
    """

    inner_bits: np.ndarray | None
    outer_bits: list[np.ndarray]

    def validate(self, code: ConcatCode) -> None:
        f = code.inner_frozen.idx.size
        if self.inner_bits is not None:
            ib = np.asarray(self.inner_bits)
            if ib.shape != (code.M, f):
                raise ValueError(f"inner_bits shape {ib.shape} != {(code.M, f)}")
        if len(self.outer_bits) != code.K:
            raise ValueError(f"{len(self.outer_bits)} outer value vectors for {code.K} levels")
        for j, (spec, vals) in enumerate(zip(code.outer_frozen, self.outer_bits)):
            if np.asarray(vals).shape != (spec.idx.size,):
                raise ValueError(f"level {j} frozen values have the wrong length")

    @property
    def num_bits(self) -> int:
        inner = 0 if self.inner_bits is None else int(np.asarray(self.inner_bits).size)
        return inner + sum(int(np.asarray(v).size) for v in self.outer_bits)

    def to_bits(self, code: ConcatCode) -> np.ndarray:
        """Flatten: inner bits row-major, then levels in order."""
        self.validate(code)
        if self.inner_bits is None:
            raise ValueError("cannot serialize a payload with undisclosed inner bits")
        parts = [np.asarray(self.inner_bits, dtype=np.uint8).ravel()]
        parts += [np.asarray(v, dtype=np.uint8).ravel() for v in self.outer_bits]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)

    @staticmethod
    def from_bits(bits: np.ndarray, code: ConcatCode) -> "CompressedPayload":
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        f = code.inner_frozen.idx.size
        need = code.M * f + sum(s.idx.size for s in code.outer_frozen)
        if bits.size != need:
            raise ValueError(f"payload needs {need} bits, got {bits.size}")
        inner = bits[: code.M * f].reshape(code.M, f)
        outer = []
        at = code.M * f
        for spec in code.outer_frozen:
            outer.append(bits[at : at + spec.idx.size].copy())
            at += spec.idx.size
        return CompressedPayload(inner_bits=inner, outer_bits=outer)

    def to_obj(self) -> dict:
        """JSON form: length-prefixed hex fields ("<nbits>:<hex>")."""

        def enc(v: np.ndarray) -> str:
            v = np.asarray(v, dtype=np.uint8).ravel()
            return f"{v.size}:{np.packbits(v, bitorder='big').tobytes().hex()}"

        inner = None if self.inner_bits is None else [enc(r) for r in np.asarray(self.inner_bits)]
        return {"inner": inner, "outer": [enc(v) for v in self.outer_bits]}

    @staticmethod
    def from_obj(obj: dict) -> "CompressedPayload":
        def dec(s: str) -> np.ndarray:
            n_str, _, hx = s.partition(":")
            n = int(n_str)
            raw = np.frombuffer(bytes.fromhex(hx), dtype=np.uint8)
            bits = np.unpackbits(raw, bitorder="big")
            if bits.size < n:
                raise ValueError("hex field shorter than its declared bit length")
            return bits[:n].astype(np.uint8)

        inner = obj.get("inner")
        inner_bits = None if inner is None else np.stack([dec(s) for s in inner])
        return CompressedPayload(
            inner_bits=inner_bits, outer_bits=[dec(s) for s in obj.get("outer", [])]
        )


# ---------------------------------------------------------------------------
# compression
# ---------------------------------------------------------------------------


def _as_blocks(x: np.ndarray, code: ConcatCode) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    if x.ndim == 1:
        if x.size != code.N:
            raise ValueError(f"input has {x.size} bits, code expects {code.N}")
        x = x.reshape(code.M, code.L)
    if x.shape != (code.M, code.L):
        raise ValueError(f"input shape {x.shape} != {(code.M, code.L)}")
    return x


def concat_compress(x: np.ndarray, code: ConcatCode) -> CompressedPayload:
    """Compress an N-bit word into its disclosed coordinates.

    Per inner block m: v^(m) = transform(x^(m)); disclose v^(m) on the inner
    frozen set. Per level j (non-frozen inner position k_j): t^(j) =
    transform of the column (v^(0)[k_j], ..., v^(M-1)[k_j]); disclose t^(j)
    on that level's outer frozen set.
    """
    x = _as_blocks(x, code)
    v = transform(x)
    inner_bits = v[:, code.inner_frozen.idx].copy()
    outer_bits = []
    for j, k in enumerate(code.level_order):
        t = transform(v[:, k])
        outer_bits.append(t[code.outer_frozen[j].idx].copy())
    return CompressedPayload(inner_bits=inner_bits, outer_bits=outer_bits)


# ---------------------------------------------------------------------------
# interleaved decoding (batched core)
# ---------------------------------------------------------------------------


def _branch_fills(
    code: ConcatCode,
    T: int,
    phase_mode: str,
    seed: int | None,
    n_samples: int,
    fills: np.ndarray | None,
) -> np.ndarray:
    """Fill tensor (T, M, R, F) for undisclosed inner coordinates."""
    F = code.inner_frozen.idx.size
    if phase_mode == "randomized":
        R = 1
    elif phase_mode == "marginalized":
        R = (1 << F) if F <= EXHAUSTIVE_LIMIT else n_samples
        if F > EXHAUSTIVE_LIMIT and R < 1:
            raise ValueError("sampled marginalization needs n_samples >= 1")
    else:
        raise ValueError(f"unknown phase mode {phase_mode!r}")
    if fills is not None:
        fills = np.asarray(fills, dtype=np.uint8)
        if fills.shape != (T, code.M, R, F):
            raise ValueError(f"fills shape {fills.shape} != {(T, code.M, R, F)}")
        return fills
    if phase_mode == "marginalized" and F <= EXHAUSTIVE_LIMIT:
        cols = [(np.arange(R) >> (F - 1 - j)) & 1 for j in range(F)]
        enum = (
            np.stack(cols, axis=1).astype(np.uint8) if F else np.zeros((1, 0), np.uint8)
        )
        return np.broadcast_to(enum[None, None], (T, code.M, R, F))
    if seed is None:
        raise ValueError(f"phase mode {phase_mode!r} needs a seed when no fills are supplied")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.integers(0, 2, size=(T, code.M, R, F), dtype=np.uint8)


def decode_interleaved(
    code: ConcatCode,
    leaf_llr: np.ndarray,
    inner_values: np.ndarray | None,
    outer_values: list[np.ndarray],
    phase_mode: str = "exact",
    seed: int | None = None,
    n_samples: int = 32,
    fills: np.ndarray | None = None,
) -> dict:
    """Batched interleaved decode of T independent N-words.

    Parameters
    ----------
    leaf_llr : (T, M, L) float
        Channel evidence per trial, block, position.
    inner_values : (T, M, F) uint8 or None
        Disclosed inner frozen values; None marks them unobserved, in which
        case ``phase_mode`` must be randomized or marginalized ("exact"
        requires disclosure and raises otherwise).
    outer_values : list of (T, |O_j|) uint8
        Disclosed outer frozen values per level.
    fills : (T, M, R, F) uint8, optional
        Externally drawn branch fills (campaign determinism); drawn from
        ``seed`` when omitted.

    Returns
    -------
    dict with u_hat, x_hat: (T, M, L) uint8 and t_hat: list of (T, M) uint8.
    Undisclosed frozen coordinates of u_hat carry branch-0 fills, not
    information; x_hat is their transform and is only meaningful coset-wise
    at those coordinates.
    """
    leaf_llr = np.asarray(leaf_llr, dtype=np.float64)
    T, M, L = leaf_llr.shape
    if (M, L) != (code.M, code.L):
        raise ValueError(f"evidence shape {(M, L)} != code blocks {(code.M, code.L)}")
    fmask = code.inner_frozen.mask
    fcol = np.cumsum(fmask) - 1
    F = code.inner_frozen.idx.size
    if inner_values is not None:
        iv = np.asarray(inner_values, dtype=np.uint8)
        if iv.shape != (T, M, F):
            raise ValueError(f"inner values shape {iv.shape} != {(T, M, F)}")
        R = 1
        branch_vals = iv[:, :, None, :]
    else:
        if phase_mode == "exact":
            raise ValueError("exact mode requires disclosed inner values")
        # uniform-weight fills are distribution-preserving only for a
        # symmetric source; asymmetric-prior codes must disclose inner values
        if code.channel.kind in ("bsc", "bec") and code.channel.prior_one != 0.5:
            raise ValueError("undisclosed inner coordinates require a symmetric source")
        branch_vals = _branch_fills(code, T, phase_mode, seed, n_samples, fills)
        R = branch_vals.shape[2]
    if len(outer_values) != code.K:
        raise ValueError(f"{len(outer_values)} outer value arrays for {code.K} levels")

    inner = SCEngine(
        np.broadcast_to(leaf_llr[:, :, None, :], (T, M, R, L)).reshape(T * M * R, L)
    )
    u_hat = np.empty((T, M, L), dtype=np.uint8)
    t_hat: list[np.ndarray] = []
    next_level = 0
    for k in range(L):
        step_llr = inner.step()
        if fmask[k]:
            b = np.ascontiguousarray(branch_vals[:, :, :, fcol[k]])
            u_hat[:, :, k] = b[:, :, 0]
            inner.commit(b.reshape(T * M * R))
            continue
        # schedule barrier: level j may only consume step-k LLRs at its own
        # position, and levels commit in ascending order
        j = next_level
        assert code.level_order[j] == k and inner.next_index == k
        if R == 1:
            leaf = step_llr.reshape(T, M, R)[:, :, 0]
        else:
            p1 = llr_to_prob_one(step_llr.reshape(T, M, R))
            leaf = prob_one_to_llr(p1.mean(axis=2))
        ofz = code.outer_frozen[j]
        ovals = np.broadcast_to(np.asarray(outer_values[j], dtype=np.uint8), (T, ofz.idx.size))
        omask = ofz.mask
        ocol = np.cumsum(omask) - 1
        outer = SCEngine(leaf)
        tj = np.empty((T, M), dtype=np.uint8)
        for m in range(M):
            ollr = outer.step()
            if omask[m]:
                bits = ovals[:, ocol[m]]
            else:
                bits = (ollr < 0.0).astype(np.uint8)
            tj[:, m] = bits
            outer.commit(bits)
        assert outer.next_index == M
        t_hat.append(tj)
        v_level = transform(tj)
        u_hat[:, :, k] = v_level
        inner.commit(np.broadcast_to(v_level[:, :, None], (T, M, R)).reshape(T * M * R))
        next_level += 1
    assert next_level == code.K and inner.next_index == L
    x_hat = transform(u_hat)
    return {"u_hat": u_hat, "x_hat": x_hat, "t_hat": t_hat}


def concat_decompress(
    evidence: np.ndarray,
    payload: CompressedPayload,
    code: ConcatCode,
    phase_mode: str = "marginalized",
    seed: int | None = None,
    n_samples: int = 32,
) -> np.ndarray:
    """Reconstruct an N-word from evidence and disclosed coordinates.

    ``evidence`` is (M, L) or flat (N,) leaf LLRs. Returns x_hat of shape
    (M, L). With ``payload.inner_bits is None`` the inner frozen coordinates
    are treated as unobserved and handled per ``phase_mode``.
    """
    evidence = np.asarray(evidence, dtype=np.float64)
    if evidence.ndim == 1:
        evidence = evidence.reshape(code.M, code.L)
    payload.validate(code)
    inner = None if payload.inner_bits is None else np.asarray(payload.inner_bits, np.uint8)[None]
    outer = [np.asarray(v, dtype=np.uint8)[None] for v in payload.outer_bits]
    res = decode_interleaved(
        code,
        evidence[None],
        inner,
        outer,
        phase_mode=phase_mode,
        seed=seed,
        n_samples=n_samples,
    )
    return res["x_hat"][0]


# ---------------------------------------------------------------------------
# shaper
# ---------------------------------------------------------------------------

SHAPER_ENUM_LIMIT = 16  # exact conditional entropies / distances enumerate 2^L states


@dataclass
class ShaperSpec:
    """Extraction set for converting uniform bits into a biased source.

    ``extraction_set`` lists the u-domain positions that carry the input
    bits, ordered by descending conditional entropy H(U_i | U^{i-1}) under
    the i.i.d. Bernoulli(source_prior) x-domain law (ties: lower index
    first). All other positions are sampled from their exact conditional
    given the prefix.
    """

    L: int
    extraction_set: np.ndarray
    source_prior: float
    cond_entropy: np.ndarray | None = None

    def __post_init__(self):
        self.extraction_set = np.asarray(self.extraction_set, dtype=np.int64)
        if self.extraction_set.size != np.unique(self.extraction_set).size:
            raise ValueError("extraction set has duplicates")
        if self.extraction_set.size and (
            self.extraction_set.min() < 0 or self.extraction_set.max() >= self.L
        ):
            raise ValueError("extraction set out of range")

    @property
    def K(self) -> int:
        return int(self.extraction_set.size)


def conditional_entropies(source_prior: float, L: int) -> np.ndarray:
    """H(U_i | U^{i-1}) in bits for every index, by exact enumeration.

    The u-domain law is the pushforward of the i.i.d. Bernoulli prior
    through the transform. Chain rule: H(U_i|U^{i-1}) = H(U^{i+1}) - H(U^i),
    with prefix marginals read off the full 2^L table. Uniform priors short
    circuit to all-ones. Enumeration is gated at L <= SHAPER_ENUM_LIMIT.
    """
    if source_prior == 0.5:
        return np.ones(L)
    if L > SHAPER_ENUM_LIMIT:
        raise ValueError(f"exact conditional entropies enumerate 2^L states; L={L} too large")
    pu = _u_domain_pmf(source_prior, L)
    h_prefix = [0.0]
    for i in range(1, L + 1):
        marg = pu.reshape(1 << i, -1).sum(axis=1)
        nz = marg[marg > 0]
        h_prefix.append(float(-(nz * np.log2(nz)).sum()))
    return np.diff(np.asarray(h_prefix))


def _u_domain_pmf(source_prior: float, L: int) -> np.ndarray:
    """P(U = u) for all 2^L values, index = big-endian bit pattern."""
    u = np.arange(1 << L, dtype=np.int64)
    bits = ((u[:, None] >> np.arange(L - 1, -1, -1)[None, :]) & 1).astype(np.uint8)
    x = transform(bits)
    ones = x.sum(axis=1).astype(np.float64)
    return np.exp(
        ones * math.log(source_prior) + (L - ones) * math.log1p(-source_prior)
    )


def make_shaper_spec(
    source_prior: float,
    L: int,
    epsilon: float | None = None,
    K: int | None = None,
) -> ShaperSpec:
    """Build a ShaperSpec by entropy threshold or by size.

    epsilon mode selects every index with conditional entropy >= 1 - epsilon
    (so each extracted bit is within epsilon of uniform and the shaped
    distribution is within K*sqrt(ln2 * epsilon / 2) of the source in total
    variation); K mode takes the K highest-entropy indices.
    """
    if (epsilon is None) == (K is None):
        raise ValueError("pass exactly one of epsilon, K")
    h = conditional_entropies(source_prior, L)
    order = np.lexsort((np.arange(L), -h))  # descending entropy, index tiebreak
    if K is None:
        chosen = order[h[order] >= 1.0 - epsilon]
    else:
        if not 0 <= K <= L:
            raise ValueError(f"K must be in [0, L], got {K}")
        chosen = order[:K]
    return ShaperSpec(L=L, extraction_set=chosen, source_prior=source_prior, cond_entropy=h)


def shaper_distance_bound(spec: ShaperSpec, epsilon: float) -> float:
    """K * sqrt(ln2 * epsilon / 2): the guaranteed total-variation radius."""
    return spec.K * math.sqrt(math.log(2.0) * epsilon / 2.0)


def shape_batch(bits: np.ndarray, spec: ShaperSpec, rng: np.random.Generator) -> np.ndarray:
    """Shape B rows of K input bits into B u-domain blocks of length L."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    B = bits.shape[0]
    if bits.shape[1] != spec.K:
        raise ValueError(f"need {spec.K} input bits per row, got {bits.shape[1]}")
    col_of = {int(p): c for c, p in enumerate(spec.extraction_set)}
    eng = conditional_prior_engine(spec.source_prior, spec.L, B)
    out = np.empty((B, spec.L), dtype=np.uint8)
    for i in range(spec.L):
        llr = eng.step()
        if i in col_of:
            b = bits[:, col_of[i]]
        else:
            b = (rng.random(B) < llr_to_prob_one(llr)).astype(np.uint8)
        out[:, i] = b
        eng.commit(b)
    return out


def shape(bits: np.ndarray, spec: ShaperSpec, seed: int) -> np.ndarray:
    """Shape one block: input bits at the extraction set, conditional samples
    elsewhere. extract(shape(bits)) == bits always, whatever the seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return shape_batch(np.asarray(bits, dtype=np.uint8)[None], spec, rng)[0]


def extract(block: np.ndarray, spec: ShaperSpec) -> np.ndarray:
    """Read the input bits back out of a (shaped or decoded) u-domain block."""
    block = np.asarray(block, dtype=np.uint8)
    return block[..., spec.extraction_set]


def exact_shaper_distance(spec: ShaperSpec) -> float:
    """Exact total-variation distance between shaped and true source laws.

    Sums |P_shaped - P_true| / 2 over all 2^L u-words (equivalently x-words;
    the transform is a bijection). P_shaped replaces the conditional of every
    extraction-set index by fair coin flips and keeps the exact conditionals
    elsewhere. Rejects L beyond the enumeration gate.
    """
    L = spec.L
    if L > 12:
        raise ValueError(f"exact distance enumerates 2^L outcomes and 2^L branches; L={L} too large")
    pu = _u_domain_pmf(spec.source_prior, L)
    u = np.arange(1 << L, dtype=np.int64)
    in_set = np.zeros(L, dtype=bool)
    in_set[spec.extraction_set] = True
    marg_prev = np.ones(1)  # P(empty prefix)
    shaped = np.ones(1 << L)
    for i in range(L):
        marg_next = pu.reshape(1 << (i + 1), -1).sum(axis=1)
        if in_set[i]:
            factor = np.full(1 << L, 0.5)
        else:
            pref_next = u >> (L - 1 - i)
            pref = u >> (L - i)
            with np.errstate(divide="ignore", invalid="ignore"):
                cond = marg_next[pref_next] / marg_prev[pref]
            factor = np.where(np.isfinite(cond), cond, 0.0)
        shaped *= factor
        marg_prev = marg_next
    return float(0.5 * np.abs(shaped - pu).sum())


# ---------------------------------------------------------------------------
# channel coding (reverse pipeline)
# ---------------------------------------------------------------------------


def outer_fill_bits(code: ConcatCode) -> list[np.ndarray]:
    """Pseudorandom outer frozen values pinned by the code's fill_seed.

    Shared by encoder and decoder: both sides re-derive the same stream, the
    operational stand-in for common randomness. One spawned child per level
    keeps the values independent of every other level's frozen-set size.
    """
    children = np.random.SeedSequence(code.fill_seed).spawn(max(code.K, 1))
    out = []
    for j, spec in enumerate(code.outer_frozen):
        rng = np.random.default_rng(children[j])
        out.append(rng.integers(0, 2, size=spec.idx.size, dtype=np.uint8))
    return out


def message_layout(code: ConcatCode) -> list[np.ndarray]:
    """Per-level non-frozen outer positions, ascending; message bit order is
    level 0 first, positions ascending within a level."""
    return [np.flatnonzero(~spec.mask) for spec in code.outer_frozen]


def encode_levels(message: np.ndarray, code: ConcatCode, outer_vals: list[np.ndarray]) -> np.ndarray:
    """Assemble t^(j) per level from message + frozen values; return the
    level table of v-domain columns, shape (M, K) (column j = transform(t_j))."""
    message = np.asarray(message, dtype=np.uint8).ravel()
    if message.size != code.num_message_bits:
        raise ValueError(f"message has {message.size} bits, code carries {code.num_message_bits}")
    cols = np.empty((code.M, code.K), dtype=np.uint8)
    at = 0
    for j, spec in enumerate(code.outer_frozen):
        data_pos = np.flatnonzero(~spec.mask)
        t = np.empty(code.M, dtype=np.uint8)
        t[spec.idx] = outer_vals[j]
        t[data_pos] = message[at : at + data_pos.size]
        at += data_pos.size
        cols[:, j] = transform(t)
    return cols


def shape_inner_batch(
    level_cols: np.ndarray,
    code: ConcatCode,
    rng_uniforms: np.ndarray,
) -> np.ndarray:
    """Fill the inner frozen coordinates by conditional sampling, batched.

    ``level_cols`` is (B, M, K): the already-fixed v-domain values at the
    non-frozen inner positions (B independent N-words). ``rng_uniforms`` is
    (B, M, F) in [0,1): the shared-randomness comparators, one per frozen
    coordinate. Walks every block's u-domain in index order, committing the
    fixed level values and sampling frozen coordinate i as
    [uniform < P(V_i = 1 | prefix)]. Returns the complete v tensor (B, M, L).
    """
    B, M, K = level_cols.shape
    F = code.inner_frozen.idx.size
    prior = code.channel.prior_one if code.channel.kind in ("bsc", "bec") else 0.5
    eng = conditional_prior_engine(prior, code.L, B * M)
    fmask = code.inner_frozen.mask
    fcol = np.cumsum(fmask) - 1
    lcol = np.cumsum(~fmask) - 1
    v = np.empty((B, M, code.L), dtype=np.uint8)
    for i in range(code.L):
        llr = eng.step()
        if fmask[i]:
            p1 = llr_to_prob_one(llr).reshape(B, M)
            b = (rng_uniforms[:, :, fcol[i]] < p1).astype(np.uint8)
        else:
            b = level_cols[:, :, lcol[i]]
        v[:, :, i] = b
        eng.commit(b.reshape(B * M))
    return v


def concat_channel_encode(
    message: np.ndarray,
    code: ConcatCode,
    seed: int,
) -> tuple[np.ndarray, CompressedPayload]:
    """Encode a message into a channel input word (reverse pipeline).

    Outer frozen values come pseudorandomly from the code's fill_seed
    (shared with the decoder); inner frozen coordinates are sampled from
    their exact conditional given the already-fixed level values (the shaper
    discipline), using ``seed``. Returns (x of shape (M, L), disclosures).
    """
    ovals = outer_fill_bits(code)
    cols = encode_levels(message, code, ovals)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    uniforms = rng.random((1, code.M, code.inner_frozen.idx.size))
    v = shape_inner_batch(cols[None], code, uniforms)[0]
    x = transform(v)
    payload = CompressedPayload(inner_bits=v[:, code.inner_frozen.idx].copy(), outer_bits=ovals)
    return x, payload


def concat_channel_decode(
    evidence: np.ndarray,
    disclosures: CompressedPayload,
    code: ConcatCode,
    phase_mode: str = "exact",
    seed: int | None = None,
    n_samples: int = 32,
) -> np.ndarray:
    """Decode a channel observation back to the message coordinates.

    Runs the interleaved decoder with the disclosed frozen values and reads
    the non-frozen outer coordinates out of the decoded levels.
    """
    evidence = np.asarray(evidence, dtype=np.float64)
    if evidence.ndim == 1:
        evidence = evidence.reshape(code.M, code.L)
    disclosures.validate(code)
    inner = None
    if disclosures.inner_bits is not None:
        inner = np.asarray(disclosures.inner_bits, dtype=np.uint8)[None]
    outer = [np.asarray(v, dtype=np.uint8)[None] for v in disclosures.outer_bits]
    res = decode_interleaved(
        code, evidence[None], inner, outer, phase_mode=phase_mode, seed=seed, n_samples=n_samples
    )
    out = np.empty(code.num_message_bits, dtype=np.uint8)
    at = 0
    for j, spec in enumerate(code.outer_frozen):
        data_pos = np.flatnonzero(~spec.mask)
        out[at : at + data_pos.size] = res["t_hat"][j][0][data_pos]
        at += data_pos.size
    return out
