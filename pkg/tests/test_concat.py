"""Two-layer compression, interleaved decoding, shaping, and channel coding."""

import math

import numpy as np
import pytest

from conftest import all_words
from polarforge.channels import BinarySymmetricView, ChannelModel
from polarforge.concat import (
    CompressedPayload,
    ShaperSpec,
    concat_channel_decode,
    concat_channel_encode,
    concat_compress,
    concat_decompress,
    conditional_entropies,
    decode_interleaved,
    encode_levels,
    exact_shaper_distance,
    extract,
    make_shaper_spec,
    message_layout,
    outer_fill_bits,
    shape,
    shape_batch,
    shape_inner_batch,
    shaper_distance_bound,
)
from polarforge.construction import ConcatCode
from polarforge.polar_core import (
    FrozenSpec,
    SCEngine,
    conditional_prior,
    llr_to_prob_one,
    prob_one_to_llr,
    sc_decode,
    transform,
)


def _empty(n: int) -> FrozenSpec:
    return FrozenSpec(N=n, idx=np.array([], dtype=np.int64), val=np.array([], dtype=np.uint8))


def _toy_code(prior_one: float = 0.5) -> ConcatCode:
    """L=4, M=2: inner frozen {1,2}, levels at positions 0 and 3,
    one outer frozen index on level 0, none on level 1."""
    return ConcatCode(
        L=4,
        M=2,
        inner_frozen=FrozenSpec(N=4, idx=np.array([1, 2]), val=np.array([0, 0])),
        outer_frozen=[FrozenSpec(N=2, idx=np.array([0]), val=np.array([0])), _empty(2)],
        level_order=[0, 3],
        fill_seed=11,
        channel=ChannelModel(kind="bsc", p=0.05, prior_one=prior_one),
    )


def _rich_code() -> ConcatCode:
    """L=4, M=4 with nonempty frozen structure in both layers."""
    return ConcatCode(
        L=4,
        M=4,
        inner_frozen=FrozenSpec(N=4, idx=np.array([0, 1]), val=np.array([1, 0])),
        outer_frozen=[
            FrozenSpec(N=4, idx=np.array([0, 1]), val=np.array([0, 1])),
            FrozenSpec(N=4, idx=np.array([0]), val=np.array([1])),
        ],
        level_order=[2, 3],
        fill_seed=5,
        channel=ChannelModel(kind="bsc", p=0.05),
    )


# ---------------------------------------------------------------------------
# payload container
# ---------------------------------------------------------------------------


def test_payload_bit_serialization_round_trip():
    code = _rich_code()
    rng = np.random.default_rng(0)
    payload = concat_compress(rng.integers(0, 2, size=16, dtype=np.uint8), code)
    bits = payload.to_bits(code)
    assert bits.size == payload.num_bits == code.num_disclosed_bits
    back = CompressedPayload.from_bits(bits, code)
    assert np.array_equal(back.inner_bits, payload.inner_bits)
    for a, b in zip(back.outer_bits, payload.outer_bits):
        assert np.array_equal(a, b)


def test_payload_json_fields_are_length_prefixed_hex():
    code = _toy_code()
    payload = concat_compress(np.arange(8, dtype=np.uint8) % 2, code)
    obj = payload.to_obj()
    for field in obj["inner"] + obj["outer"]:
        n_str, _, hx = field.partition(":")
        assert int(n_str) >= 0
        bytes.fromhex(hx)  # must parse
    back = CompressedPayload.from_obj(obj)
    assert np.array_equal(back.inner_bits, payload.inner_bits)
    for a, b in zip(back.outer_bits, payload.outer_bits):
        assert np.array_equal(a, b)


def test_payload_undisclosed_inner_bits_cannot_flatten():
    code = _toy_code()
    payload = CompressedPayload(inner_bits=None, outer_bits=[np.array([0], np.uint8), np.zeros(0, np.uint8)])
    payload.validate(code)
    with pytest.raises(ValueError, match="undisclosed inner bits"):
        payload.to_bits(code)


def test_payload_validation_and_sizing_errors():
    code = _toy_code()
    with pytest.raises(ValueError, match="payload needs"):
        CompressedPayload.from_bits(np.zeros(3, np.uint8), code)
    bad = CompressedPayload(inner_bits=np.zeros((1, 2), np.uint8), outer_bits=[np.zeros(1, np.uint8)] * 2)
    with pytest.raises(ValueError, match="inner_bits shape"):
        bad.validate(code)
    with pytest.raises(ValueError, match="outer value vectors"):
        CompressedPayload(inner_bits=np.zeros((2, 2), np.uint8), outer_bits=[]).validate(code)
    with pytest.raises(ValueError, match="hex field shorter"):
        CompressedPayload.from_obj({"inner": None, "outer": ["9:00"]})


# ---------------------------------------------------------------------------
# compression map
# ---------------------------------------------------------------------------


def test_compress_worked_layout():
    code = _toy_code()
    rng = np.random.default_rng(1)
    x = rng.integers(0, 2, size=(2, 4), dtype=np.uint8)
    payload = concat_compress(x, code)
    v = transform(x)
    assert np.array_equal(payload.inner_bits, v[:, [1, 2]])
    t0 = transform(v[:, 0])
    assert np.array_equal(payload.outer_bits[0], t0[[1]])
    assert payload.outer_bits[1].size == 0


def test_compress_is_linear_over_gf2():
    code = _rich_code()
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = rng.integers(0, 2, size=16, dtype=np.uint8)
        b = rng.integers(0, 2, size=16, dtype=np.uint8)
        pa = concat_compress(a, code).to_bits(code)
        pb = concat_compress(b, code).to_bits(code)
        pab = concat_compress(a ^ b, code).to_bits(code)
        assert np.array_equal(pab, pa ^ pb)


def test_compress_accepts_flat_or_block_input():
    code = _rich_code()
    rng = np.random.default_rng(3)
    x = rng.integers(0, 2, size=16, dtype=np.uint8)
    flat = concat_compress(x, code)
    blocks = concat_compress(x.reshape(4, 4), code)
    assert np.array_equal(flat.to_bits(code), blocks.to_bits(code))
    with pytest.raises(ValueError, match="code expects"):
        concat_compress(np.zeros(15, np.uint8), code)
    with pytest.raises(ValueError, match="input shape"):
        concat_compress(np.zeros((2, 8), np.uint8), code)


# ---------------------------------------------------------------------------
# interleaved decoding: independent sequential reference
# ---------------------------------------------------------------------------


def _reference_decode_exact(code, leaf_llr, inner_values, outer_values):
    """Per-trial re-implementation of the interleaved schedule with
    disclosed inner values: plain SC engines and explicit loops."""
    T = leaf_llr.shape[0]
    u_hat = np.empty((T, code.M, code.L), dtype=np.uint8)
    t_hat = [np.empty((T, code.M), dtype=np.uint8) for _ in range(code.K)]
    fmask = code.inner_frozen.mask
    fcol = np.cumsum(fmask) - 1
    for t in range(T):
        eng = SCEngine(leaf_llr[t])  # M rows advance in lockstep
        level = 0
        for k in range(code.L):
            llr_k = eng.step()
            if fmask[k]:
                bits = inner_values[t, :, fcol[k]]
            else:
                out = sc_decode(llr_k, code.outer_frozen[level], frozen_values=outer_values[level][t])
                t_hat[level][t] = out.u_hat
                bits = out.x_hat
                level += 1
            u_hat[t, :, k] = bits
            eng.commit(bits)
    return {"u_hat": u_hat, "x_hat": transform(u_hat), "t_hat": t_hat}


def test_interleaved_decode_matches_sequential_reference():
    code = _rich_code()
    rng = np.random.default_rng(4)
    T = 6
    leaf = rng.uniform(-4, 4, size=(T, 4, 4))
    inner_vals = rng.integers(0, 2, size=(T, 4, 2), dtype=np.uint8)
    outer_vals = [
        rng.integers(0, 2, size=(T, 2), dtype=np.uint8),
        rng.integers(0, 2, size=(T, 1), dtype=np.uint8),
    ]
    got = decode_interleaved(code, leaf, inner_vals, outer_vals, phase_mode="exact")
    want = _reference_decode_exact(code, leaf, inner_vals, outer_vals)
    assert np.array_equal(got["u_hat"], want["u_hat"])
    assert np.array_equal(got["x_hat"], want["x_hat"])
    for a, b in zip(got["t_hat"], want["t_hat"]):
        assert np.array_equal(a, b)


def test_interleaved_decode_noiseless_round_trip():
    code = _rich_code()
    rng = np.random.default_rng(5)
    T = 8
    x = rng.integers(0, 2, size=(T, 16), dtype=np.uint8)
    view = BinarySymmetricView(0.05)
    leaf = view.evidence(x).reshape(T, 4, 4)
    inner_vals = np.empty((T, 4, 2), dtype=np.uint8)
    outer_vals = [np.empty((T, 2), dtype=np.uint8), np.empty((T, 1), dtype=np.uint8)]
    for t in range(T):
        payload = concat_compress(x[t], code)
        inner_vals[t] = payload.inner_bits
        outer_vals[0][t] = payload.outer_bits[0]
        outer_vals[1][t] = payload.outer_bits[1]
    got = decode_interleaved(code, leaf, inner_vals, outer_vals, phase_mode="exact")
    assert np.array_equal(got["x_hat"].reshape(T, 16), x)
    # level words relate to the decoded blocks by the per-level transform
    v_hat = got["u_hat"]
    for j, k in enumerate(code.level_order):
        assert np.array_equal(got["t_hat"][j], transform(np.ascontiguousarray(v_hat[:, :, k])))


def _reference_decode_marginalized(code, leaf_llr, outer_values):
    """Branch-parallel reference: every fill pattern of the inner frozen
    coordinates runs in its own engine; data decisions average the branch
    posteriors; all branches follow the committed outer decisions."""
    T, M, L = leaf_llr.shape
    F = code.inner_frozen.idx.size
    fills = all_words(F)  # branch r fills every block with the same pattern
    R = fills.shape[0]
    fmask = code.inner_frozen.mask
    fcol = np.cumsum(fmask) - 1
    u_hat = np.empty((T, M, L), dtype=np.uint8)
    t_hat = [np.empty((T, M), dtype=np.uint8) for _ in range(code.K)]
    for t in range(T):
        branches = [SCEngine(leaf_llr[t]) for _ in range(R)]
        level = 0
        for k in range(L):
            step = np.stack([eng.step() for eng in branches])  # (R, M)
            if fmask[k]:
                for r, eng in enumerate(branches):
                    eng.commit(np.full(M, fills[r, fcol[k]], dtype=np.uint8))
                u_hat[t, :, k] = fills[0, fcol[k]]
                continue
            leaf = prob_one_to_llr(llr_to_prob_one(step).mean(axis=0))
            out = sc_decode(leaf, code.outer_frozen[level], frozen_values=outer_values[level][t])
            t_hat[level][t] = out.u_hat
            u_hat[t, :, k] = out.x_hat
            for eng in branches:
                eng.commit(out.x_hat)
            level += 1
    return {"u_hat": u_hat, "x_hat": transform(u_hat), "t_hat": t_hat}


def test_interleaved_marginalized_decode_matches_branch_reference():
    code = _rich_code()
    rng = np.random.default_rng(6)
    T = 5
    leaf = rng.uniform(-4, 4, size=(T, 4, 4))
    outer_vals = [
        rng.integers(0, 2, size=(T, 2), dtype=np.uint8),
        rng.integers(0, 2, size=(T, 1), dtype=np.uint8),
    ]
    got = decode_interleaved(code, leaf, None, outer_vals, phase_mode="marginalized")
    want = _reference_decode_marginalized(code, leaf, outer_vals)
    assert np.array_equal(got["u_hat"], want["u_hat"])
    for a, b in zip(got["t_hat"], want["t_hat"]):
        assert np.array_equal(a, b)


def test_interleaved_randomized_decode_equals_exact_decode_with_those_fills():
    code = _rich_code()
    rng = np.random.default_rng(7)
    T = 5
    leaf = rng.uniform(-4, 4, size=(T, 4, 4))
    outer_vals = [
        rng.integers(0, 2, size=(T, 2), dtype=np.uint8),
        rng.integers(0, 2, size=(T, 1), dtype=np.uint8),
    ]
    fills = rng.integers(0, 2, size=(T, 4, 1, 2), dtype=np.uint8)
    got = decode_interleaved(code, leaf, None, outer_vals, phase_mode="randomized", fills=fills)
    ref = decode_interleaved(code, leaf, fills[:, :, 0, :], outer_vals, phase_mode="exact")
    assert np.array_equal(got["u_hat"], ref["u_hat"])
    for a, b in zip(got["t_hat"], ref["t_hat"]):
        assert np.array_equal(a, b)


def test_interleaved_randomized_decode_is_seed_deterministic():
    code = _rich_code()
    rng = np.random.default_rng(8)
    leaf = rng.uniform(-4, 4, size=(3, 4, 4))
    outer_vals = [np.zeros((3, 2), np.uint8), np.zeros((3, 1), np.uint8)]
    a = decode_interleaved(code, leaf, None, outer_vals, phase_mode="randomized", seed=123)
    b = decode_interleaved(code, leaf, None, outer_vals, phase_mode="randomized", seed=123)
    assert np.array_equal(a["u_hat"], b["u_hat"])


def test_interleaved_decode_argument_validation():
    code = _rich_code()
    leaf = np.zeros((2, 4, 4))
    outer_ok = [np.zeros((2, 2), np.uint8), np.zeros((2, 1), np.uint8)]
    with pytest.raises(ValueError, match="exact mode requires disclosed inner values"):
        decode_interleaved(code, leaf, None, outer_ok, phase_mode="exact")
    with pytest.raises(ValueError, match="evidence shape"):
        decode_interleaved(code, np.zeros((2, 4, 8)), None, outer_ok, phase_mode="randomized", seed=0)
    with pytest.raises(ValueError, match="inner values shape"):
        decode_interleaved(code, leaf, np.zeros((2, 4, 1), np.uint8), outer_ok)
    with pytest.raises(ValueError, match="outer value arrays"):
        decode_interleaved(code, leaf, np.zeros((2, 4, 2), np.uint8), outer_ok[:1])
    with pytest.raises(ValueError, match="unknown phase mode"):
        decode_interleaved(code, leaf, None, outer_ok, phase_mode="viterbi")
    with pytest.raises(ValueError, match="needs a seed"):
        decode_interleaved(code, leaf, None, outer_ok, phase_mode="randomized")
    with pytest.raises(ValueError, match="fills shape"):
        decode_interleaved(code, leaf, None, outer_ok, phase_mode="randomized",
                           fills=np.zeros((2, 4, 2, 2), np.uint8))


def test_interleaved_decode_rejects_asymmetric_source_without_disclosure():
    code = _toy_code(prior_one=0.25)
    leaf = np.zeros((1, 2, 4))
    outer_vals = [np.zeros((1, 1), np.uint8), np.zeros((1, 0), np.uint8)]
    with pytest.raises(ValueError, match="symmetric source"):
        decode_interleaved(code, leaf, None, outer_vals, phase_mode="marginalized")


def test_decompress_round_trip_and_flat_evidence():
    code = _rich_code()
    rng = np.random.default_rng(9)
    x = rng.integers(0, 2, size=16, dtype=np.uint8)
    payload = concat_compress(x, code)
    ev = BinarySymmetricView(0.05).evidence(x)
    out = concat_decompress(ev, payload, code)  # disclosed payload: exact path
    assert out.shape == (4, 4)
    assert np.array_equal(out.ravel(), x)
    out2 = concat_decompress(ev.reshape(4, 4), payload, code)
    assert np.array_equal(out2, out)


# ---------------------------------------------------------------------------
# shaper: conditional entropies and specs
# ---------------------------------------------------------------------------


def test_conditional_entropies_uniform_prior_short_circuits():
    assert np.array_equal(conditional_entropies(0.5, 32), np.ones(32))


def test_conditional_entropies_satisfy_the_chain_rule():
    # the per-index conditionals must sum to the total source entropy
    for p in (0.25, 0.3):
        for L in (2, 4, 8):
            h = conditional_entropies(p, L)
            total = -(p * math.log2(p) + (1 - p) * math.log2(1 - p)) * L
            assert float(h.sum()) == pytest.approx(total, rel=1e-9)
            assert np.all(h >= -1e-12) and np.all(h <= 1.0 + 1e-12)


def test_conditional_entropies_worked_length_two():
    # N=2, p=0.25: H(U0) = h(0.375); H(U1|U0) = h(p^2+q^2 ...) via chain rule
    h = conditional_entropies(0.25, 2)
    h0 = -(0.375 * math.log2(0.375) + 0.625 * math.log2(0.625))
    assert h[0] == pytest.approx(h0, rel=1e-12)
    total = -2 * (0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
    assert h[1] == pytest.approx(total - h0, rel=1e-12)


def test_conditional_entropies_enumeration_gate():
    with pytest.raises(ValueError, match="too large"):
        conditional_entropies(0.25, 32)


def test_make_shaper_spec_epsilon_mode_thresholds_entropy():
    p, L, eps = 0.25, 8, 0.2
    spec = make_shaper_spec(p, L, epsilon=eps)
    h = conditional_entropies(p, L)
    inside = set(spec.extraction_set.tolist())
    for i in range(L):
        assert (h[i] >= 1.0 - eps) == (i in inside)


def test_make_shaper_spec_k_mode_takes_highest_entropy_indices():
    p, L = 0.25, 8
    h = conditional_entropies(p, L)
    order = np.lexsort((np.arange(L), -h))
    for K in (0, 3, 8):
        spec = make_shaper_spec(p, L, K=K)
        assert spec.K == K
        assert set(spec.extraction_set.tolist()) == set(order[:K].tolist())


def test_make_shaper_spec_validation():
    with pytest.raises(ValueError, match="exactly one"):
        make_shaper_spec(0.25, 8)
    with pytest.raises(ValueError, match="exactly one"):
        make_shaper_spec(0.25, 8, epsilon=0.1, K=2)
    with pytest.raises(ValueError, match="K must be"):
        make_shaper_spec(0.25, 8, K=9)
    with pytest.raises(ValueError, match="duplicates"):
        ShaperSpec(L=4, extraction_set=np.array([1, 1]), source_prior=0.25)
    with pytest.raises(ValueError, match="out of range"):
        ShaperSpec(L=4, extraction_set=np.array([4]), source_prior=0.25)


def test_shaper_distance_bound_formula():
    spec = ShaperSpec(L=8, extraction_set=np.array([0, 1, 2]), source_prior=0.25)
    assert shaper_distance_bound(spec, 0.1) == pytest.approx(3 * math.sqrt(math.log(2) * 0.05))


# ---------------------------------------------------------------------------
# shaping and extraction
# ---------------------------------------------------------------------------


def test_extract_undoes_shape_for_any_seed():
    spec = make_shaper_spec(0.25, 8, epsilon=0.1)
    rng = np.random.default_rng(10)
    for seed in (0, 1, 2, 99):
        bits = rng.integers(0, 2, size=spec.K, dtype=np.uint8)
        block = shape(bits, spec, seed)
        assert block.shape == (8,)
        assert np.array_equal(extract(block, spec), bits)


def test_shape_is_deterministic_in_the_seed():
    spec = make_shaper_spec(0.3, 8, K=4)
    bits = np.array([1, 0, 1, 1], dtype=np.uint8)
    assert np.array_equal(shape(bits, spec, 7), shape(bits, spec, 7))


def test_shape_batch_validates_row_width():
    spec = make_shaper_spec(0.25, 8, K=3)
    with pytest.raises(ValueError, match="input bits per row"):
        shape_batch(np.zeros((2, 4), np.uint8), spec, np.random.default_rng(0))


def test_shape_batch_extraction_columns_pass_through():
    spec = make_shaper_spec(0.25, 8, K=4)
    rng = np.random.default_rng(11)
    bits = rng.integers(0, 2, size=(50, 4), dtype=np.uint8)
    blocks = shape_batch(bits, spec, np.random.default_rng(1))
    assert np.array_equal(extract(blocks, spec), bits)


def _enumerated_shaper_distance(spec: ShaperSpec) -> float:
    """Direct oracle: walk every u-word, multiply per-index factors using the
    engine-based conditional, and fold against the true source law."""
    L = spec.L
    p = spec.source_prior
    in_set = set(spec.extraction_set.tolist())
    tv = 0.0
    for u in all_words(L):
        p_shaped = 1.0
        for i in range(L):
            if i in in_set:
                p_shaped *= 0.5
            else:
                q1 = conditional_prior(u[:i], p, L)
                p_shaped *= q1 if u[i] else 1.0 - q1
        ones = int(transform(u).sum())
        p_true = p**ones * (1.0 - p) ** (L - ones)
        tv += abs(p_shaped - p_true)
    return 0.5 * tv


def test_exact_shaper_distance_matches_direct_enumeration():
    for p, ext in ((0.3, [0, 1]), (0.25, [1, 3]), (0.4, [0, 1, 2])):
        spec = ShaperSpec(L=4, extraction_set=np.array(ext, dtype=np.int64), source_prior=p)
        got = exact_shaper_distance(spec)
        want = _enumerated_shaper_distance(spec)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_exact_shaper_distance_empty_extraction_is_zero():
    spec = ShaperSpec(L=8, extraction_set=np.array([], dtype=np.int64), source_prior=0.3)
    assert exact_shaper_distance(spec) == pytest.approx(0.0, abs=1e-12)


def test_exact_shaper_distance_enumeration_gate():
    spec = ShaperSpec(L=16, extraction_set=np.array([0]), source_prior=0.3)
    with pytest.raises(ValueError, match="too large"):
        exact_shaper_distance(spec)


def test_exact_shaper_distance_respects_the_bound():
    eps = 0.1
    spec = make_shaper_spec(0.25, 8, epsilon=eps)
    assert exact_shaper_distance(spec) <= shaper_distance_bound(spec, eps)


def test_empirical_shaped_law_approaches_the_exact_distance():
    # draw shaped blocks, histogram the 2^L outcomes, and compare the
    # empirical total variation to the exact value; the plug-in estimator is
    # biased upward by about sqrt(2^L / (pi B / 2)) / 2, well under 0.02 here
    p = 0.25
    spec = make_shaper_spec(p, 8, K=3)
    exact = exact_shaper_distance(spec)
    B = 60_000
    rng = np.random.default_rng(2718)
    bits = rng.integers(0, 2, size=(B, 3), dtype=np.uint8)
    blocks = shape_batch(bits, spec, rng)
    idx = blocks @ (1 << np.arange(7, -1, -1)).astype(np.int64)
    counts = np.bincount(idx, minlength=256) / B
    x = transform(all_words(8))
    ones = x.sum(axis=1).astype(np.float64)
    p_true = p**ones * (1 - p) ** (8 - ones)
    emp = 0.5 * float(np.abs(counts - p_true).sum())
    assert abs(emp - exact) < 0.02


# ---------------------------------------------------------------------------
# channel-coding pipeline
# ---------------------------------------------------------------------------


def test_message_layout_covers_all_message_bits():
    code = _rich_code()
    layout = message_layout(code)
    assert sum(pos.size for pos in layout) == code.num_message_bits
    for j, pos in enumerate(layout):
        assert np.array_equal(pos, np.flatnonzero(~code.outer_frozen[j].mask))


def test_outer_fill_bits_are_deterministic_per_code():
    code = _rich_code()
    a = outer_fill_bits(code)
    b = outer_fill_bits(code)
    for va, vb, spec in zip(a, b, code.outer_frozen):
        assert va.size == spec.idx.size
        assert np.array_equal(va, vb)


def test_encode_levels_places_message_and_fills():
    code = _rich_code()
    ovals = outer_fill_bits(code)
    rng = np.random.default_rng(12)
    message = rng.integers(0, 2, size=code.num_message_bits, dtype=np.uint8)
    cols = encode_levels(message, code, ovals)
    assert cols.shape == (4, 2)
    at = 0
    for j, spec in enumerate(code.outer_frozen):
        t = transform(np.ascontiguousarray(cols[:, j]))
        assert np.array_equal(t[spec.idx], ovals[j])
        data_pos = np.flatnonzero(~spec.mask)
        assert np.array_equal(t[data_pos], message[at : at + data_pos.size])
        at += data_pos.size


def test_encode_levels_rejects_wrong_message_size():
    code = _rich_code()
    with pytest.raises(ValueError, match="code carries"):
        encode_levels(np.zeros(code.num_message_bits + 1, np.uint8), code, outer_fill_bits(code))


def test_shape_inner_batch_passes_levels_through_and_thresholds_uniforms():
    code = _toy_code()  # uniform prior: every conditional is exactly 1/2
    level_cols = np.array([[[1, 0], [0, 1]]], dtype=np.uint8)  # (B=1, M=2, K=2)
    uniforms = np.array([[[0.3, 0.7], [0.49, 0.51]]])  # (B=1, M=2, F=2)
    v = shape_inner_batch(level_cols, code, uniforms)
    assert v.shape == (1, 2, 4)
    # fancy indexing puts the position axis first: row p, column m
    assert np.array_equal(v[0, :, [0, 3]], level_cols[0].T)
    # frozen coordinates sample 1 iff uniform < 1/2
    assert np.array_equal(v[0, :, [1, 2]], np.array([[1, 1], [0, 0]], dtype=np.uint8))


def test_channel_encode_decode_round_trip_noiseless():
    code = _rich_code()
    rng = np.random.default_rng(13)
    for seed in (0, 1):
        message = rng.integers(0, 2, size=code.num_message_bits, dtype=np.uint8)
        x, payload = concat_channel_encode(message, code, seed=seed)
        assert x.shape == (4, 4)
        ev = BinarySymmetricView(0.05).evidence(x)
        got = concat_channel_decode(ev, payload, code, phase_mode="exact")
        assert np.array_equal(got, message)
        flat = concat_channel_decode(ev.ravel(), payload, code, phase_mode="exact")
        assert np.array_equal(flat, message)


def test_channel_encode_payload_agrees_with_compression_of_the_output():
    code = _rich_code()
    rng = np.random.default_rng(14)
    message = rng.integers(0, 2, size=code.num_message_bits, dtype=np.uint8)
    x, payload = concat_channel_encode(message, code, seed=3)
    recompressed = concat_compress(x, code)
    assert np.array_equal(recompressed.inner_bits, payload.inner_bits)
    for a, b in zip(recompressed.outer_bits, payload.outer_bits):
        assert np.array_equal(a, b)


def test_channel_encode_uses_conditional_shaping_for_biased_priors():
    # with a biased prior the encoder output must follow the source law,
    # not the uniform law: check the mean density of ones
    # freeze the four lowest-entropy coordinates (3, 5, 6, 7 for p = 0.25):
    # those are the ones whose conditional sampling steers the output law
    code = ConcatCode(
        L=8,
        M=4,
        inner_frozen=FrozenSpec(N=8, idx=np.array([3, 5, 6, 7]), val=np.zeros(4, np.uint8)),
        outer_frozen=[_empty(4)] * 4,
        level_order=[0, 1, 2, 4],
        fill_seed=2,
        channel=ChannelModel(kind="bsc", p=0.05, prior_one=0.25),
    )
    rng = np.random.default_rng(15)
    ones = 0
    total = 0
    for seed in range(200):
        message = rng.integers(0, 2, size=code.num_message_bits, dtype=np.uint8)
        x, _ = concat_channel_encode(message, code, seed=seed)
        ones += int(x.sum())
        total += x.size
    density = ones / total
    # the shaped law sits within total variation 0.058 of Bernoulli(0.25),
    # so the ones-density must land near 0.25, nowhere near uniform
    assert 0.18 < density < 0.33
