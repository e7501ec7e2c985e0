"""Shared enumeration oracles.

Everything here recomputes expected values from first principles, by full
enumeration over source words or channel outputs, so the library's recursive
implementations are checked against independent arithmetic rather than
against themselves.
"""

import functools
import math

import numpy as np

from polarforge.channels import BinarySymmetricView
from polarforge.concat import concat_compress, decode_interleaved
from polarforge.polar_core import transform


def all_words(n: int) -> np.ndarray:
    """All 2^n bit patterns as rows of a (2^n, n) uint8 array, big-endian."""
    span = np.arange(1 << n, dtype=np.int64)
    return ((span[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1).astype(np.uint8)


@functools.lru_cache(maxsize=None)
def word_tables(n: int):
    """(words, transform(words)) for all 2^n inputs; cached, do not mutate."""
    words = all_words(n)
    return words, transform(words)


def _lse(v: np.ndarray) -> float:
    m = float(np.max(v))
    return m + math.log(float(np.exp(v - m).sum()))


def enum_step_llr(ev: np.ndarray, committed, i: int) -> float:
    """Exact sequential-decision LLR at index i, by full enumeration.

    Fixes u_0..u_{i-1} = committed, marginalizes every later coordinate
    uniformly. With per-position evidence LLRs the word log-likelihood is
    log P(y|x) = const - x.ev, so the answer is a difference of two
    log-sum-exp sums over the futures of u_i = 0 and u_i = 1.
    """
    ev = np.asarray(ev, dtype=np.float64)
    n = ev.size
    _, codewords = word_tables(n)
    scores = -(codewords.astype(np.float64) @ ev)
    prefix = 0
    for b in committed:
        prefix = (prefix << 1) | int(b)
    lo = prefix << (n - i)
    half = 1 << (n - i - 1)
    return _lse(scores[lo : lo + half]) - _lse(scores[lo + half : lo + 2 * half])


def exact_genie_error_probs(crossover: float, n: int) -> np.ndarray:
    """Exact per-index genie decision-error probabilities over BSC(crossover).

    Uniform source; enumerate every (word, output) pair. For each output y
    and committed prefix, the decision takes the heavier of the two posterior
    masses (exact tie decides 0) and the error contribution is the mass on
    the losing side.
    """
    words, codewords = word_tables(n)
    probs = np.zeros(n)
    for y in words:
        d = (codewords ^ y[None, :]).sum(axis=1)
        w = (1.0 - crossover) ** (n - d) * crossover**d  # P(y | codeword)
        for i in range(n):
            s = w.reshape(1 << i, 2, -1).sum(axis=2)
            pick_one = s[:, 1] > s[:, 0]
            probs[i] += float(np.where(pick_one, s[:, 0], s[:, 1]).sum())
    return probs * 2.0**-n


def payload_key(payload) -> bytes:
    inner = b"" if payload.inner_bits is None else np.asarray(payload.inner_bits, np.uint8).tobytes()
    outer = b"/".join(np.asarray(o, np.uint8).tobytes() for o in payload.outer_bits)
    return inner + b"|" + outer


def payload_kernel(code) -> np.ndarray:
    """Every source word whose payload is all-zero.

    The compression map is linear over GF(2), so x's maximum-likelihood
    ambiguity class is exactly x xor this set.
    """
    words = all_words(code.N)
    zero = payload_key(concat_compress(np.zeros(code.N, np.uint8), code))
    rows = [w for w in words if payload_key(concat_compress(w, code)) == zero]
    kernel = np.stack(rows)
    assert kernel.shape[0] & (kernel.shape[0] - 1) == 0, "kernel size must be a power of two"
    return kernel


def batched_payloads(x_blocks: np.ndarray, code):
    """Vectorized compression of a (T, M, L) batch.

    Returns the inner disclosed tensor (T, M, F) and the per-level outer
    value arrays (T, |O_j|), matching concat_compress row by row.
    """
    v = transform(x_blocks)
    inner_vals = np.ascontiguousarray(v[:, :, code.inner_frozen.idx])
    outer_vals = []
    for j, k in enumerate(code.level_order):
        t = transform(np.ascontiguousarray(v[:, :, k]))
        outer_vals.append(np.ascontiguousarray(t[:, code.outer_frozen[j].idx]))
    return inner_vals, outer_vals


def map_agreement_fraction(code, crossover: float, trials: int, seed: int) -> float:
    """Fraction of noisy trials where the interleaved decoder's output is a
    maximum-likelihood word among all words sharing the true payload."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = code.N
    x = rng.integers(0, 2, size=(trials, n), dtype=np.uint8)
    y = x ^ (rng.random((trials, n)) < crossover)
    ev = BinarySymmetricView(crossover).evidence(y)
    xb = x.reshape(trials, code.M, code.L)
    inner_vals, outer_vals = batched_payloads(xb, code)
    for t in range(min(4, trials)):  # spot-check against the reference compressor
        ref = concat_compress(x[t], code)
        assert np.array_equal(ref.inner_bits, inner_vals[t])
        assert all(np.array_equal(ref.outer_bits[j], outer_vals[j][t]) for j in range(code.K))
    out = decode_interleaved(
        code, ev.reshape(trials, code.M, code.L), inner_vals, outer_vals, phase_mode="exact"
    )
    x_hat = out["x_hat"].reshape(trials, n)
    kernel = payload_kernel(code)
    cand = (x[:, None, :] ^ kernel[None, :, :]).astype(np.float64)
    best = (-np.einsum("tkn,tn->tk", cand, ev)).max(axis=1)
    got = -np.einsum("tn,tn->t", x_hat.astype(np.float64), ev)
    return float((got >= best - 1e-9).mean())
