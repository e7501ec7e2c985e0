"""Channel models, their binary reductions, and closed-form figures of merit.

The two-qubit-error channels in scope are diagonal in the Pauli basis, so a
classical simulation only ever needs the pair (e_x, e_z) of flip indicators
per position: e_x flips the amplitude (computational-basis) observation and
e_z flips the phase-basis observation. The joint law of that pair is the full
content of the channel for every protocol in this package:

    P(e_x=0, e_z=0) = p_i    P(e_x=1, e_z=0) = p_x
    P(e_x=1, e_z=1) = p_y    P(e_x=0, e_z=1) = p_z

Erasure channels are modeled by a single flag per position that wipes both
observations at once.

Two reductions drive the decoders. The amplitude view is the marginal of
e_x: a binary symmetric channel with crossover p_x + p_y. The phase view is
e_z conditioned on the amplitude error pattern (available after the first
decoding stage): a position-dependent crossover r_0 = p_z / (p_i + p_z)
where e_x = 0 and r_1 = p_y / (p_x + p_y) where e_x = 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .polar_core import LLR_CLAMP, prob_one_to_llr

# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliParams:
    """Pauli channel probabilities (identity, bit flip, both, phase flip)."""

    p_i: float
    p_x: float
    p_y: float
    p_z: float

    def __post_init__(self):
        vec = (self.p_i, self.p_x, self.p_y, self.p_z)
        if any(p < 0 for p in vec):
            raise ValueError(f"negative probability in {vec}")
        if abs(sum(vec) - 1.0) > 1e-9:
            raise ValueError(f"Pauli probabilities must sum to 1, got {sum(vec)!r}")

    @staticmethod
    def depolarizing(p: float) -> "PauliParams":
        """Uniform non-identity weight p split over X, Y, Z."""
        return PauliParams(1.0 - p, p / 3.0, p / 3.0, p / 3.0)

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.p_i, self.p_x, self.p_y, self.p_z])


@dataclass(frozen=True)
class ErasureParams:
    """Symmetric erasure with probability p per position."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"erasure probability must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class BinarySymmetricView:
    """Amplitude-stage reduction: BSC(crossover) with an input prior.

    ``prior_one`` is the probability that the underlying bit is 1; it folds
    into the leaf LLR additively (exact for product sources).
    """

    crossover: float
    prior_one: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.crossover <= 1.0:
            raise ValueError(f"crossover must be in [0, 1], got {self.crossover}")
        if not 0.0 < self.prior_one < 1.0:
            raise ValueError(f"prior must be in (0, 1), got {self.prior_one}")

    def channel_llr_magnitude(self) -> float:
        """log((1-q)/q), clamped; the per-observation evidence weight."""
        return float(prob_one_to_llr(self.crossover))

    def evidence(self, observed: np.ndarray, erased: np.ndarray | None = None) -> np.ndarray:
        """Leaf LLRs for observed bits; erased positions carry prior only."""
        c = self.channel_llr_magnitude()
        prior = float(prob_one_to_llr(self.prior_one))
        llr = np.where(np.asarray(observed, dtype=bool), -c, c) + prior
        if erased is not None:
            llr = np.where(np.asarray(erased, dtype=bool), prior, llr)
        return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)


@dataclass(frozen=True)
class ConditionalPhaseView:
    """Phase-stage reduction: crossover depends on the recovered e_x bit."""

    r0: float  # crossover where the (estimated) amplitude error is 0
    r1: float  # crossover where it is 1

    def __post_init__(self):
        for r in (self.r0, self.r1):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"crossover must be in [0, 1], got {r}")

    def evidence(self, observed: np.ndarray, e_x: np.ndarray) -> np.ndarray:
        """Leaf LLRs for phase observations given the amplitude pattern.

        A crossover of exactly 1/2 yields LLR 0 (the observation carries no
        phase information at that position); 0 or 1 saturate at the clamp.
        """
        c = np.where(np.asarray(e_x, dtype=bool), prob_one_to_llr(self.r1), prob_one_to_llr(self.r0))
        llr = np.where(np.asarray(observed, dtype=bool), -c, c)
        return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)


# ---------------------------------------------------------------------------
# channel model wrapper + JSON wire format
# ---------------------------------------------------------------------------

_KINDS = ("pauli", "erasure", "bsc", "bec")


@dataclass(frozen=True)
class ChannelModel:
    """Tagged channel description matching the JSON wire format.

    kinds: "pauli" (params: PauliParams), "erasure" (ErasureParams),
    "bsc" / "bec" (classical single-layer channels; ``prior_one`` is the
    source bit bias, relevant for compression and shaping).
    """

    kind: str
    pauli: PauliParams | None = None
    p: float | None = None
    prior_one: float = 0.5

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind == "pauli" and self.pauli is None:
            raise ValueError("pauli channel needs PauliParams")
        if self.kind != "pauli" and self.p is None:
            raise ValueError(f"{self.kind} channel needs a scalar parameter")

    def to_obj(self) -> dict:
        if self.kind == "pauli":
            v = self.pauli
            return {"kind": "pauli", "p": [v.p_i, v.p_x, v.p_y, v.p_z]}
        obj = {"kind": self.kind, "p": self.p}
        if self.kind in ("bsc", "bec") and self.prior_one != 0.5:
            obj["prior"] = self.prior_one
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), separators=(",", ":"))

    @staticmethod
    def from_obj(obj: dict) -> "ChannelModel":
        kind = obj.get("kind")
        if kind == "pauli":
            p = obj["p"]
            if len(p) != 4:
                raise ValueError("pauli channel needs 4 probabilities")
            return ChannelModel(kind="pauli", pauli=PauliParams(*[float(x) for x in p]))
        if kind in ("erasure", "bsc", "bec"):
            return ChannelModel(kind=kind, p=float(obj["p"]), prior_one=float(obj.get("prior", 0.5)))
        raise ValueError(f"unknown channel kind {kind!r}")

    @staticmethod
    def from_json(text: str) -> "ChannelModel":
        return ChannelModel.from_obj(json.loads(text))

    @staticmethod
    def parse(spec: str) -> "ChannelModel":
        """Parse compact CLI syntax: 'depolarizing:0.05', 'pauli:a,b,c,d',
        'erasure:0.1', 'bsc:0.05', 'bec:0.3', or a path to a JSON file."""
        if ":" in spec:
            kind, _, arg = spec.partition(":")
            if kind == "depolarizing":
                return ChannelModel(kind="pauli", pauli=PauliParams.depolarizing(float(arg)))
            if kind == "pauli":
                vals = [float(x) for x in arg.split(",")]
                return ChannelModel(kind="pauli", pauli=PauliParams(*vals))
            if kind in ("erasure", "bsc", "bec"):
                return ChannelModel(kind=kind, p=float(arg))
        with open(spec, "r", encoding="utf-8") as fh:
            return ChannelModel.from_obj(json.load(fh))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_pauli(params: PauliParams, shape, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw correlated flip indicators (e_x, e_z), each uint8 of ``shape``.

    The pair is drawn jointly; marginals alone would miss the X/Z
    correlation that the conditional phase view exploits (for depolarizing
    noise, knowing e_x = 1 leaves Z vs Y equally likely, r1 = 1/2).
    """
    u = rng.random(shape)
    v = params.vec
    # cumulative bins in (i, x, y, z) order
    c1, c2, c3 = v[0], v[0] + v[1], v[0] + v[1] + v[2]
    sym = (u >= c1).astype(np.uint8) + (u >= c2).astype(np.uint8) + (u >= c3).astype(np.uint8)
    e_x = ((sym == 1) | (sym == 2)).astype(np.uint8)  # X or Y
    e_z = ((sym == 2) | (sym == 3)).astype(np.uint8)  # Y or Z
    return e_x, e_z


def sample_erasure(params: ErasureParams, shape, rng: np.random.Generator) -> np.ndarray:
    """Draw erasure flags (1 = erased), uint8 of ``shape``.

    One flag per position: a flagged position erases both the amplitude and
    the phase observation downstream.
    """
    return (rng.random(shape) < params.p).astype(np.uint8)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def amplitude_view(params: PauliParams, prior_one: float = 0.5) -> BinarySymmetricView:
    """Marginal bit-flip channel seen by the amplitude stage: BSC(p_x + p_y)."""
    return BinarySymmetricView(crossover=params.p_x + params.p_y, prior_one=prior_one)


def phase_view(params: PauliParams) -> ConditionalPhaseView:
    """Phase-flip channel conditioned on the amplitude error at each position.

    r0 = p_z / (p_i + p_z) where e_x = 0, r1 = p_y / (p_x + p_y) where
    e_x = 1. A degenerate conditional (conditioning event has probability 0)
    yields crossover 0 by convention; it is never sampled.
    """
    d0 = params.p_i + params.p_z
    d1 = params.p_x + params.p_y
    r0 = params.p_z / d0 if d0 > 0 else 0.0
    r1 = params.p_y / d1 if d1 > 0 else 0.0
    return ConditionalPhaseView(r0=r0, r1=r1)


# ---------------------------------------------------------------------------
# closed-form metrics
# ---------------------------------------------------------------------------


def entropy_bits(p: np.ndarray) -> float:
    """Shannon entropy in bits of a probability vector (0 log 0 = 0)."""
    p = np.asarray(p, dtype=np.float64).ravel()
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def binary_entropy(q: float) -> float:
    return entropy_bits(np.array([q, 1.0 - q]))


def closed_form_metrics(model: ChannelModel) -> dict:
    """Analytic figures of merit for a channel model.

    Returns a dict with:

    h_amp
        Input uncertainty left by the amplitude-stage view at uniform
        input: binary entropy of the flip rate for a flip channel, p for
        an erasure (each erased position loses one full bit).
    h_phase_given_amp
        Residual phase uncertainty once the amplitude error pattern is
        known: H(e_x, e_z) - H(e_x) for Pauli channels. Classical kinds
        have no phase layer; the value is 0.
    coherent_info
        The two-stage net rate target: 1 - H(joint flips) for Pauli,
        1 - 2p for erasure. For the classical kinds this slot carries the
        plain symmetric capacity (1 - h(q) for bsc, 1 - p for bec) so rate
        reports stay meaningful.
    z_param
        Bhattacharyya parameter of the amplitude-stage binary channel:
        2 sqrt(q (1-q)) for a flip channel, p for an erasure.
    """
    if model.kind == "pauli":
        pv = model.pauli
        q = pv.p_x + pv.p_y
        h_joint = entropy_bits(pv.vec)
        h_amp = binary_entropy(q)
        return {
            "h_amp": h_amp,
            "h_phase_given_amp": h_joint - h_amp,
            "coherent_info": 1.0 - h_joint,
            "z_param": 2.0 * float(np.sqrt(q * (1.0 - q))),
        }
    if model.kind == "erasure":
        p = model.p
        return {
            "h_amp": p,
            "h_phase_given_amp": p,  # erased positions lose one full phase bit each
            "coherent_info": 1.0 - 2.0 * p,
            "z_param": p,
        }
    if model.kind == "bsc":
        q = model.p
        return {
            "h_amp": binary_entropy(q),
            "h_phase_given_amp": 0.0,
            "coherent_info": 1.0 - binary_entropy(q),
            "z_param": 2.0 * float(np.sqrt(q * (1.0 - q))),
        }
    # bec
    p = model.p
    return {
        "h_amp": p,
        "h_phase_given_amp": 0.0,
        "coherent_info": 1.0 - p,
        "z_param": p,
    }
