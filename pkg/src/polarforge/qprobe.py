"""Exact dense-matrix entropy checks at L <= 4.

This module is an oracle, not a production path: it builds the exact pure
states a Pauli channel induces on (system, receiver, environment), applies
the polar transform as a computational-basis relabeling, and verifies the
entropy identities the rest of the package relies on, by Hermitian
eigendecomposition. Everything is in bits (log base 2).

State conventions. Per site, a maximally mixed qubit is purified and sent
through the Pauli channel with the canonical dilation: the environment holds
an orthonormal four-flag register weighted by sqrt(p_sigma),

    phi_z[b, e] = sqrt(p_e) * (sigma_e |z>)_b,    e in {I, X, Y, Z}.

Three states per bundle: the single-site psi (A,B,E), the single-site
psi_prime (A,B,C,E) whose C register copies the amplitude basis, and the
L-site Psi3_prime whose A register is relabeled by the transform and split
into the non-frozen (A_bar) and frozen (A_bar^c) index groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelModel, PauliParams, closed_form_metrics
from .polar_core import FrozenSpec, int_to_bits, transform

_EIG_TOL = 1e-12

PAULI_MATS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)


# ---------------------------------------------------------------------------
# state construction
# ---------------------------------------------------------------------------


@dataclass
class StateBundle:
    """Exact pure states for one (params, L, frozen) configuration."""

    psi: np.ndarray  # (2, 2, 4): A, B, E
    psi_prime: np.ndarray  # (2, 2, 2, 4): A, B, C, E
    psi3_prime: np.ndarray  # (2^|Abar|, 2^|Abarc|, 2^L, 2^L, 4^L)
    dims: dict
    params: PauliParams
    L: int
    frozen: FrozenSpec


def _site_vectors(params: PauliParams) -> np.ndarray:
    """phi[z] of shape (2, 4): the per-site B,E purification branches."""
    amps = np.sqrt(params.vec)
    phi = np.empty((2, 2, 4), dtype=np.complex128)
    for z in (0, 1):
        for e in range(4):
            phi[z, :, e] = amps[e] * PAULI_MATS[e][:, z]
    return phi


def build_states(params: PauliParams, L: int, frozen: FrozenSpec) -> StateBundle:
    """Construct psi, psi_prime, and the L-site transformed Psi3_prime.

    The A register of the L-site state is indexed by u = transform(z) and
    its bit axes are regrouped into (non-frozen, frozen) per ``frozen``.
    Norms are asserted to 1e-12. L > 4 is rejected (2^(5L) amplitudes).
    """
    if not 1 <= L <= 4:
        raise ValueError(f"probe states are exact dense tensors; L={L} out of range 1..4")
    if frozen.N != L:
        raise ValueError("frozen spec does not match L")
    phi = _site_vectors(params)
    half = np.sqrt(0.5)
    psi = np.stack([half * phi[0], half * phi[1]])  # (A, B, E)
    psi_prime = np.zeros((2, 2, 2, 4), dtype=np.complex128)
    for z in (0, 1):
        psi_prime[z, :, z, :] = half * phi[z]
    dA, dB, dE = 1 << L, 1 << L, 1 << (2 * L)
    full = np.zeros((dA, dB, dA, dE), dtype=np.complex128)  # (A=u, B, C=z, E)
    amp = np.sqrt(1.0 / dA)
    for z in range(dA):
        zb = int_to_bits(z, L)
        u_bits = transform(zb)
        u = 0
        for b in u_bits:
            u = (u << 1) | int(b)
        site = phi[zb[0]]
        for i in range(1, L):
            site = np.einsum("be,cf->bcef", site, phi[zb[i]]).reshape(
                1 << (i + 1), 1 << (2 * (i + 1))
            )
        full[u, :, z, :] = amp * site
    # regroup the A bit axes into (non-frozen..., frozen...)
    fmask = frozen.mask
    order = [i for i in range(L) if not fmask[i]] + [i for i in range(L) if fmask[i]]
    t = full.reshape((2,) * L + (dB, dA, dE))
    t = np.transpose(t, tuple(order) + (L, L + 1, L + 2))
    n_bar = L - frozen.idx.size
    psi3 = np.ascontiguousarray(t.reshape(1 << n_bar, 1 << (L - n_bar), dB, dA, dE))
    for name, vec in (("psi", psi), ("psi_prime", psi_prime), ("psi3_prime", psi3)):
        norm = float(np.linalg.norm(vec.ravel()))
        if abs(norm - 1.0) > 1e-12:
            raise AssertionError(f"{name} norm {norm} deviates from 1")
    dims = {
        "A_bar": 1 << n_bar,
        "A_barc": 1 << (L - n_bar),
        "B": dB,
        "C": dA,
        "E": dE,
    }
    return StateBundle(
        psi=psi, psi_prime=psi_prime, psi3_prime=psi3, dims=dims, params=params, L=L, frozen=frozen
    )


# ---------------------------------------------------------------------------
# entropy primitives
# ---------------------------------------------------------------------------


def _spectrum_entropy(w: np.ndarray) -> float:
    w = w[w > _EIG_TOL]
    return float(-(w * np.log2(w)).sum())


def _gram_spectrum(mat: np.ndarray) -> np.ndarray:
    """Nonzero spectrum of mat @ mat^dagger via the smaller Gram side."""
    rows, cols = mat.shape
    if rows <= cols:
        g = mat @ mat.conj().T
    else:
        g = mat.conj().T @ mat
    g = 0.5 * (g + g.conj().T)
    return np.linalg.eigvalsh(g)


def subsystem_entropy(vec: np.ndarray, keep: tuple[int, ...]) -> float:
    """Von Neumann entropy of the reduced state on ``keep`` axes of a pure state."""
    keep = tuple(keep)
    rest = tuple(i for i in range(vec.ndim) if i not in keep)
    a = np.transpose(vec, keep + rest).reshape(
        int(np.prod([vec.shape[i] for i in keep], dtype=np.int64)), -1
    )
    return _spectrum_entropy(_gram_spectrum(a))


def measured_joint_entropy(vec: np.ndarray, classical: tuple[int, ...], keep: tuple[int, ...]) -> float:
    """H(classical register, kept quantum part) after a computational-basis
    measurement of the ``classical`` axes; all other axes traced out.

    The post-measurement state is block diagonal over the classical
    outcomes, so the joint spectrum is the union of per-outcome Gram
    spectra (unnormalized by the outcome probabilities).
    """
    classical = tuple(classical)
    keep = tuple(keep)
    rest = tuple(i for i in range(vec.ndim) if i not in classical and i not in keep)
    a = np.transpose(vec, classical + keep + rest)
    dC = int(np.prod([vec.shape[i] for i in classical], dtype=np.int64))
    dK = int(np.prod([vec.shape[i] for i in keep], dtype=np.int64))
    a = a.reshape(dC, dK, -1)
    spectra = [_gram_spectrum(a[c]) for c in range(dC)]
    return _spectrum_entropy(np.concatenate(spectra))


def _hadamard_axis(vec: np.ndarray, axis: int) -> np.ndarray:
    h = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
    return np.moveaxis(np.tensordot(h, np.moveaxis(vec, axis, 0), axes=(1, 0)), 0, axis)


# ---------------------------------------------------------------------------
# reports and identity checks
# ---------------------------------------------------------------------------


def _single_site_entropies(bundle: StateBundle) -> dict:
    psi, psip = bundle.psi, bundle.psi_prime
    h_b = subsystem_entropy(psi, (1,))
    out = {
        "H_A_B": subsystem_entropy(psi, (0, 1)) - h_b,
        "H_ZA_B": measured_joint_entropy(psi, (0,), (1,)) - h_b,
        "H_ZA_E": measured_joint_entropy(psip, (0,), (3,)) - subsystem_entropy(psip, (3,)),
        "H_A_BC": subsystem_entropy(psip, (0, 1, 2)) - subsystem_entropy(psip, (1, 2)),
    }
    psix = _hadamard_axis(psip, 0)
    out["H_XA_BC"] = measured_joint_entropy(psix, (0,), (1, 2)) - subsystem_entropy(psix, (1, 2))
    return out


def entropy_report(bundle: StateBundle, frozen: FrozenSpec) -> dict:
    """Exact entropies: single-site H(A|B), H(Z^A|B), H(X^A|BC), and the
    block-level H(Z^{frozen}|E^L) and coherent information -H(A_bar|B^L C^L)."""
    if frozen.idx.shape != bundle.frozen.idx.shape or np.any(frozen.idx != bundle.frozen.idx):
        raise ValueError("bundle was built for a different frozen split")
    s = _single_site_entropies(bundle)
    p3 = bundle.psi3_prime  # axes: A_bar, A_barc, B, C, E
    h_bc = subsystem_entropy(p3, (2, 3))
    h_abc = subsystem_entropy(p3, (0, 2, 3))
    h_zbarc_e = measured_joint_entropy(p3, (1,), (4,)) - subsystem_entropy(p3, (4,))
    return {
        "H_AB": s["H_A_B"],
        "H_ZA_B": s["H_ZA_B"],
        "H_XA_BC": s["H_XA_BC"],
        "H_Zbarc_E": h_zbarc_e,
        "coh_inf_block": -(h_abc - h_bc),
    }


def identity_checks(bundle: StateBundle, frozen: FrozenSpec, tolerance: float = 1e-9) -> list[dict]:
    """Numeric verification of the four entropy identities.

    (i)  amplitude-certain states: H(X^A|BC) = 1 + H(A|BC) on psi_prime;
    (ii) uncertainty duality: H(Z^A|E) + H(X^A|BC) = 1 on psi_prime;
    (iii) chain: 1 - H(Z^A|B) - H(X^A|BC) = -H(A|B);
    (iv) block rate decomposition: -H(A_bar|B^L C^L) =
         -L*H(A|B) + L*H(Z^A|B) - H(Z^{frozen}|E^L).

    Returns one {check, residual, tolerance, pass} entry per identity.
    """
    s = _single_site_entropies(bundle)
    rep = entropy_report(bundle, frozen)
    L = bundle.L
    checks = [
        ("amplitude_certain_shift", s["H_XA_BC"] - (1.0 + s["H_A_BC"])),
        ("z_x_duality", s["H_ZA_E"] + s["H_XA_BC"] - 1.0),
        ("chain_rule_rate", (1.0 - s["H_ZA_B"] - s["H_XA_BC"]) - (-s["H_A_B"])),
        (
            "block_rate_decomposition",
            rep["coh_inf_block"] - (-L * s["H_A_B"] + L * s["H_ZA_B"] - rep["H_Zbarc_E"]),
        ),
    ]
    return [
        {"check": name, "residual": abs(float(r)), "tolerance": tolerance, "pass": abs(float(r)) <= tolerance}
        for name, r in checks
    ]


# ---------------------------------------------------------------------------
# cq polarization checks
# ---------------------------------------------------------------------------


@dataclass
class CqPair:
    """Classical-quantum binary ensemble: P(x) = p_x, conditional state rho_x."""

    p0: float
    p1: float
    rho0: np.ndarray
    rho1: np.ndarray

    def __post_init__(self):
        if abs(self.p0 + self.p1 - 1.0) > 1e-10:
            raise ValueError("probabilities must sum to 1")
        for rho in (self.rho0, self.rho1):
            if np.abs(rho - rho.conj().T).max() > 1e-10:
                raise ValueError("rho must be Hermitian")
            w = np.linalg.eigvalsh(rho)
            if w.min() < -1e-10 or abs(w.sum() - 1.0) > 1e-10:
                raise ValueError("rho must be PSD with unit trace")


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho0: np.ndarray, rho1: np.ndarray) -> float:
    """F = || sqrt(rho0) sqrt(rho1) ||_1 (trace norm of the root overlap)."""
    m = _sqrtm_psd(rho0) @ _sqrtm_psd(rho1)
    return float(np.linalg.svd(m, compute_uv=False).sum())


def trace_norm(m: np.ndarray) -> float:
    return float(np.linalg.svd(m, compute_uv=False).sum())


def z_parameter(pair: CqPair) -> float:
    """Z = 2 sqrt(p0 p1) F(rho0, rho1)."""
    return 2.0 * float(np.sqrt(pair.p0 * pair.p1)) * fidelity(pair.rho0, pair.rho1)


def error_probability(pair: CqPair) -> float:
    """Optimal guessing error: 1/2 (1 - || p0 rho0 - p1 rho1 ||_1)."""
    return 0.5 * (1.0 - trace_norm(pair.p0 * pair.rho0 - pair.p1 * pair.rho1))


def conditional_entropy_xb(pair: CqPair) -> float:
    """H(X|B) of the cq state in bits."""
    h_xb = _spectrum_entropy(
        np.concatenate(
            [
                pair.p0 * np.clip(np.linalg.eigvalsh(pair.rho0), 0, None),
                pair.p1 * np.clip(np.linalg.eigvalsh(pair.rho1), 0, None),
            ]
        )
    )
    avg = pair.p0 * pair.rho0 + pair.p1 * pair.rho1
    return h_xb - _spectrum_entropy(np.clip(np.linalg.eigvalsh(avg), 0, None))


def polarization_step(pair: CqPair) -> tuple[CqPair, CqPair]:
    """One butterfly on two i.i.d. uses: the degraded (minus) and upgraded
    (plus) synthetic cq channels.

    minus: U1 against B1 B2 (U2 marginalized);
    plus:  U2 against B1 B2 and the classical copy of U1 (block diagonal).
    """
    p = np.array([pair.p0, pair.p1])
    rho = [pair.rho0, pair.rho1]
    d = pair.rho0.shape[0]
    q = np.empty(2)
    minus = []
    for u1 in (0, 1):
        acc = np.zeros((d * d, d * d), dtype=np.complex128)
        w = 0.0
        for u2 in (0, 1):
            pw = p[u1 ^ u2] * p[u2]
            acc += pw * np.kron(rho[u1 ^ u2], rho[u2])
            w += pw
        q[u1] = w
        minus.append(acc / w)
    plus = []
    for u2 in (0, 1):
        blocks = []
        for u1 in (0, 1):
            blocks.append(p[u1 ^ u2] * np.kron(rho[u1 ^ u2], rho[u2]))
        top = np.zeros((2 * d * d, 2 * d * d), dtype=np.complex128)
        top[: d * d, : d * d] = blocks[0]
        top[d * d :, d * d :] = blocks[1]
        plus.append(top)
    w_minus = CqPair(p0=float(q[0]), p1=float(q[1]), rho0=minus[0], rho1=minus[1])
    w_plus = CqPair(p0=float(p[0]), p1=float(p[1]), rho0=plus[0], rho1=plus[1])
    return w_minus, w_plus


def random_cq_pair(rng: np.random.Generator, dim: int = 2) -> CqPair:
    """Random qubit-output cq pair: Ginibre-induced states, uniform-ish prior."""
    p0 = float(rng.uniform(0.05, 0.95))
    rhos = []
    for _ in range(2):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = g @ g.conj().T
        rhos.append(rho / np.trace(rho).real)
    return CqPair(p0=p0, p1=1.0 - p0, rho0=rhos[0], rho1=rhos[1])


def cq_polarization_check(n_channels: int, seed: int, tolerance: float = 1e-9) -> list[dict]:
    """Sample random cq pairs and verify the polarization and bound suite.

    Per pair: Z+ = Z^2 (exact), Z- <= 2Z - Z^2; 2 P_e <= Z <=
    sqrt(1 - (1 - 2 P_e)^2); and the entropy sandwich
    1 - log2(1 + sqrt(1 - Z^2)) <= H(X|B) <= h_b(Z/2).
    Returns one ledger entry per (pair, inequality).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ledger = []

    def add(name, residual, i):
        ledger.append(
            {
                "check": f"{name}[{i}]",
                "residual": float(residual),
                "tolerance": tolerance,
                "pass": bool(residual <= tolerance),
            }
        )

    for i in range(n_channels):
        pair = random_cq_pair(rng)
        z = z_parameter(pair)
        wm, wp = polarization_step(pair)
        zp, zm = z_parameter(wp), z_parameter(wm)
        add("z_plus_squares", abs(zp - z * z), i)
        add("z_minus_bound", max(0.0, zm - (2 * z - z * z)), i)
        pe = error_probability(pair)
        add("pe_lower", max(0.0, 2 * pe - z), i)
        add("pe_upper", max(0.0, z - np.sqrt(max(0.0, 1.0 - (1.0 - 2 * pe) ** 2))), i)
        h = conditional_entropy_xb(pair)
        lo = 1.0 - np.log2(1.0 + np.sqrt(max(0.0, 1.0 - z * z)))
        hb = 0.0
        if 0.0 < z / 2.0 < 1.0:
            t = z / 2.0
            hb = float(-t * np.log2(t) - (1 - t) * np.log2(1 - t))
        add("entropy_sandwich_lower", max(0.0, lo - h), i)
        add("entropy_sandwich_upper", max(0.0, h - hb), i)
    return ledger


def probe_channel(model: ChannelModel, L: int, frozen: FrozenSpec) -> dict:
    """Bundle + reports for one channel: the cross-validation entry point.

    Also emits the closed-form amplitude/phase entropies so callers can
    check H(Z^A|B) == h_amp and H(X^A|BC) == h_phase_given_amp directly.
    """
    if model.kind != "pauli":
        raise ValueError("probe states are defined for Pauli channels")
    bundle = build_states(model.pauli, L, frozen)
    rep = entropy_report(bundle, frozen)
    checks = identity_checks(bundle, frozen)
    cf = closed_form_metrics(model)
    return {"bundle": bundle, "entropies": rep, "checks": checks, "closed_form": cf}
