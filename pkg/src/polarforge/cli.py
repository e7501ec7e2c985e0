"""Command-line driver: construction, file codec, campaigns, sweeps, probe.

Exit codes (stable): 0 success; 1 invalid configuration or arguments;
2 input/container size mismatch; 3 corrupt code file; 4 a numeric invariant
or check failed (the failing check is named on standard error).

Every command is deterministic given --seed. When --seed is absent the
POLARFORGE_SEED environment variable is used, else 0. A JSON config file
(--config) may supply any long-flag value by name; explicit flags win.
Progress goes to standard error, machine output to files or standard out.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys

import numpy as np

from .channels import ChannelModel
from .concat import decode_interleaved, message_layout, outer_fill_bits, shape_inner_batch
from .construction import ConcatCode, build_concat_code
from .polar_core import LLR_CLAMP, FrozenSpec, pack_bits, transform, unpack_bits
from .protocol import CampaignConfig, run_campaign
from .qprobe import build_states, cq_polarization_check, identity_checks

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SIZE = 2
EXIT_CORRUPT = 3
EXIT_CHECK = 4

_HEADER = struct.Struct("<Q")  # container prefix: payload length in message bits


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on bad usage (2 is reserved for size mismatch)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _env_seed() -> int:
    try:
        return int(os.environ.get("POLARFORGE_SEED", "0"))
    except ValueError:
        return 0


def _progress(msg: str) -> None:
    sys.stderr.write(msg + "\n")
    sys.stderr.flush()


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError("config file must hold a JSON object")
    return obj


def _merged(args: argparse.Namespace, key: str, default):
    """Flag value if given, else config-file value, else default."""
    v = getattr(args, key, None)
    if v is not None:
        return v
    cfg = getattr(args, "_config_obj", {})
    if key in cfg:
        return cfg[key]
    return default


def _seed_of(args) -> int:
    return int(_merged(args, "seed", _env_seed()))


def _channel_of(args) -> ChannelModel:
    spec = _merged(args, "channel", None)
    if spec is None:
        raise ValueError("a channel is required (--channel or config file)")
    if isinstance(spec, dict):
        return ChannelModel.from_obj(spec)
    return ChannelModel.parse(str(spec))


def _read_code(path: str) -> ConcatCode:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValueError(f"cannot read code file: {exc}") from exc
    return ConcatCode.from_json(text)  # raises "corrupt code file: ..." ValueError


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# construct
# ---------------------------------------------------------------------------


def cmd_construct(args) -> int:
    channel = _channel_of(args)
    L = int(_merged(args, "L", 64))
    M = int(_merged(args, "M", 64))
    rate = _merged(args, "rate", None)
    code = build_concat_code(
        channel,
        L,
        M,
        eps_inner=float(_merged(args, "eps_inner", 1e-3)),
        eps_outer=float(_merged(args, "eps_outer", 1e-3)),
        trials=int(_merged(args, "trials", 2000)),
        seed=_seed_of(args),
        rate_cap=None if rate is None else float(rate),
    )
    out = _merged(args, "out", None)
    _write_text(out, code.to_json())
    sizes = ",".join(str(s.idx.size) for s in code.outer_frozen)
    print(f"rate {code.rate:.6f}")
    print(f"inner_frozen {code.inner_frozen.idx.size} of {code.L}")
    print(f"outer_frozen [{sizes}] of {code.M} x {code.K} levels")
    return EXIT_OK


# ---------------------------------------------------------------------------
# codec
# ---------------------------------------------------------------------------


class _SizeError(ValueError):
    pass


def _payload_geometry(code: ConcatCode) -> tuple[int, int, int]:
    """Bits per chunk: message payload, channel word, disclosure record."""
    x_bits = code.M * code.L
    d_bits = code.M * code.inner_frozen.idx.size + sum(s.idx.size for s in code.outer_frozen)
    return code.num_message_bits, x_bits, d_bits


def _encode_container(data: bytes, code: ConcatCode, seed: int) -> bytes:
    k, x_bits, d_bits = _payload_geometry(code)
    total_bits = len(data) * 8
    if total_bits and k == 0:
        raise _SizeError("code carries zero message bits; cannot encode nonempty input")
    chunks = (total_bits + k - 1) // k if total_bits else 0
    out = [_HEADER.pack(total_bits)]
    if chunks == 0:
        return b"".join(out)
    bits = np.zeros(chunks * k, dtype=np.uint8)
    bits[:total_bits] = unpack_bits(data, total_bits)
    msgs = bits.reshape(chunks, k)
    ovals = outer_fill_bits(code)
    layout = message_layout(code)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    F = code.inner_frozen.idx.size
    group = max(1, (1 << 24) // max(1, code.M * code.L))
    for lo in range(0, chunks, group):
        hi = min(chunks, lo + group)
        B = hi - lo
        cols = np.empty((B, code.M, code.K), dtype=np.uint8)
        at = 0
        for j, spec in enumerate(code.outer_frozen):
            t = np.empty((B, code.M), dtype=np.uint8)
            t[:, spec.idx] = ovals[j]
            t[:, layout[j]] = msgs[lo:hi, at : at + layout[j].size]
            at += layout[j].size
            cols[:, :, j] = transform(t)
        uniforms = rng.random((B, code.M, F))
        v = shape_inner_batch(cols, code, uniforms)
        x = transform(v)
        oflat = np.concatenate([o for o in ovals if o.size] or [np.zeros(0, np.uint8)])
        for b in range(B):
            rec = np.concatenate([x[b].ravel(), v[b][:, code.inner_frozen.idx].ravel(), oflat])
            assert rec.size == x_bits + d_bits
            out.append(pack_bits(rec))
    return b"".join(out)


def _decode_container(blob: bytes, code: ConcatCode) -> bytes:
    k, x_bits, d_bits = _payload_geometry(code)
    if len(blob) < _HEADER.size:
        raise _SizeError("container shorter than its header")
    (total_bits,) = _HEADER.unpack_from(blob)
    chunks = (total_bits + k - 1) // k if total_bits else 0
    if total_bits and k == 0:
        raise _SizeError("container claims data but the code carries zero message bits")
    rec_bytes = (x_bits + d_bits + 7) // 8
    if len(blob) != _HEADER.size + chunks * rec_bytes:
        raise _SizeError(
            f"container is {len(blob)} bytes; {total_bits} bits at {rec_bytes} bytes "
            f"per record needs {_HEADER.size + chunks * rec_bytes}"
        )
    if chunks == 0:
        return b""
    F = code.inner_frozen.idx.size
    layout = message_layout(code)
    msgs = np.empty((chunks, k), dtype=np.uint8)
    group = max(1, (1 << 24) // max(1, code.M * code.L))
    for lo in range(0, chunks, group):
        hi = min(chunks, lo + group)
        B = hi - lo
        X = np.empty((B, code.M, code.L), dtype=np.uint8)
        IV = np.empty((B, code.M, F), dtype=np.uint8)
        OV = [np.empty((B, s.idx.size), dtype=np.uint8) for s in code.outer_frozen]
        for b in range(B):
            off = _HEADER.size + (lo + b) * rec_bytes
            rec = unpack_bits(blob[off : off + rec_bytes], x_bits + d_bits)
            X[b] = rec[:x_bits].reshape(code.M, code.L)
            IV[b] = rec[x_bits : x_bits + code.M * F].reshape(code.M, F)
            at = x_bits + code.M * F
            for j, spec in enumerate(code.outer_frozen):
                OV[j][b] = rec[at : at + spec.idx.size]
                at += spec.idx.size
        evidence = np.where(X == 0, LLR_CLAMP, -LLR_CLAMP).astype(np.float64)
        res = decode_interleaved(code, evidence, IV, OV, phase_mode="exact")
        at = 0
        for j in range(code.K):
            pos = layout[j]
            msgs[lo:hi, at : at + pos.size] = res["t_hat"][j][:, pos]
            at += pos.size
    flat = msgs.ravel()[:total_bits]
    return pack_bits(flat)[: (total_bits + 7) // 8]


def cmd_codec(args) -> int:
    try:
        code = _read_code(args.code)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CORRUPT if "corrupt code file" in str(exc) else EXIT_CONFIG
    try:
        with open(args.infile, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        sys.stderr.write(f"error: cannot read input: {exc}\n")
        return EXIT_CONFIG
    try:
        if args.direction == "encode":
            blob = _encode_container(data, code, _seed_of(args))
        else:
            blob = _decode_container(data, code)
    except _SizeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_SIZE
    with open(args.outfile, "wb") as fh:
        fh.write(blob)
    return EXIT_OK


# ---------------------------------------------------------------------------
# campaigns
# ---------------------------------------------------------------------------


def _campaign_config(args, mode: str, L=None, M=None) -> CampaignConfig:
    rate = _merged(args, "rate", None)
    return CampaignConfig(
        channel=_channel_of(args),
        L=int(L if L is not None else _merged(args, "L", 64)),
        M=int(M if M is not None else _merged(args, "M", 64)),
        trials=int(_merged(args, "trials", 1000)),
        seed=_seed_of(args),
        mode=mode,
        phase_mode=str(_merged(args, "phase_mode", "randomized")),
        eps_inner=float(_merged(args, "eps_inner", 1e-3)),
        eps_outer=float(_merged(args, "eps_outer", 1e-3)),
        rate_cap=None if rate is None else float(rate),
        construct_trials=int(_merged(args, "construct_trials", 2000)),
        n_samples=int(_merged(args, "n_samples", 32)),
        jobs=_merged(args, "jobs", None),
        out=_merged(args, "out", None),
        timing=bool(_merged(args, "timing", False)),
    )


def _run_one(config: CampaignConfig) -> int:
    report = run_campaign(config, progress=_progress)
    text = report.to_json(timing=config.timing)
    _write_text(config.out, text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    return _run_one(_campaign_config(args, "channel"))


def cmd_distill(args) -> int:
    return _run_one(_campaign_config(args, "distill"))


def cmd_sweep(args) -> int:
    param = str(_merged(args, "param", "L"))
    if param not in ("L", "M"):
        raise ValueError(f"sweep parameter must be L or M, got {param!r}")
    raw = _merged(args, "values", None)
    if raw is None:
        raise ValueError("sweep requires --values, e.g. --values 64,128,256")
    values = [int(v) for v in str(raw).split(",") if v]
    mode = str(_merged(args, "mode", "distill"))
    rows = ["param,value,eps1,eps2,rate,bound,trials"]
    for v in values:
        config = _campaign_config(
            args, mode, L=v if param == "L" else None, M=v if param == "M" else None
        )
        config.out = None
        _progress(f"sweep {param}={v}")
        rep = run_campaign(config, progress=_progress)
        rows.append(
            f"{param},{v},{rep.eps1_hat:.10g},{rep.eps2_hat:.10g},"
            f"{rep.rate:.10g},{rep.fidelity_bound:.10g},{rep.trials}"
        )
    _write_text(_merged(args, "out", None), "\n".join(rows) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# probe
# ---------------------------------------------------------------------------


def cmd_probe(args) -> int:
    channel = _channel_of(args)
    if channel.kind != "pauli":
        raise ValueError("the probe needs a Pauli channel (try pauli:1,0,0,0)")
    L = int(_merged(args, "L", 2))
    raw = _merged(args, "frozen", None)
    if raw is None:
        idx = np.arange(L // 2, dtype=np.int64)
    else:
        idx = np.array(sorted({int(v) for v in str(raw).split(",") if v != ""}), dtype=np.int64)
    frozen = FrozenSpec(N=L, idx=idx, val=np.zeros(idx.size, dtype=np.uint8))
    bundle = build_states(channel.pauli, L, frozen)
    ledger = identity_checks(bundle, frozen)
    pairs = int(_merged(args, "cq_pairs", 100))
    if pairs > 0:
        ledger += cq_polarization_check(pairs, _seed_of(args))
    _write_text(_merged(args, "out", None), json.dumps(ledger, indent=1) + "\n")
    bad = [e for e in ledger if not e["pass"]]
    if bad:
        sys.stderr.write(f"error: check failed: {bad[0]['check']} residual {bad[0]['residual']}\n")
        return EXIT_CHECK
    _progress(f"probe: {len(ledger)} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: _Parser, campaign: bool) -> None:
    p.add_argument("--config", help="JSON file of flag values; explicit flags override")
    p.add_argument("--channel", help='channel spec, e.g. "depolarizing:0.05", "erasure:0.1", "bsc:0.11"')
    p.add_argument("--L", type=int, help="inner block length (power of two)")
    p.add_argument("--M", type=int, help="outer block length (power of two)")
    p.add_argument("--seed", type=int, help="master seed (default env POLARFORGE_SEED, else 0)")
    p.add_argument("--out", help="output path (default standard output)")
    if campaign:
        p.add_argument("--eps-inner", dest="eps_inner", type=float, help="inner reliability target")
        p.add_argument("--eps-outer", dest="eps_outer", type=float, help="outer reliability target")
        p.add_argument("--rate", type=float, help="cap the built code's rate")
        p.add_argument("--trials", type=int, help="number of trials (or construction samples)")


def build_parser() -> _Parser:
    # subparsers inherit _Parser (argparse uses the parent's class), so bad
    # usage under any subcommand also exits 1
    top = _Parser(prog="polarforge", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build a code file")
    _add_common(p, campaign=True)
    p.set_defaults(fn=cmd_construct)

    p = sub.add_parser("codec", help="encode/decode a file through a code")
    p.add_argument("direction", choices=("encode", "decode"))
    p.add_argument("--code", required=True, help="code JSON file")
    p.add_argument("--in", dest="infile", required=True, help="input file")
    p.add_argument("--out", dest="outfile", required=True, help="output file")
    p.add_argument("--seed", type=int, help="frozen-fill sampling seed (encode)")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_codec)

    for name, fn, help_text in (
        ("simulate", cmd_simulate, "channel-coding campaign (message error rate)"),
        ("distill", cmd_distill, "distillation campaign (pattern recovery error rates)"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p, campaign=True)
        p.add_argument("--phase-mode", dest="phase_mode", choices=("exact", "randomized", "marginalized"))
        p.add_argument("--n-samples", dest="n_samples", type=int, help="marginalization sample count")
        p.add_argument("--construct-trials", dest="construct_trials", type=int)
        p.add_argument("--jobs", type=int, help="worker processes (default all cores)")
        p.add_argument("--timing", action="store_const", const=True, help="emit wall time in the report")
        p.set_defaults(fn=fn)

    p = sub.add_parser("sweep", help="campaign over a list of L or M values, CSV out")
    _add_common(p, campaign=True)
    p.add_argument("--param", choices=("L", "M"), help="which dimension to sweep (default L)")
    p.add_argument("--values", help="comma-separated values, e.g. 64,128,256")
    p.add_argument("--mode", choices=("distill", "channel"), help="campaign type (default distill)")
    p.add_argument("--phase-mode", dest="phase_mode", choices=("exact", "randomized", "marginalized"))
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--construct-trials", dest="construct_trials", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--timing", action="store_const", const=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("probe", help="exact entropy identity and cq polarization checks")
    p.add_argument("--config", help="JSON file of flag values; explicit flags override")
    p.add_argument("--channel", help='Pauli spec, e.g. "pauli:0.85,0.05,0.05,0.05"')
    p.add_argument("--L", type=int, help="sites, 1..4 (default 2)")
    p.add_argument("--frozen", help="comma-separated frozen indices (default first half)")
    p.add_argument("--cq-pairs", dest="cq_pairs", type=int, help="random cq pairs to test (default 100)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="ledger JSON path (default standard output)")
    p.set_defaults(fn=cmd_probe)

    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args._config_obj = _load_config_file(getattr(args, "config", None))
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: bad config file: {exc}\n")
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except AssertionError as exc:
        sys.stderr.write(f"error: invariant check failed: {exc}\n")
        return EXIT_CHECK
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
