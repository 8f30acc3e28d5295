"""Command-line surface: construct, encode, decode, simulate, sweep, analyze.

Exit codes: 0 success, 2 usage error, 3 infeasible construction,
4 data/format error. Every output file is accompanied by a
<name>.manifest.json capturing the resolved configuration.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .channel import derate_match, ebn0_to_esn0
from .codec import (
    CRC8,
    CRC16,
    DecoderConfig,
    ca_generator,
    encode_batch,
    pc_generator,
    scl_decode,
)
from .construction import (
    Allocation,
    GaConfig,
    RateMatchPattern,
    brs_pattern,
    ca_allocation,
    ga_reliability,
    no_rate_matching,
    pw_sequence,
    pw_weights,
    qup_pattern,
    select_allocation,
)
from .core import CodeSpec, InfeasibleConstructionError
from .analysis import (
    EnumerationTooLargeError,
    calibrate_snr_for_fer,
    coset_spectrum,
    error_pattern_stats,
    min_codeword_weight,
)
from .sim import (
    SCHEMES,
    ExperimentConfig,
    StopRule,
    format_float,
    sweep_bler,
    sweep_required_snr,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_DATA = 4


class DataFormatError(ValueError):
    pass


def _die(code: int, msg: str):
    print(f"pcpolar: error: {msg}", file=sys.stderr)
    raise SystemExit(code)


def _write_manifest(out_path: str, command: str, config: dict):
    manifest = {
        "command": command,
        "config": config,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": [out_path],
    }
    with open(out_path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _check_resume_manifest(out_path: str, command: str, config: dict):
    path = out_path + ".manifest.json"
    if not (os.path.exists(out_path) and os.path.exists(path)):
        return
    with open(path) as fh:
        old = json.load(fh)
    if old.get("config") != config or old.get("command") != command:
        raise DataFormatError(
            f"{out_path} exists with a different configuration; "
            "remove it or change the output path"
        )


def _load_config_file(path: str) -> dict:
    """Flat key=value or JSON config file."""
    text = open(path).read()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        out = {}
        for ln, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataFormatError(f"{path}:{ln}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
        return out


# ---------------------------------------------------------------------------
# construct
# ---------------------------------------------------------------------------


def _build_pattern(spec: CodeSpec, rate_match: str) -> RateMatchPattern:
    if rate_match == "brs":
        return brs_pattern(spec)
    if rate_match == "qup":
        return qup_pattern(spec)
    if rate_match == "none":
        if spec.M != spec.N:
            raise InfeasibleConstructionError("--rate-match none requires M == N")
        return no_rate_matching(spec.N)
    raise ValueError(rate_match)


def _construct(args) -> dict:
    spec = CodeSpec.from_KM(args.K, args.M)
    if spec.N != args.N:
        raise InfeasibleConstructionError(
            f"--N {args.N} inconsistent with M={args.M} (mother length {spec.N})"
        )
    pattern = _build_pattern(spec, args.rate_match)
    if args.scheme == "pc":
        alloc = select_allocation(spec, pw_sequence(spec.N), pattern, args.alpha)
    else:
        if args.rate_match == "qup":
            rel = ga_reliability(spec, GaConfig(args.ga_snr), pattern)
        else:
            rel = pw_weights(spec.N)
        alloc = ca_allocation(spec, rel, pattern, args.crc)
    doc = alloc.to_dict()
    doc.update(
        {
            "M": spec.M,
            "K": spec.K,
            "scheme": args.scheme,
            "crc_len": args.crc if args.scheme == "ca" else 0,
            "rate_match": args.rate_match,
            "mode": pattern.mode,
            "R": [int(i) for i in pattern.pattern],
            "p": args.pc_len,
        }
    )
    return doc


def cmd_construct(args):
    doc = _construct(args)
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        _write_manifest(args.out, "construct", _args_config(args))
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# encode / decode
# ---------------------------------------------------------------------------


def _load_alloc_doc(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        alloc = Allocation.from_dict(doc)
        pattern = RateMatchPattern(
            mode=doc["mode"],
            N=doc["N"],
            M=doc["M"],
            pattern=np.asarray(sorted(doc["R"]), dtype=np.int64),
        )
    except (KeyError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"bad allocation file {path}: {exc}") from None
    return doc, alloc, pattern


def _frame_lines(stream):
    for ln, line in enumerate(stream, 1):
        line = line.strip()
        if not line:
            continue
        yield ln, line.split()


def cmd_codec(args):
    doc, alloc, pattern = _load_alloc_doc(args.alloc)
    crc_len = int(doc.get("crc_len", 0))
    p = int(doc.get("p", 5))
    crc = {0: None, 8: CRC8, 16: CRC16}[crc_len]
    if doc["scheme"] == "pc":
        G = pc_generator(alloc, p)
    else:
        G = ca_generator(alloc, crc)
    K = G.shape[0]
    src = open(args.infile) if args.infile else sys.stdin
    try:
        if args.action == "encode":
            for ln, toks in _frame_lines(src):
                if len(toks) != K or any(t not in ("0", "1") for t in toks):
                    raise DataFormatError(f"line {ln}: expected {K} bits")
                msg = np.array([int(t) for t in toks], dtype=np.uint8)
                cw = encode_batch(msg[None, :], G)[0]
                c_hat = cw[pattern.kept]
                print(" ".join(str(int(b)) for b in c_hat))
        else:
            dec_cfg = DecoderConfig(
                list_size=args.list_size,
                mode="ca-scl" if crc else ("pc-scl" if doc["scheme"] == "pc" else "scl"),
                crc=crc,
                pc_register_len=p,
            )
            M = pattern.M
            for ln, toks in _frame_lines(src):
                if len(toks) != M:
                    raise DataFormatError(f"line {ln}: expected {M} LLR values")
                try:
                    llr_m = np.array([float(t) for t in toks])
                except ValueError:
                    raise DataFormatError(f"line {ln}: non-numeric LLR") from None
                llr = derate_match(llr_m, pattern)
                res = scl_decode(llr, alloc, dec_cfg)
                bits = " ".join(str(int(b)) for b in res.message)
                print(f"{bits} {1 if res.passed else 0}")
    finally:
        if args.infile:
            src.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / sweep
# ---------------------------------------------------------------------------


def _experiment_config(args) -> ExperimentConfig:
    spec = CodeSpec.from_KM(args.K, args.M)
    if args.N is not None and spec.N != args.N:
        raise InfeasibleConstructionError(
            f"--N {args.N} inconsistent with M={args.M} (mother length {spec.N})"
        )
    return ExperimentConfig(
        spec=spec,
        scheme=args.scheme,
        list_size=args.list_size,
        crc_len=args.crc,
        alpha=args.alpha,
        seed=args.seed,
        stop=StopRule(args.min_errors, args.max_frames),
        batch_size=args.batch_size,
    )


def _args_config(args) -> dict:
    skip = {"func", "out", "workers", "config", "infile"}
    return {
        k: v for k, v in sorted(vars(args).items())
        if k not in skip and not k.startswith("_")
    }


def cmd_simulate(args):
    cfg = _experiment_config(args)
    snrs = [ebn0_to_esn0(s, args.K, args.M) if args.ebn0 else s for s in args.snr]
    config = _args_config(args)
    if args.out:
        _check_resume_manifest(args.out, "simulate", config)
    rows = sweep_bler(
        cfg, snrs, out_path=args.out, workers=args.workers,
        progress=lambda r: print(
            f"{r['scheme']} N={r['N']} K={r['K']} snr={r['snr_db']} "
            f"bler={r['bler']} ({r['frame_errors']}/{r['frames']})"
        ),
    )
    if args.out:
        _write_manifest(args.out, "simulate", config)
    return EXIT_OK


def cmd_sweep(args):
    config = _args_config(args)
    if args.out:
        _check_resume_manifest(args.out, "sweep", config)
    if args.k_range:
        k_lo, k_hi, k_step = args.k_range
        cases = []
        for K in range(k_lo, k_hi + 1, k_step):
            M = int(round(K / args.rate)) if args.rate else args.M
            cases.append((K, M))
        if args.K is None:
            args.K, args.M = cases[0]
        base = _experiment_config(args)
        rows = sweep_required_snr(
            base, cases, args.target_bler, resolution_db=args.resolution,
            out_path=args.out, workers=args.workers,
            progress=lambda r: print(
                f"{r['scheme']} K={r['K']} M={r['M']}: "
                f"required {r['required_snr_db']} dB @ bler {r['target_bler']}"
            ),
        )
    else:
        base = _experiment_config(args)
        rows = sweep_bler(
            base, args.snr, out_path=args.out, workers=args.workers,
            progress=lambda r: print(
                f"{r['scheme']} snr={r['snr_db']} bler={r['bler']}"
            ),
        )
    if args.out:
        _write_manifest(args.out, "sweep", config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args):
    if args.what == "coset":
        spec = coset_spectrum(args.N, args.i)
        doc = spec.to_dict()
        doc["min_distance"] = spec.min_weight
        print(json.dumps(doc, indent=1))
        print(f"{'weight':>7} {'count':>10}")
        for w, cnt in sorted(spec.counts.items()):
            print(f"{w:>7} {cnt:>10}")
        print(f"min distance at stage {args.i}: {spec.min_weight}")
    elif args.what == "minweight":
        doc, alloc, _ = _load_alloc_doc(args.alloc)
        w = min_codeword_weight(alloc, int(doc.get("p", 5)))
        print(json.dumps({"min_codeword_weight": int(w)}))
    else:  # patterns
        snr = args.snr
        if snr is None:
            snr = calibrate_snr_for_fer(
                N=args.N, target_fer=args.target_fer, seed=args.seed
            )
        stats = error_pattern_stats(
            snr_db=snr, min_error_events=args.events, seed=args.seed, N=args.N
        )
        report = stats.to_dict()
        report["snr_db"] = format_float(snr)
        if args.out:
            with open(args.out, "w") as fh:
                json.dump(report, fh, indent=1)
                fh.write("\n")
            _write_manifest(args.out, "analyze-patterns", _args_config(args))
        top = stats.ranked()[:16]
        print(f"# {stats.total_errors} error events at {snr:.2f} dB")
        print(f"{'support':<28}{'count':>8}{'share':>9}")
        for supp, count in top:
            share = count / stats.total_errors
            print(f"{str(list(supp)):<28}{count:>8}{share:>9.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_code_flags(p, k_required=True):
    p.add_argument("--N", type=int, required=False, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--K", type=int, required=k_required, default=None)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--scheme", choices=SCHEMES, default="pc-polar")
    p.add_argument("--crc", type=int, choices=(0, 8, 16), default=0)


def _add_sim_flags(p):
    p.add_argument("--list-size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-errors", type=int, default=100)
    p.add_argument("--max-frames", type=int, default=1_000_000)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument(
        "--workers", type=int,
        default=int(os.environ.get("POLAR_WORKERS", "1")),
    )
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pcpolar",
        description="Parity-check Polar coding: construction, codecs, simulation",
    )
    ap.add_argument("--config", default=None, help="key=value or JSON defaults file")
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("construct", help="print or save an allocation")
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--M", type=int, default=None)
    c.add_argument("--K", type=int, required=True)
    c.add_argument("--alpha", type=float, default=1.0)
    c.add_argument("--scheme", choices=("pc", "ca"), default="pc")
    c.add_argument("--crc", type=int, choices=(0, 8, 16), default=0)
    c.add_argument("--rate-match", choices=("brs", "qup", "none"), default="brs")
    c.add_argument("--ga-snr", type=float, default=2.0)
    c.add_argument("--pc-len", type=int, default=5)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_construct)

    for action in ("encode", "decode"):
        e = sub.add_parser(action, help=f"{action} frames (one per line)")
        e.add_argument("--alloc", required=True, help="allocation JSON from construct")
        e.add_argument("--in", dest="infile", default=None)
        e.add_argument("--list-size", type=int, default=8)
        e.set_defaults(func=cmd_codec, action=action)

    s = sub.add_parser("simulate", help="Monte Carlo BLER points")
    _add_code_flags(s)
    _add_sim_flags(s)
    s.add_argument("--snr", type=float, nargs="+", required=True)
    s.add_argument("--ebn0", action="store_true", help="interpret --snr as Eb/N0")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="SNR or K sweeps with resumable output")
    _add_code_flags(w, k_required=False)
    _add_sim_flags(w)
    w.add_argument("--snr", type=float, nargs="*", default=None)
    w.add_argument("--k-range", type=int, nargs=3, metavar=("MIN", "MAX", "STEP"))
    w.add_argument("--rate", type=float, default=None, help="M = round(K/rate)")
    w.add_argument("--target-bler", type=float, default=1e-3)
    w.add_argument("--resolution", type=float, default=0.1)
    w.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="code-geometry reports")
    asub = a.add_subparsers(dest="what", required=True)
    ac = asub.add_parser("coset", help="coset distance spectrum")
    ac.add_argument("--N", type=int, required=True)
    ac.add_argument("--i", type=int, required=True)
    ac.set_defaults(func=cmd_analyze, what="coset")
    am = asub.add_parser("minweight", help="minimum codeword weight (brute force)")
    am.add_argument("--alloc", required=True)
    am.set_defaults(func=cmd_analyze, what="minweight")
    ap_ = asub.add_parser("patterns", help="SC error-pattern census")
    ap_.add_argument("--N", type=int, default=16)
    ap_.add_argument("--snr", type=float, default=None)
    ap_.add_argument("--target-fer", type=float, default=0.30)
    ap_.add_argument("--events", type=int, default=10000)
    ap_.add_argument("--seed", type=int, default=0)
    ap_.add_argument("--out", default=None)
    ap_.set_defaults(func=cmd_analyze, what="patterns")
    return ap


def _apply_config_file(ap: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    # flags override file values, so config entries are injected as defaults
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    cfg = _load_config_file(argv[i + 1])
    extra = []
    for k, v in cfg.items():
        flag = "--" + k.replace("_", "-")
        if flag not in argv:
            if isinstance(v, list):
                extra += [flag] + [str(x) for x in v]
            elif isinstance(v, bool):
                if v:
                    extra.append(flag)
            else:
                extra += [flag, str(v)]
    head = argv[: i + 2]
    cmd_rest = argv[i + 2 :]
    if cmd_rest:
        return head + [cmd_rest[0]] + extra + cmd_rest[1:]
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        argv = _apply_config_file(ap, argv)
        args = ap.parse_args(argv)
    except DataFormatError as exc:
        _die(EXIT_DATA, str(exc))
    if args.cmd in ("simulate", "sweep", "construct"):
        if args.M is None and args.N is not None:
            args.M = args.N
        k_rated = args.cmd == "sweep" and args.k_range and args.rate is not None
        if args.M is None and not k_rated:
            _die(EXIT_USAGE, "--M or --N is required (or --k-range with --rate)")
    try:
        return args.func(args)
    except InfeasibleConstructionError as exc:
        _die(EXIT_INFEASIBLE, f"infeasible construction: {exc}")
    except (DataFormatError, EnumerationTooLargeError) as exc:
        _die(EXIT_DATA, str(exc))
    except ValueError as exc:
        _die(EXIT_USAGE, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
