"""Command-line entry point: ``wsdec {spectrum,build-sphere,simulate,decode-one}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .channel import NoiseModel, SnrSpec, bpsk_modulate, snr_to_sigma
from .codes import CRC11_POLY, build_ca_polar
from .decoders import MlDecoder, SclDecoder
from .sim import (CodeConfig, SetupError, SimConfig, SnrGrid, TrialConfig, draw_trial, points_to_csv,
                  resolve_sphere, run_sweep, trial_stream)
from .sphere import DEFAULT_ENUM_CAP, EnumerationCapError, build_sphere, enumerate_spectrum, save_sphere
from .wsd import TwoStageDecoder, WsdConfig

_INLINE_SIM_FLAGS = ("n", "k", "crc_poly", "decoder", "list_size", "radius", "max_rounds", "mode",
                     "snr_start", "snr_stop", "snr_step", "snr_mode", "max_blocks", "target_errors",
                     "seed", "sphere")


def _int0(s: str) -> int:
    return int(s, 0)


def _code_args(p: argparse.ArgumentParser, required: bool = False):
    p.add_argument("--n", type=int, default=None if required else 64, required=required)
    p.add_argument("--k", type=int, default=None if required else 16, required=required)
    p.add_argument("--crc-poly", type=_int0, default=CRC11_POLY,
                   help="generator polynomial, bit i = coefficient of x^i (default 0xE21)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wsdec", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("spectrum", help="enumerate the weight spectrum of a CA-polar code")
    _code_args(p)
    p.add_argument("--cap", type=int, default=DEFAULT_ENUM_CAP)
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("build-sphere", help="enumerate S_r(0) and write a sphere cache file")
    _code_args(p)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int, default=DEFAULT_ENUM_CAP)

    p = sub.add_parser("simulate", help="Monte-Carlo BLER / complexity sweep")
    p.add_argument("--config", help="JSON config file mirroring SimConfig")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--crc-poly", type=_int0)
    p.add_argument("--decoder", choices=("scl", "scl_wsd", "mld"))
    p.add_argument("--list-size", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--mode", choices=("standard", "aom"))
    p.add_argument("--snr-start", type=float)
    p.add_argument("--snr-stop", type=float)
    p.add_argument("--snr-step", type=float)
    p.add_argument("--snr-mode", choices=("ebn0", "esn0"))
    p.add_argument("--max-blocks", type=int)
    p.add_argument("--target-errors", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sphere", help="sphere cache file (built in memory when omitted)")
    p.add_argument("--csv-out", help="CSV path; a JSON sidecar is written next to it")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("decode-one", help="simulate and decode a single block, dump the boost trace")
    _code_args(p)
    p.add_argument("--decoder", choices=("scl", "scl_wsd", "mld"), default="scl_wsd")
    p.add_argument("--list-size", type=int, default=32)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--max-rounds", type=int, default=3)
    p.add_argument("--mode", choices=("standard", "aom"), default="standard")
    p.add_argument("--snr", type=float, default=2.0)
    p.add_argument("--snr-mode", choices=("ebn0", "esn0"), default="ebn0")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--sphere")
    return ap


def _sim_config(args, ap) -> SimConfig:
    inline = {f: getattr(args, f) for f in _INLINE_SIM_FLAGS if getattr(args, f) is not None}
    if args.config:
        if inline:
            ap.error(f"--config cannot be combined with inline flags: {sorted(inline)}")
        return SimConfig.from_file(args.config)
    decoder = args.decoder or "scl_wsd"
    if decoder != "scl_wsd":
        stray = [f for f in ("radius", "max_rounds", "mode", "sphere") if f in inline]
        if stray:
            ap.error(f"{stray} only apply to decoder scl_wsd")
    if decoder == "scl_wsd" and args.radius is None:
        ap.error("decoder scl_wsd needs --radius")
    start = 2.0 if args.snr_start is None else args.snr_start
    stop = start if args.snr_stop is None else args.snr_stop
    wsd = None
    if decoder == "scl_wsd":
        wsd = WsdConfig(args.radius, args.max_rounds or 3, args.mode or "standard")
    return SimConfig(
        code=CodeConfig(args.n or 64, args.k or 16, args.crc_poly or CRC11_POLY),
        decoder=decoder,
        list_size=args.list_size or 32,
        wsd=wsd,
        snr=SnrGrid.arange(start, stop, args.snr_step or 1.0, args.snr_mode or "ebn0"),
        trials=TrialConfig(args.max_blocks or 10**6, args.target_errors or 100),
        seed=1 if args.seed is None else args.seed,
        sphere_cache_path=args.sphere,
    )


def cmd_spectrum(args) -> int:
    code = build_ca_polar(args.n, args.k, args.crc_poly)
    spec = enumerate_spectrum(code, args.cap)
    cum = [0] + spec.cumulative()
    if args.json:
        print(json.dumps({"N": code.N, "K": code.K, "weights": spec.weights,
                          "shell_counts": spec.shell_counts, "cumulative": cum}))
        return 0
    print(f"CA-polar ({code.N},{code.K}), CRC poly {code.crc.to_int():#x}, d_min = {spec.d_min}")
    print(f"{'l':>3} {'d_l':>5} {'count':>10} {'|S_l(0)|':>10}")
    for i, (w, c) in enumerate(zip(spec.weights, spec.shell_counts)):
        print(f"{i:>3} {w:>5} {c:>10} {cum[i]:>10}")
    return 0


def cmd_build_sphere(args) -> int:
    code = build_ca_polar(args.n, args.k, args.crc_poly)
    sphere = build_sphere(code, args.radius, cap=args.cap)
    save_sphere(sphere, args.out)
    print(f"wrote {sphere.member_count} members (weights {list(sphere.weights_included)}) to {args.out}")
    return 0


def cmd_simulate(args, ap) -> int:
    cfg = _sim_config(args, ap)
    points = run_sweep(cfg, args.csv_out, workers=args.workers)
    if args.csv_out is None:
        sys.stdout.write(points_to_csv(cfg, points))
    return 0


def cmd_decode_one(args) -> int:
    code = build_ca_polar(args.n, args.k, args.crc_poly)
    noise: NoiseModel = snr_to_sigma(SnrSpec(args.snr_mode, args.snr), code.rate)
    m, n = draw_trial(trial_stream(args.seed, 0, args.trial), code.K, code.N)
    y = bpsk_modulate(code.encode_array(m)) + noise.sigma * n
    if args.decoder == "mld":
        dec = MlDecoder(code)
    elif args.decoder == "scl":
        dec = SclDecoder(code, args.list_size)
    else:
        cfg = SimConfig(code=CodeConfig(args.n, args.k, args.crc_poly),
                        wsd=WsdConfig(args.radius, args.max_rounds, args.mode),
                        sphere_cache_path=args.sphere)
        dec = TwoStageDecoder(code, SclDecoder(code, args.list_size), resolve_sphere(cfg, code), cfg.wsd)
    out = dec.decode(y, noise)
    sent = "".join(map(str, m))
    dump = {
        "sigma": noise.sigma,
        "message_sent": sent,
        "message_decoded": "".join(map(str, out.message_estimate)),
        "block_error": "".join(map(str, out.message_estimate)) != sent,
        "stage": out.stage,
        "crc_pass": out.crc_pass,
        "metric": out.metric,
        "boost_rounds": out.boost_rounds,
        "metric_evals": out.metric_evals,
        "trace": None if out.trace is None else {
            "metrics": list(out.trace.metrics),
            "rounds_executed": out.trace.rounds_executed,
            "termination": out.trace.termination,
        },
    }
    print(json.dumps(dump, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "spectrum":
            return cmd_spectrum(args)
        if args.cmd == "build-sphere":
            return cmd_build_sphere(args)
        if args.cmd == "simulate":
            return cmd_simulate(args, ap)
        return cmd_decode_one(args)
    except (SetupError, EnumerationCapError, ValueError, OSError) as e:
        print(f"wsdec: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
