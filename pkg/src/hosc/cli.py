"""Command-line entry point: ``hosc fit|sweep|verify|ntk``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .activations import Activation
from .analysis import DegenerateKernel, empirical_ntk, ntk_monotonicity
from .codecs import ParseError, UnsupportedDepth, UnsupportedEncoding
from .experiment import (
    EXIT_ERROR,
    EXIT_OK,
    OUTPUT_ENV,
    ConfigError,
    SweepAborted,
    _check_keys,
    _integer,
    _number,
    config_hash,
    load_run_input,
    load_sweep_input,
    output_root,
    run_fit,
    run_sweep,
)
from .verify import run_verify

_INPUT_ERRORS = (ConfigError, OSError, ParseError, UnsupportedDepth, UnsupportedEncoding)

NTK_DEFAULTS = {"betas": [0.5, 1.0, 2.0, 5.0, 10.0], "omega0": 30.0, "grid_points": 128, "width": 64, "seeds": 8, "slack": 0.02}


def _err(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def cmd_fit(args) -> int:
    try:
        cfg = load_run_input(args.config)
    except _INPUT_ERRORS as exc:
        return _err(str(exc))
    log = (lambda r: print(f"epoch {r.epoch:6d}  mse {r.mse:.6e}  psnr {r.psnr_db:.2f} dB")) if args.verbose else None
    try:
        res = run_fit(cfg, args.out, verbose=log)
    except _INPUT_ERRORS as exc:
        return _err(str(exc))
    m = res.manifest
    if m["outcome"]["status"] == "completed":
        print(f"completed  mse={m['final']['mse']:.6e}  psnr={m['final']['psnr_db']} dB")
    else:
        print(f"diverged at epoch {m['outcome']['epoch']}")
    print(res.run_dir / "manifest.json")
    return res.exit_code


def cmd_sweep(args) -> int:
    try:
        spec = load_sweep_input(args.spec)
    except _INPUT_ERRORS as exc:
        return _err(str(exc))

    def show(r):
        psnr = "-" if r.psnr_db is None else f"{r.psnr_db:.2f}"
        print(f"{r.activation:12s} omega0={r.omega0:g} beta={r.beta:g} seed={r.seed}  {r.outcome:9s} psnr={psnr}")

    try:
        path, _ = run_sweep(spec, args.out, Path(args.spec).parent, on_row=show)
    except SweepAborted as exc:
        return _err(str(exc))
    print(path)
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_verify(print, bound_scale=args.bound_scale, include_ntk=not args.skip_ntk)
    return EXIT_OK if report.passed else EXIT_ERROR


def _load_ntk_config(path) -> dict:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    _check_keys("ntk", raw, ["version", *NTK_DEFAULTS], required=["version"])
    if raw["version"] != 1:
        raise ConfigError(f"ntk.version: unsupported schema version {raw['version']!r}")
    cfg = dict(NTK_DEFAULTS, **{k: v for k, v in raw.items() if k != "version"})
    if not isinstance(cfg["betas"], list) or not cfg["betas"]:
        raise ConfigError("ntk.betas: expected a non-empty list")
    cfg["betas"] = [_number("ntk", "betas", b) for b in cfg["betas"]]
    cfg["omega0"] = _number("ntk", "omega0", cfg["omega0"])
    cfg["slack"] = _number("ntk", "slack", cfg["slack"], positive=False)
    for k in ("grid_points", "width", "seeds"):
        _integer("ntk", k, cfg[k], minimum=2 if k == "grid_points" else 1)
    return dict(version=1, **cfg)


def cmd_ntk(args) -> int:
    try:
        cfg = _load_ntk_config(args.config)
    except _INPUT_ERRORS as exc:
        return _err(str(exc))
    acts = [Activation.hosc(b, cfg["omega0"]) for b in cfg["betas"]]
    try:
        report = empirical_ntk(acts, cfg["grid_points"], cfg["width"], cfg["seeds"])
    except DegenerateKernel as exc:
        return _err(str(exc))
    out_dir = output_root(args.out) / f"ntk-{config_hash(cfg)[:16]}"
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_dir / "ntk.csv")
    report.save_kernels(out_dir / "kernels.npz")
    for label, md, dr in zip(report.labels, report.mean_diag, report.dominance_ratio):
        print(f"{label:28s} mean_diag={md:.6e} dominance={dr:.6e}")
    v = ntk_monotonicity(report, cfg["slack"])
    print(f"nondecreasing: mean_diag={'yes' if v.mean_diag_ok else 'no'} dominance={'yes' if v.dominance_ok else 'no'}")
    print(out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hosc", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--out", default=None, help=f"output root (default: ${OUTPUT_ENV} or ./hosc-runs)")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="train one config (or rerun a manifest)")
    f.add_argument("config", help="run config or manifest.json")
    f.add_argument("-v", "--verbose", action="store_true", help="print the metric trace while training")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sweep", help="run a sweep spec and write a results CSV")
    s.add_argument("spec")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the analytical check suite")
    v.add_argument("--bound-scale", type=float, default=1.0, help="multiply the gating bound (fault injection)")
    v.add_argument("--skip-ntk", action="store_true")
    v.set_defaults(func=cmd_verify)

    n = sub.add_parser("ntk", help="empirical NTK statistics along a beta ladder")
    n.add_argument("config")
    n.set_defaults(func=cmd_ntk)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
