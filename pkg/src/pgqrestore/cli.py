"""Command-line front end: corrupt, restore, psnr, bench and emit-config.

Configuration is a flat key=value text file; command-line flags override
file values, which override built-in defaults.  Unknown keys fail fast.
Exit codes: 0 ok, 1 usage, 2 I/O or parse failure, 3 numeric failure,
4 bench completed partially.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .admtv import AdmTvParams, awgn_solve, joint_solve
from .bench import (
    DEFAULT_SEEDS,
    ExperimentSpec,
    ExternalBaseline,
    emit_table,
    parse_kernel,
    peak_scaled_denoise_spec,
    run_experiment,
    table1_specs,
    _sigma2_avg,
)
from .grid import psnr
from .io_files import read_image, write_pfm
from .noise import NoiseParams, corrupt
from .solver import SolverConfig, restore

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4

# flat config schema: key -> (type, deconvolution default, denoising default)
CONFIG_SCHEMA = {
    "beta0": (float, 16.0, 2.0),
    "epsilon": (float, 1e-5, 1e-3),
    "max_iters": (int, 300, 300),
    "gamma_lo_frac": (float, 0.5, 0.5),
    "gamma_hi_frac": (float, 1.0, 1.0),
    "warmup_iters": (int, 6, 6),
    "kappa": (float, 8.0, 8.0),
    "beta_nabla": (float, 200.0, 200.0),
    "admtv_epsilon": (float, 1e-5, 1e-5),
    "admtv_max_iters": (int, 100, 100),
    "external_baseline_cmd": (str, "", ""),
}


def default_config(task: str = "deconvolution") -> dict:
    idx = 1 if task == "deconvolution" else 2
    return {key: spec[idx] for key, spec in CONFIG_SCHEMA.items()}


def parse_config_file(path: str) -> dict:
    out = {}
    with open(path) as f:
        for ln, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_SCHEMA:
                raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
            typ = CONFIG_SCHEMA[key][0]
            if typ is str:
                out[key] = val
            elif typ is int:
                out[key] = int(float(val))
            else:
                out[key] = float(val)
    return out


def emit_config(cfg: dict) -> str:
    lines = [f"{key} = {cfg[key]}" for key in CONFIG_SCHEMA]
    return "\n".join(lines) + "\n"


def resolve_config(args, task: str) -> dict:
    cfg = default_config(task)
    if getattr(args, "config", None):
        cfg.update(parse_config_file(args.config))
    for key in CONFIG_SCHEMA:
        flag = getattr(args, key, None)
        if flag is not None and flag != "":
            cfg[key] = flag
    return cfg


def solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(beta0=cfg["beta0"], epsilon=cfg["epsilon"],
                        max_iters=cfg["max_iters"],
                        gamma_lo_frac=cfg["gamma_lo_frac"],
                        gamma_hi_frac=cfg["gamma_hi_frac"],
                        warmup_iters=cfg["warmup_iters"])


def admtv_params(cfg: dict) -> AdmTvParams:
    return AdmTvParams(kappa=cfg["kappa"], beta_nabla=cfg["beta_nabla"],
                       epsilon=cfg["admtv_epsilon"],
                       max_iters=cfg["admtv_max_iters"])


def noise_from_args(args) -> NoiseParams:
    return NoiseParams(alpha=args.alpha, sigma=args.sigma, q=args.q, g=args.g)


def add_noise_flags(sp):
    sp.add_argument("--alpha", type=float, required=True, help="Poisson scale")
    sp.add_argument("--sigma", type=float, default=0.0, help="Gaussian std")
    sp.add_argument("--q", type=float, default=0.0, help="quantization step")
    sp.add_argument("--g", type=float, default=1.0, help="gamma exponent")


def add_config_flags(sp):
    sp.add_argument("--config", help="flat key=value config file")
    for key, (typ, _, _) in CONFIG_SCHEMA.items():
        sp.add_argument(f"--{key.replace('_', '-')}", dest=key,
                        type=(str if typ is str else typ), default=None)


def cmd_corrupt(args) -> int:
    clean = read_image(args.input)
    k = parse_kernel(args.kernel)
    y = corrupt(clean, k, noise_from_args(args), args.seed)
    write_pfm(args.output, y)
    print(f"input PSNR vs clean: {psnr(y, clean):.2f} dB")
    return EXIT_OK


def cmd_restore(args) -> int:
    y = read_image(args.input)
    k = parse_kernel(args.kernel)
    task = "denoising" if args.kernel == "identity" else "deconvolution"
    cfg = resolve_config(args, task)
    noise = noise_from_args(args)
    scfg = solver_config(cfg)
    p = admtv_params(cfg)

    if args.method == "awgn-tv":
        sigma = args.awgn_sigma
        if sigma is None:
            sigma = float(np.sqrt(_sigma2_avg(y, noise)))
        info: dict = {}
        x = awgn_solve(y, k, sigma, p, info=info)
        iters = info["iterations"]
    elif args.method == "prop-tv":
        x, iters = joint_solve(y, k, noise, p, scfg)
    elif args.method == "prop-external":
        cmd = cfg["external_baseline_cmd"]
        if not cmd:
            raise ValueError("prop-external requires external_baseline_cmd")
        x, iters = restore(y, k, noise, ExternalBaseline(cmd), scfg)
    else:
        raise ValueError(f"unknown method {args.method!r}")

    write_pfm(args.output, x)
    print(f"iterations: {iters}")
    if args.reference:
        ref = read_image(args.reference)
        print(f"PSNR vs reference: {psnr(x, ref):.2f} dB")
    return EXIT_OK


def cmd_psnr(args) -> int:
    a = read_image(args.estimate)
    b = read_image(args.reference)
    print(f"{psnr(a, b, args.peak):.4f}")
    return EXIT_OK


def _parse_cell(text: str, seeds) -> ExperimentSpec:
    """Cell grammar: image,[r<radius>|identity],a<alpha>,s<sigma>[,+q][,peak<P>]"""
    tokens = text.split(",")
    image_id = tokens[0]
    kernel = "identity"
    alpha = sigma = None
    q = 0.0
    g = 1.0
    peak = None
    for tok in tokens[1:]:
        if tok == "identity":
            kernel = "identity"
        elif tok == "+q":
            q, g = 1.0 / 256.0, 2.2
        elif tok.startswith("peak"):
            peak = float(tok[4:])
        elif tok.startswith("r"):
            kernel = f"pillbox:{float(tok[1:]):g}"
        elif tok.startswith("a"):
            alpha = float(tok[1:])
        elif tok.startswith("s"):
            sigma = float(tok[1:])
        else:
            raise ValueError(f"unknown cell token {tok!r}")
    if peak is not None:
        if sigma is None:
            raise ValueError("peak-scaled cell needs s<sigma>")
        return peak_scaled_denoise_spec(image_id, peak, sigma, seeds=seeds)
    if alpha is None or sigma is None:
        raise ValueError("cell needs a<alpha> and s<sigma>")
    return ExperimentSpec(image_id=image_id, kernel=kernel,
                          noise=NoiseParams(alpha=alpha, sigma=sigma, q=q, g=g),
                          seeds=tuple(seeds))


def _parse_table(name: str, seeds) -> list:
    """Table ids: t1-alpha<val>[-s<sigma>][+q] (sigma defaults to 1e-4)."""
    if not name.startswith("t1-alpha"):
        raise ValueError(f"unknown table id {name!r}")
    rest = name[len("t1-alpha"):]
    quantized = rest.endswith("+q")
    if quantized:
        rest = rest[:-2]
    if "-s" in rest:
        alpha_s, sigma_s = rest.split("-s", 1)
        alpha, sigma = float(alpha_s), float(sigma_s)
    else:
        alpha, sigma = float(rest), 1e-4
    return table1_specs(alpha, sigma, quantized, seeds=seeds)


def cmd_bench(args) -> int:
    seeds = tuple(range(1, args.seeds + 1))
    if args.cell:
        specs = [_parse_cell(args.cell, seeds)]
    elif args.table:
        specs = _parse_table(args.table, seeds)
    else:
        raise ValueError("bench needs --cell or --table")
    if args.external_baseline_cmd:
        specs = [ExperimentSpec(**{**spec.__dict__,
                                   "external_cmd": args.external_baseline_cmd,
                                   "methods": spec.methods + ("prop-external",)})
                 for spec in specs]

    rows = []
    partial = False
    for spec in specs:
        img_path = None
        for ext in (".pgm", ".pfm"):
            cand = os.path.join(args.images, spec.image_id + ext)
            if os.path.exists(cand):
                img_path = cand
                break
        if img_path is None:
            raise FileNotFoundError(
                f"image {spec.image_id!r} not prepared under {args.images}; "
                f"run scripts/prepare_images.py")
        image = read_image(img_path)
        row = run_experiment(spec, image)
        partial = partial or row.incomplete
        rows.append(row)
        res = " ".join(f"{mth}={row.results[mth].psnr_mean:.2f}dB"
                       for mth in spec.methods)
        print(f"{spec.image_id} {spec.kernel} alpha={spec.noise.alpha:g} "
              f"sigma={spec.noise.sigma:g} q={spec.noise.q:g}: {res}")

    text = emit_table(rows, fmt=args.format, include_timing=not args.omit_timing)
    with open(args.output, "w") as f:
        f.write(text)
    print(f"wrote {args.output}")
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_emit_config(args) -> int:
    cfg = default_config(args.task)
    if getattr(args, "config", None):
        cfg.update(parse_config_file(args.config))
    sys.stdout.write(emit_config(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pgq",
                                 description="restoration under Poisson-Gaussian "
                                             "noise and quantization error")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("corrupt", help="simulate an observation")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--kernel", default="identity")
    add_noise_flags(sp)
    sp.add_argument("--seed", type=int, default=1)
    sp.set_defaults(func=cmd_corrupt)

    sp = sub.add_parser("restore", help="restore an observation")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--method", choices=("awgn-tv", "prop-tv", "prop-external"),
                    default="prop-tv")
    sp.add_argument("--kernel", default="identity")
    add_noise_flags(sp)
    sp.add_argument("--awgn-sigma", type=float, default=None,
                    help="noise std for awgn-tv (default: from noise params)")
    sp.add_argument("--reference", help="clean image for PSNR reporting")
    add_config_flags(sp)
    sp.set_defaults(func=cmd_restore)

    sp = sub.add_parser("psnr", help="PSNR between two images")
    sp.add_argument("estimate")
    sp.add_argument("reference")
    sp.add_argument("--peak", type=float, default=1.0)
    sp.set_defaults(func=cmd_psnr)

    sp = sub.add_parser("bench", help="run benchmark cells")
    sp.add_argument("--cell", help="e.g. cameraman,r9,a1024,s1e-4")
    sp.add_argument("--table", help="e.g. t1-alpha1024")
    sp.add_argument("--images", default="data/images")
    sp.add_argument("--seeds", type=int, default=len(DEFAULT_SEEDS))
    sp.add_argument("--output", "-o", default="bench.csv")
    sp.add_argument("--format", choices=("csv", "markdown"), default="csv")
    sp.add_argument("--omit-timing", action="store_true",
                    help="zero the wall-time column for reproducible bytes")
    sp.add_argument("--external-baseline-cmd", dest="external_baseline_cmd",
                    default=None)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("emit-config", help="print the effective configuration")
    sp.add_argument("--task", choices=("deconvolution", "denoising"),
                    default="deconvolution")
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_emit_config)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (OSError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as e:
        # parse errors on files are I/O-class; numeric domain errors are not
        if isinstance(e, ValueError) and ("config" in str(e) or "PGM" in str(e)
                                          or "PFM" in str(e) or "cell" in str(e)
                                          or "table" in str(e)):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
