"""Benchmark harness: build corrupted inputs, run the solvers, average
PSNR over seeds, and emit machine-readable tables.

Cells are (image, kernel, noise) triples; each method runs once per seed
and the per-seed work is a pure function of the spec, so a worker pool
(PGQ_THREADS) changes nothing but wall time.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .admtv import AdmTvParams, awgn_solve, joint_solve
from .grid import identity_kernel, make_pillbox, psnr
from .io_files import read_pfm, write_pfm
from .noise import NoiseParams, corrupt, quant_moments
from .solver import DENOISE_CONFIG, SolverConfig, restore

DEFAULT_SEEDS = tuple(range(1, 11))

METHODS = ("input", "awgn-tv", "prop-tv", "prop-external")


@dataclass(frozen=True)
class ExperimentSpec:
    image_id: str
    kernel: str                      # 'identity' | 'pillbox:<radius>'
    noise: NoiseParams
    methods: tuple = ("input", "awgn-tv", "prop-tv")
    seeds: tuple = DEFAULT_SEEDS
    solver: SolverConfig = field(default_factory=SolverConfig)
    admtv: AdmTvParams = field(default_factory=AdmTvParams)
    external_cmd: str | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        for mth in self.methods:
            if mth not in METHODS:
                raise ValueError(f"unknown method {mth!r}")


@dataclass
class MethodResult:
    psnr_mean: float
    psnr_std: float
    iters_mean: float
    wall_s: float


@dataclass
class ResultRow:
    spec: ExperimentSpec
    results: dict                    # method -> MethodResult
    incomplete: bool = False


def parse_kernel(spec: str) -> np.ndarray:
    if spec == "identity":
        return identity_kernel()
    if spec.startswith("pillbox:"):
        return make_pillbox(float(spec.split(":", 1)[1]))
    if spec.startswith("file:"):
        return read_pfm(spec.split(":", 1)[1])
    raise ValueError(f"unknown kernel spec {spec!r}")


def kernel_radius(spec: str) -> float:
    return float(spec.split(":", 1)[1]) if spec.startswith("pillbox:") else 0.0


def peak_scaled_denoise_spec(image_id: str, peak: float, sigma: float,
                             methods=("input", "prop-tv"),
                             seeds=DEFAULT_SEEDS) -> ExperimentSpec:
    """Map the peak-scaled denoising convention onto the noise model:
    intensities stay in [0, 1], the Poisson scale is the peak value and
    the Gaussian std is sigma/peak; PSNR is computed at peak 1."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    return ExperimentSpec(
        image_id=image_id,
        kernel="identity",
        noise=NoiseParams(alpha=float(peak), sigma=float(sigma) / float(peak)),
        methods=tuple(methods),
        seeds=tuple(seeds),
        solver=DENOISE_CONFIG,
    )


class ExternalBaseline:
    """Subprocess adapter for an external AWGN restoration tool.

    Contract: the harness writes the degraded image and the kernel as PFM
    files and invokes
        <cmd> <input.pfm> <kernel.pfm> <sigma> <output.pfm>
    The tool must write the restored image as grayscale PFM.
    """

    def __init__(self, cmd: str):
        self.cmd = cmd
        self.last_iterations = 1

    def solve(self, y, k, sigma):
        with tempfile.TemporaryDirectory(prefix="pgq_ext_") as tmp:
            in_path = os.path.join(tmp, "in.pfm")
            k_path = os.path.join(tmp, "kernel.pfm")
            out_path = os.path.join(tmp, "out.pfm")
            write_pfm(in_path, y)
            write_pfm(k_path, k)
            argv = self.cmd.split() + [in_path, k_path, f"{sigma:.17g}", out_path]
            proc = subprocess.run(argv, capture_output=True, text=True)
            if proc.returncode != 0:
                raise RuntimeError(
                    f"external baseline failed (exit {proc.returncode}): {proc.stderr.strip()}")
            out = read_pfm(out_path)
        if out.shape != y.shape:
            raise RuntimeError("external baseline returned wrong dimensions")
        return out


def _sigma2_avg(y, noise: NoiseParams) -> float:
    m_q, s_q2 = quant_moments(y, noise.q, noise.g)
    return float(np.mean(np.asarray(m_q)) / noise.alpha + noise.sigma ** 2
                 + np.mean(np.asarray(s_q2)))


def run_seed(spec: ExperimentSpec, image: np.ndarray, seed: int) -> dict:
    """One corruption + all requested methods for one seed.
    Returns method -> (psnr_db, iterations)."""
    k = parse_kernel(spec.kernel)
    y = corrupt(image, k, spec.noise, seed)
    out = {}
    for method in spec.methods:
        if method == "input":
            out[method] = (psnr(y, image), 1)
        elif method == "awgn-tv":
            info: dict = {}
            sigma = float(np.sqrt(_sigma2_avg(y, spec.noise)))
            x = awgn_solve(y, k, sigma, spec.admtv, info=info)
            out[method] = (psnr(x, image), info["iterations"])
        elif method == "prop-tv":
            x, iters = joint_solve(y, k, spec.noise, spec.admtv, spec.solver)
            out[method] = (psnr(x, image), iters)
        elif method == "prop-external":
            if not spec.external_cmd:
                raise ValueError("prop-external requires external_cmd")
            baseline = ExternalBaseline(spec.external_cmd)
            x, iters = restore(y, k, spec.noise, baseline, spec.solver)
            out[method] = (psnr(x, image), iters)
    return out


def run_experiment(spec: ExperimentSpec, image: np.ndarray,
                   workers: int | None = None) -> ResultRow:
    """Corrupt, restore and score over all seeds of a cell.

    Deterministic given the spec and image (wall time aside); failures of
    individual seeds flag the row incomplete rather than aborting.
    """
    t0 = time.perf_counter()
    per_seed = []
    incomplete = False
    if workers is None:
        workers = int(os.environ.get("PGQ_THREADS", "1"))
    if workers > 1 and len(spec.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_seed, spec, image, s) for s in spec.seeds]
            for fut in futures:
                try:
                    per_seed.append(fut.result())
                except Exception:
                    incomplete = True
                    per_seed.append(None)
    else:
        for s in spec.seeds:
            try:
                per_seed.append(run_seed(spec, image, s))
            except Exception:
                incomplete = True
                per_seed.append(None)
    wall = time.perf_counter() - t0

    results = {}
    for method in spec.methods:
        vals = [r[method][0] for r in per_seed if r is not None]
        its = [r[method][1] for r in per_seed if r is not None]
        if not vals:
            incomplete = True
            results[method] = MethodResult(float("nan"), float("nan"), float("nan"), wall)
            continue
        results[method] = MethodResult(
            psnr_mean=float(np.mean(vals)),
            psnr_std=float(np.std(vals)),
            iters_mean=float(np.mean(its)),
            wall_s=wall,
        )
    return ResultRow(spec=spec, results=results, incomplete=incomplete)


CSV_COLUMNS = ("image", "kernel", "radius", "alpha", "sigma", "q", "g",
               "method", "seed_count", "psnr_mean_db", "psnr_std_db",
               "iters_mean", "wall_s")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit_table(rows, fmt: str = "csv", include_timing: bool = True) -> str:
    """Render result rows as CSV or Markdown with a stable column order.
    include_timing=False zeroes the wall-time column so output bytes are
    reproducible across runs."""
    records = []
    for row in rows:
        sp = row.spec
        for method in sp.methods:
            r = row.results[method]
            records.append((
                sp.image_id,
                "identity" if sp.kernel == "identity" else "pillbox",
                kernel_radius(sp.kernel),
                sp.noise.alpha, sp.noise.sigma, sp.noise.q, sp.noise.g,
                method, len(sp.seeds),
                r.psnr_mean, r.psnr_std, r.iters_mean,
                r.wall_s if include_timing else 0.0,
            ))
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        lines += [",".join(_fmt(v) for v in rec) for rec in records]
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| " + " | ".join(CSV_COLUMNS) + " |",
                 "|" + "---|" * len(CSV_COLUMNS)]
        lines += ["| " + " | ".join(_fmt(v) for v in rec) + " |" for rec in records]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


# Table-1 style blocks at desk scale: 3 images x 4 radii for one
# (alpha, sigma, quantization) setting.
T1_IMAGES = ("cameraman", "lena", "boats")
T1_RADII = (5.0, 7.0, 9.0, 11.0)


def table1_specs(alpha: float, sigma: float, quantized: bool = False,
                 seeds=DEFAULT_SEEDS) -> list:
    noise = NoiseParams(alpha=alpha, sigma=sigma,
                        q=(1.0 / 256.0) if quantized else 0.0,
                        g=2.2 if quantized else 1.0)
    return [
        ExperimentSpec(image_id=img, kernel=f"pillbox:{r:g}", noise=noise,
                       seeds=tuple(seeds))
        for img in T1_IMAGES for r in T1_RADII
    ]
