"""Image deconvolution and denoising under mixed Poisson-Gaussian noise
and quantization error.

The package is organised around a pluggable AWGN baseline estimator: any
routine that solves a Gaussian-noise restoration problem can be wrapped in
the :class:`~pgqrestore.solver.BaselineEstimator` interface and driven by
the variable-splitting outer loop in :mod:`pgqrestore.solver`.  A complete
ADM-TV baseline (and its fused "joint" variant) lives in
:mod:`pgqrestore.admtv`.
"""

from .grid import (
    convolve,
    crop,
    extend_blend,
    identity_kernel,
    make_pillbox,
    psnr,
)
from .noise import (
    NoiseParams,
    QuantMoments,
    corrupt,
    lp_loss,
    lpg_loss,
    pgq_loss,
    quant_moments,
    quantize,
)
from .solver import (
    GAMMA_MAX,
    BaselineEstimator,
    SolverConfig,
    beta_from_noise,
    lambda_update,
    restore,
    step_size_map,
    stopping_check,
    tau_update,
)
from .admtv import (
    AdmTvBaseline,
    AdmTvParams,
    awgn_solve,
    joint_solve,
    shrink_gradients,
    x_fourier_update,
)

__all__ = [
    "AdmTvBaseline",
    "AdmTvParams",
    "BaselineEstimator",
    "GAMMA_MAX",
    "NoiseParams",
    "QuantMoments",
    "SolverConfig",
    "awgn_solve",
    "beta_from_noise",
    "convolve",
    "corrupt",
    "crop",
    "extend_blend",
    "identity_kernel",
    "joint_solve",
    "lambda_update",
    "lp_loss",
    "lpg_loss",
    "make_pillbox",
    "pgq_loss",
    "psnr",
    "quant_moments",
    "quantize",
    "restore",
    "shrink_gradients",
    "step_size_map",
    "stopping_check",
    "tau_update",
    "x_fourier_update",
]

__version__ = "0.1.0"
