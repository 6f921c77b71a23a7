"""Noise likelihoods, quantization moments and the forward corruption
simulator.

The observation model is: blur the clean image, draw a scaled Poisson
variate per pixel (shot noise), add zero-mean Gaussian read noise, clamp
at zero, then quantize with step q in the gamma-corrected domain.  The
likelihood of a blurred intensity given an observation combines the
shifted-Poisson approximation of the Poisson+Gaussian mixture with the
conditional moments of the quantizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .grid import as_image, convolve, validate_kernel


@dataclass(frozen=True)
class NoiseParams:
    """Full observation-model parameters.

    alpha: Poisson scale (photons per unit intensity), > 0.
    sigma: Gaussian standard deviation in intensity units, >= 0.
    q:     quantization step in the gamma-corrected domain; 0 disables.
    g:     gamma exponent (1 = linear data, 2.2 typical for sRGB), >= 1.
    """

    alpha: float
    sigma: float = 0.0
    q: float = 0.0
    g: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.q < 0:
            raise ValueError("q must be non-negative")
        if self.g < 1:
            raise ValueError("g must be >= 1")


@dataclass(frozen=True)
class QuantMoments:
    """Conditional mean and variance of the pre-quantization value given
    the quantized observation."""

    m_q: float
    sigma_q2: float


def lp_loss(x_k, y_k, alpha):
    """Poisson negative log-likelihood (up to a constant):
    alpha*x_k - alpha*y_k*log(x_k).  Convex in x_k, minimised at x_k = y_k.
    """
    x_k = np.asarray(x_k, dtype=np.float64)
    if np.any(x_k <= 0):
        raise ValueError("lp_loss requires x_k > 0")
    out = alpha * x_k - alpha * np.asarray(y_k) * np.log(x_k)
    return float(out) if out.ndim == 0 else out


def lpg_loss(x_k, y_tilde, alpha, sigma):
    """Shifted-Poisson approximation of the Poisson+Gaussian likelihood."""
    shift = alpha * sigma * sigma
    x = np.asarray(x_k, dtype=np.float64) + shift
    if np.any(x <= 0):
        raise ValueError("lpg_loss requires x_k + alpha*sigma^2 > 0")
    return lp_loss(x, np.asarray(y_tilde) + shift, alpha)


def _interval_moments(a, b, g):
    """Moments of v**g for v uniform on [a, b]."""
    w = b - a
    gp = g + 1.0
    g2 = 2.0 * g + 1.0
    m = (np.power(b, gp) - np.power(a, gp)) / (w * gp)
    m2 = (np.power(b, g2) - np.power(a, g2)) / (w * g2)
    return m, np.maximum(m2 - m * m, 0.0)


def quant_moments(y, q, g):
    """Conditional mean and variance of the analog value given its
    quantized code, under a uniform in-bin distribution in the gamma
    domain.

    For g = 1 the variance is exactly q^2/12 independent of y.  The lowest
    bin (codes quantized to 0) is clamped to [0, q/2] so the moments stay
    defined and non-negative.
    """
    y_arr = np.asarray(y, dtype=np.float64)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    if q == 0.0:
        m, v = y_arr.copy(), np.zeros_like(y_arr)
    else:
        u = np.power(np.maximum(y_arr, 0.0), 1.0 / g)
        a = np.maximum(u - q / 2.0, 0.0)
        b = np.where(u < q / 2.0, q / 2.0, u + q / 2.0)
        if g == 1.0:
            # uniform in-bin: exact forms, free of the cancellation in the
            # general power expressions
            m = 0.5 * (a + b)
            v = (b - a) ** 2 / 12.0
        else:
            m, v = _interval_moments(a, b, g)
    if scalar:
        return QuantMoments(float(m[0]), float(v[0]))
    return m, v


def pgq_loss(x_k, y, params: NoiseParams):
    """Overall likelihood: shifted-Poisson at the quantizer's conditional
    mean, with the quantization variance folded into the Gaussian term."""
    qm = quant_moments(y, params.q, params.g)
    if isinstance(qm, QuantMoments):
        m_q, s_q2 = qm.m_q, qm.sigma_q2
    else:
        m_q, s_q2 = qm
    sigma_eff = np.sqrt(params.sigma ** 2 + s_q2)
    return lpg_loss(x_k, m_q, params.alpha, sigma_eff)


def quantize(y_tilde, q, g):
    """Round to the nearest multiple of q in the gamma domain (half away
    from zero), then map back.  q = 0 is the identity."""
    y_arr = np.asarray(y_tilde, dtype=np.float64)
    if np.any(y_arr < 0):
        raise ValueError("quantize requires non-negative input")
    if q == 0.0:
        out = y_arr.copy()
    else:
        u = np.power(y_arr, 1.0 / g) / q
        # numpy rounds halves to even; the convention here is half away
        # from zero (inputs are non-negative, so round up at .5)
        out = np.power(np.floor(u + 0.5) * q, g)
    return float(out) if out.ndim == 0 else out


def corrupt(x: np.ndarray, k: np.ndarray, params: NoiseParams, seed: int) -> np.ndarray:
    """Simulate an observation of a clean image: blur, shot noise, read
    noise, zero clamp, quantization.  Deterministic for a fixed seed and
    independent per pixel (counter-based RNG), so results do not depend on
    evaluation order or thread count.
    """
    x = as_image(x)
    k = validate_kernel(k)
    x_k = convolve(x, k, boundary="periodic")
    lam = params.alpha * np.maximum(x_k, 0.0)
    pix = np.arange(x.size, dtype=np.uint64)
    shot = rng.poisson(lam.ravel(), seed, pix).reshape(x.shape) / params.alpha
    z = rng.gaussian(params.sigma, x.shape, seed, pix)
    y_tilde = np.maximum(shot + z, 0.0)
    return quantize(y_tilde, params.q, params.g)


def exact_mixture_nll(x_k: float, y_tilde: float, alpha: float, sigma: float,
                      truncation: int | None = None) -> float:
    """Negative log of the exact Poisson-Gaussian mixture density,
    evaluated by truncated summation with log-sum-exp.  Test oracle only:
    the shifted-Poisson approximation is checked against this.
    """
    if x_k <= 0:
        raise ValueError("x_k must be positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive for the mixture")
    lam = alpha * x_k
    if truncation is None:
        # cover the Poisson bulk and the Gaussian reach around y_tilde
        span = 12.0 * math.sqrt(lam) + 12.0 * alpha * sigma + 30.0
        lo = max(0, int(min(lam, alpha * y_tilde) - span))
        hi = int(max(lam, alpha * y_tilde) + span)
    else:
        lo, hi = 0, int(truncation)
    r = np.arange(lo, hi + 1, dtype=np.float64)
    log_terms = (r * math.log(lam) - lam - gammaln_vec(r + 1.0)
                 - (y_tilde - r / alpha) ** 2 / (2.0 * sigma * sigma))
    m = log_terms.max()
    return -(m + math.log(np.sum(np.exp(log_terms - m))))


def gammaln_vec(v):
    from scipy.special import gammaln
    return gammaln(v)
