"""Counter-based random sampling for the corruption simulator.

Every variate is a pure function of (seed, pixel index, stream, draw
counter), so pixels can be generated in any order, in any number of
threads, with bit-identical results.  The generator is a SplitMix64-style
finalizer chain over 64-bit integers; Poisson sampling uses inversion by
sequential search for small means and Hormann's PTRS transformed rejection
for large means, so no Gaussian approximation is involved at any mean.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, ndtri

# stream ids, one independent uniform sequence per purpose
STREAM_POISSON = 0
STREAM_GAUSS = 1

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4B5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# threshold between sequential-search and transformed-rejection Poisson
_PTRS_CUTOFF = 30.0
# sequential search never needs more terms than this for means < cutoff
_SEARCH_CAP = 220


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK
    z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK
    return z ^ (z >> np.uint64(31))


def uniform(seed: int, pixel: np.ndarray, stream: int, draw) -> np.ndarray:
    """Uniform double in (0, 1) for each (seed, pixel, stream, draw) tuple."""
    pixel = np.asarray(pixel, dtype=np.uint64)
    draw = np.asarray(draw, dtype=np.uint64)
    h = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _mix(pixel))
    h = _mix(h ^ _mix((np.uint64(stream) << np.uint64(32)) ^ draw))
    # 53-bit mantissa, offset by half an ulp so 0 is excluded
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def _poisson_search(lam, u):
    """Poisson inversion by sequential search; one uniform per variate."""
    p = np.exp(-lam)
    cum = p.copy()
    k = np.zeros_like(lam)
    active = u > cum
    n = 1
    while active.any() and n <= _SEARCH_CAP:
        p = np.where(active, p * lam / n, p)
        cum = np.where(active, cum + p, cum)
        k = np.where(active, float(n), k)
        active = active & (u > cum)
        n += 1
    return k


def _poisson_ptrs(lam, seed, pixel):
    """Hormann's PTRS transformed-rejection sampler, vectorised.

    Each attempt consumes two uniforms from the pixel's counter stream;
    acceptance is decided per pixel so the draw sequence stays
    order-independent.
    """
    loglam = np.log(lam)
    b = 0.931 + 2.53 * np.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)

    k = np.zeros_like(lam)
    pending = np.ones(lam.shape, dtype=bool)
    for attempt in range(64):
        if not pending.any():
            break
        u = uniform(seed, pixel, STREAM_POISSON, np.full(lam.shape, 2 * attempt)) - 0.5
        v = uniform(seed, pixel, STREAM_POISSON, np.full(lam.shape, 2 * attempt + 1))
        us = 0.5 - np.abs(u)
        cand = np.floor((2.0 * a / us + b) * u + lam + 0.43)

        accept_fast = (us >= 0.07) & (v <= v_r)
        valid = (cand >= 0) & ~((us < 0.013) & (v > us))
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = np.log(v * inv_alpha / (a / (us * us) + b))
            rhs = -lam + cand * loglam - gammaln(cand + 1.0)
            accept_slow = valid & (lhs <= rhs)
        accept = pending & (accept_fast | accept_slow)
        k = np.where(accept, cand, k)
        pending = pending & ~accept
    if pending.any():
        # unreachable in practice; acceptance probability per attempt > 0.9
        k = np.where(pending, np.floor(lam), k)
    return k


def poisson(lam: np.ndarray, seed: int, pixel: np.ndarray) -> np.ndarray:
    """Poisson variates with mean ``lam`` keyed by (seed, pixel)."""
    lam = np.asarray(lam, dtype=np.float64)
    out = np.zeros_like(lam)
    small = lam < _PTRS_CUTOFF
    zero = lam <= 0.0
    small = small & ~zero
    if small.any():
        u = uniform(seed, pixel[small], STREAM_POISSON, np.zeros(small.sum()))
        out[small] = _poisson_search(lam[small], u)
    large = ~small & ~zero
    if large.any():
        out[large] = _poisson_ptrs(lam[large], seed, pixel[large])
    return out


def gaussian(sigma: float, shape, seed: int, pixel: np.ndarray) -> np.ndarray:
    """Zero-mean Gaussian variates via the inverse normal CDF."""
    if sigma == 0.0:
        return np.zeros(shape)
    u = uniform(seed, pixel, STREAM_GAUSS, np.zeros(pixel.shape))
    return sigma * ndtri(u).reshape(shape)
