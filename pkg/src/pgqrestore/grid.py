"""Image containers, convolution, boundary handling, kernels and PSNR.

Images are plain 2-D float64 numpy arrays in row-major order, nominally in
[0, 1] for clean data but unconstrained in general.  Kernels are small 2-D
arrays with odd dimensions, centred on the middle tap, normalised to sum 1.
"""

from __future__ import annotations

import numpy as np

PSNR_CAP_DB = 999.0

# subpixel sampling grid used to rasterise pill-box kernels
PILLBOX_SUBSAMPLES = 16


def as_image(a) -> np.ndarray:
    """Validate and return a 2-D float64 image array."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("image must be a non-empty 2-D array")
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains non-finite values")
    return a


def validate_kernel(k) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise ValueError("kernel must be 2-D with odd dimensions")
    if abs(k.sum() - 1.0) > 1e-12:
        raise ValueError("kernel taps must sum to 1")
    return k


def identity_kernel() -> np.ndarray:
    return np.array([[1.0]])


def make_pillbox(radius: float, subsamples: int = PILLBOX_SUBSAMPLES) -> np.ndarray:
    """Anti-aliased disc kernel of the given radius in pixels.

    Each tap is the fraction of the pixel's area inside the disc, estimated
    on a ``subsamples`` x ``subsamples`` grid of sample points, then the taps
    are normalised to sum 1.  All-zero border rings are trimmed, so e.g.
    radius 0.5 yields the 1x1 identity.
    """
    if radius < 0.5:
        raise ValueError("pill-box radius must be >= 0.5")
    R = int(np.ceil(radius))
    n = 2 * R + 1
    off = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    oy, ox = np.meshgrid(off, off, indexing="ij")
    k = np.zeros((n, n))
    r2 = radius * radius
    for i in range(n):
        for j in range(n):
            k[i, j] = np.mean((i - R + oy) ** 2 + (j - R + ox) ** 2 <= r2)
    # trim zero rings so the support is tight
    while k.shape[0] > 1 and not k[0].any() and not k[-1].any() \
            and not k[:, 0].any() and not k[:, -1].any():
        k = k[1:-1, 1:-1]
    return k / k.sum()


def kernel_otf(k: np.ndarray, shape) -> np.ndarray:
    """FFT of the kernel embedded in an array of the given shape, centred
    so that multiplication in the Fourier domain is circular convolution
    about the kernel's middle tap."""
    kh, kw = k.shape
    H, W = shape
    if kh > H or kw > W:
        raise ValueError("kernel larger than image")
    p = np.zeros(shape)
    p[:kh, :kw] = k
    p = np.roll(p, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    return np.fft.fft2(p)


def convolve(img: np.ndarray, k: np.ndarray, boundary: str = "periodic") -> np.ndarray:
    """Convolve an image with a kernel.

    ``periodic`` is exact circular convolution (computed in the Fourier
    domain).  ``extended`` pads the image by the kernel size with the
    linear-blend extension, convolves circularly, and crops back, so border
    pixels never mix content from the opposite side of the frame.
    """
    img = as_image(img)
    k = validate_kernel(k)
    if boundary == "periodic":
        return np.real(np.fft.ifft2(np.fft.fft2(img) * kernel_otf(k, img.shape)))
    if boundary == "extended":
        m = max(k.shape)
        ext = extend_blend(img, m, m, fill="linear_blend")
        out = np.real(np.fft.ifft2(np.fft.fft2(ext) * kernel_otf(k, ext.shape)))
        return crop(out, m, m)
    raise ValueError(f"unknown boundary mode: {boundary!r}")


def psnr(estimate: np.ndarray, reference: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 999 dB for zero error."""
    estimate = as_image(estimate)
    reference = as_image(reference)
    if estimate.shape != reference.shape:
        raise ValueError("image dimensions differ")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = np.mean((estimate - reference) ** 2)
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


def _blend_pad(left_edge, right_edge, m):
    """Blend values bridging right edge back to left edge over 2m samples."""
    t = np.arange(1, 2 * m + 1) / (2 * m + 1.0)
    return right_edge + (left_edge - right_edge) * t


def extend_blend(img: np.ndarray, margin_x: int, margin_y: int,
                 fill: str = "linear_blend") -> np.ndarray:
    """Pad an image so that circular convolution on the result is
    artifact-free.  margin_x widens each side, margin_y each of top and
    bottom.

    ``zeros`` pads with zeros.  ``linear_blend`` fills the pad with values
    that interpolate linearly between the intensities at opposite image
    boundaries, making the extended image continuous under periodic wrap.
    Rows are extended first, then columns of the widened image.
    """
    img = as_image(img)
    if margin_y < 0 or margin_x < 0:
        raise ValueError("margins must be non-negative")
    if fill == "zeros":
        return np.pad(img, ((margin_y, margin_y), (margin_x, margin_x)))
    if fill != "linear_blend":
        raise ValueError(f"unknown fill mode: {fill!r}")
    out = img
    if margin_x > 0:
        pad = _blend_pad(out[:, :1], out[:, -1:], margin_x)
        out = np.concatenate([pad[:, margin_x:], out, pad[:, :margin_x]], axis=1)
    if margin_y > 0:
        pad = _blend_pad(out[:1, :].T, out[-1:, :].T, margin_y).T
        out = np.concatenate([pad[margin_y:, :], out, pad[:margin_y, :]], axis=0)
    return out


def crop(img: np.ndarray, margin_x: int, margin_y: int) -> np.ndarray:
    """Remove a margin on every side; exact inverse of extend_blend."""
    img = as_image(img)
    H, W = img.shape
    if margin_y < 0 or margin_x < 0:
        raise ValueError("margins must be non-negative")
    if 2 * margin_y >= H or 2 * margin_x >= W:
        raise ValueError("margin too large for image")
    if margin_y == 0 and margin_x == 0:
        return img.copy()
    return img[margin_y:H - margin_y, margin_x:W - margin_x].copy()
