"""PFM and PGM image file readers and writers.

PFM grayscale ("Pf" header, little-endian scale -1.0) is the canonical
float interchange format; PGM (P5, maxval 255 or 65535) covers standard
8/16-bit test images, mapped to [0, 1] on import.
"""

from __future__ import annotations

import numpy as np


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM file")
        dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        data = np.frombuffer(f.read(width * height * 4),
                             dtype="<f4" if scale < 0 else ">f4")
    if data.size != width * height:
        raise ValueError(f"{path}: truncated PFM payload")
    img = data.reshape(height, width).astype(np.float64)
    return np.flipud(img).copy()  # PFM rows are stored bottom-up


def write_pfm(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PFM writer expects a 2-D image")
    height, width = img.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{width} {height}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.flipud(img).astype("<f4").tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) file, mapping [0, maxval] to [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM file")
    # parse header tokens, skipping comment lines
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    if maxval < 256:
        raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    else:
        raw = np.frombuffer(data, dtype=">u2", count=width * height, offset=pos)
    if raw.size != width * height:
        raise ValueError(f"{path}: truncated PGM payload")
    return raw.reshape(height, width).astype(np.float64) / maxval


def write_pgm(path, img: np.ndarray, maxval: int = 255) -> None:
    """Write [0, 1] image data as binary PGM, clipping out-of-range values."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM writer expects a 2-D image")
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    q = np.clip(np.rint(img * maxval), 0, maxval)
    height, width = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n{maxval}\n".encode())
        f.write(q.astype(np.uint8 if maxval == 255 else ">u2").tobytes())


def read_image(path) -> np.ndarray:
    """Dispatch on file magic: PFM or PGM."""
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"Pf":
        return read_pfm(path)
    if magic == b"P5":
        return read_pgm(path)
    raise ValueError(f"{path}: unrecognised image format")
