#!/usr/bin/env python3
"""Fetch and convert the benchmark test images to data/images/*.pgm.

The benchmark uses three standard grayscale test images.  The exact scans
matter: they were selected by calibrating the forward model's Input-row
PSNR against the reference results (see data/images/README.md), and the
converted PGM files are pinned by sha256 in data/images/CHECKSUMS.

Sources (public GitHub mirrors of the classic scans):
  cameraman  256x256  github.com/cszn/DnCNN            testsets/Set12/01.png
  lena       512x512  github.com/mohammadimtiazz/standard-test-images-for-Image-Processing
                      standard_test_images/lena.bmp (luma conversion)
  boats      512x512  same repository, standard_test_images/boat.png

The "fluorescent cells" image used by some published denoising tables has
no stable public mirror; cells referencing it are skipped by the harness
unless you convert your own copy to data/images/fluocells.pgm.

Usage: python scripts/prepare_images.py [--verify-only]
Requires network access and Pillow unless --verify-only is given.
"""

import argparse
import hashlib
import io
import os
import sys
import tarfile
import urllib.request

HERE = os.path.dirname(os.path.abspath(__file__))
IMAGE_DIR = os.path.join(HERE, "..", "data", "images")

SOURCES = {
    "cameraman.pgm": (
        "https://github.com/cszn/DnCNN/raw/master/testsets/Set12/01.png",
        "L",
    ),
    "lena.pgm": (
        "https://github.com/mohammadimtiazz/standard-test-images-for-Image-Processing"
        "/raw/master/standard_test_images/lena.bmp",
        "L",
    ),
    "boats.pgm": (
        "https://github.com/mohammadimtiazz/standard-test-images-for-Image-Processing"
        "/raw/master/standard_test_images/boat.png",
        "L",
    ),
}


def load_checksums():
    sums = {}
    with open(os.path.join(IMAGE_DIR, "CHECKSUMS")) as f:
        for line in f:
            digest, name = line.split()
            sums[name] = digest
    return sums


def verify():
    sums = load_checksums()
    ok = True
    for name, digest in sums.items():
        path = os.path.join(IMAGE_DIR, name)
        if not os.path.exists(path):
            print(f"MISSING  {name}")
            ok = False
            continue
        actual = hashlib.sha256(open(path, "rb").read()).hexdigest()
        status = "OK" if actual == digest else "MISMATCH"
        ok = ok and actual == digest
        print(f"{status:8s} {name}")
    return ok


def fetch():
    import numpy as np
    from PIL import Image

    sys.path.insert(0, os.path.join(HERE, "..", "src"))
    from pgqrestore.io_files import write_pgm

    os.makedirs(IMAGE_DIR, exist_ok=True)
    for name, (url, mode) in SOURCES.items():
        print(f"fetching {name} from {url}")
        data = urllib.request.urlopen(url, timeout=60).read()
        img = Image.open(io.BytesIO(data)).convert(mode)
        arr = np.asarray(img).astype(np.float64) / 255.0
        write_pgm(os.path.join(IMAGE_DIR, name), arr)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--verify-only", action="store_true")
    args = ap.parse_args()
    if not args.verify_only:
        fetch()
    if not verify():
        sys.exit(1)


if __name__ == "__main__":
    main()
