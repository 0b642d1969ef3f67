#!/usr/bin/env python3
"""Expand the committed uint8 MNIST subset into ISCHVEC1 vector files.

usage: expand_mnist_fixture.py <data dir> <output dir>

Writes mnist_{train,query}.vec (pixels / 255 as float32) and copies the
label files next to them.
"""

import gzip
import pathlib
import shutil
import struct
import sys

DIM = 784


def expand(src: pathlib.Path, dst: pathlib.Path, name: str):
    pixels = gzip.decompress((src / f"{name}_images.u8.gz").read_bytes())
    if len(pixels) % DIM:
        sys.exit(f"{name}: {len(pixels)} bytes is not a multiple of {DIM}")
    n = len(pixels) // DIM
    values = struct.pack(f"<{len(pixels)}f", *(p / 255.0 for p in pixels))
    tmp = dst / f"{name}.vec.tmp"
    tmp.write_bytes(b"ISCHVEC1" + struct.pack("<II", n, DIM) + values)
    tmp.replace(dst / f"{name}.vec")
    shutil.copyfile(src / f"{name}_labels.txt", dst / f"{name}_labels.txt")


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, dst = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    for name in ("mnist_train", "mnist_query"):
        expand(src, dst, name)


if __name__ == "__main__":
    main()
