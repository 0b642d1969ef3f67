#!/usr/bin/env python3
"""Rebuild the committed MNIST subset under data/.

Source: the original IDX files bundled in the npm package `mnist-data`
1.2.6 (package/data/*-idx?-ubyte).

  database/training set: the first 10,000 images of the training split
  queries:               the first 50 images of each class in the test split

The two splits are disjoint. Pixels are kept as uint8.
Needs `npm` with registry access unless --idx-dir points at an extracted copy.
"""

import argparse
import gzip
import pathlib
import struct
import subprocess
import tarfile
import tempfile

DIM = 784
TRAIN_COUNT = 10_000
QUERIES_PER_CLASS = 50


def fetch(work: pathlib.Path) -> pathlib.Path:
    subprocess.run(["npm", "pack", "mnist-data@1.2.6"], cwd=work, check=True, stdout=subprocess.DEVNULL)
    with tarfile.open(work / "mnist-data-1.2.6.tgz") as tar:
        tar.extractall(work, filter="data")
    return work / "package" / "data"


def read_images(path: pathlib.Path):
    raw = path.read_bytes()
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    assert magic == 2051 and rows * cols == DIM, path
    return [raw[16 + i * DIM:16 + (i + 1) * DIM] for i in range(n)]


def read_labels(path: pathlib.Path):
    raw = path.read_bytes()
    magic, n = struct.unpack(">II", raw[:8])
    assert magic == 2049, path
    return list(raw[8:8 + n])


def write_set(out: pathlib.Path, name: str, rows, labels):
    # mtime=0 keeps the archive byte-stable across runs.
    with gzip.GzipFile(out / f"{name}_images.u8.gz", "wb", compresslevel=9, mtime=0) as g:
        g.write(b"".join(rows))
    (out / f"{name}_labels.txt").write_text("".join(f"{l}\n" for l in labels))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path(__file__).resolve().parent.parent / "data")
    ap.add_argument("--idx-dir", type=pathlib.Path, help="directory holding the four IDX files")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        idx = args.idx_dir or fetch(pathlib.Path(tmp))
        train = read_images(idx / "train-images-idx3-ubyte")[:TRAIN_COUNT]
        train_labels = read_labels(idx / "train-labels-idx1-ubyte")[:TRAIN_COUNT]
        test = read_images(idx / "t10k-images-idx3-ubyte")
        test_labels = read_labels(idx / "t10k-labels-idx1-ubyte")

    picked = {c: [] for c in range(10)}
    for img, lab in zip(test, test_labels):
        if len(picked[lab]) < QUERIES_PER_CLASS:
            picked[lab].append(img)
    query = [img for c in range(10) for img in picked[c]]
    query_labels = [c for c in range(10) for _ in picked[c]]

    args.out.mkdir(parents=True, exist_ok=True)
    write_set(args.out, "mnist_train", train, train_labels)
    write_set(args.out, "mnist_query", query, query_labels)
    print(f"train {len(train)}  query {len(query)}  -> {args.out}")


if __name__ == "__main__":
    main()
