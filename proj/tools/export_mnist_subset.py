#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Convert the 5000-digit MNIST sample shipped with mlxtend into IDX files.

The source CSV has 784 pixel columns followed by the label and is sorted by
label. Rows are shuffled with a fixed seed and split into train/test parts so
the output is byte-for-byte reproducible.

    python3 tools/export_mnist_subset.py path/to/mnist_5k.csv.gz data/mnist5k
"""
import argparse
import gzip
import pathlib
import struct

import numpy as np


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("out_dir")
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=20220101)
    args = ap.parse_args()

    with gzip.open(args.csv, "rt") as f:
        table = np.loadtxt(f, delimiter=",", dtype=np.int64)
    pixels = table[:, :784].reshape(-1, 28, 28)
    labels = table[:, 784]
    order = np.random.RandomState(args.seed).permutation(len(labels))
    pixels, labels = pixels[order], labels[order]

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    split = len(labels) - args.test
    write_idx_images(out / "train-images-idx3-ubyte", pixels[:split])
    write_idx_labels(out / "train-labels-idx1-ubyte", labels[:split])
    write_idx_images(out / "t10k-images-idx3-ubyte", pixels[split:])
    write_idx_labels(out / "t10k-labels-idx1-ubyte", labels[split:])


if __name__ == "__main__":
    main()
