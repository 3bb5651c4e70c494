#!/usr/bin/env python3
"""Build a small IDX-format MNIST sample from the `mnist` npm package.

The npm package ships 10,000 real MNIST digits as normalized JSON arrays.
This script restores the 8-bit pixels, shuffles with a fixed seed and writes
an 8,000 / 2,000 train/test split in the standard gzip'd IDX layout, so the
regular loader reads it like the canonical distribution.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/make_mnist_sample.py package/src/digits data/mnist-sample
"""
import gzip
import json
import pathlib
import struct
import sys

import numpy as np

TRAIN_COUNT = 8000


def write_images(path, images):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main(src, dst):
    src, dst = pathlib.Path(src), pathlib.Path(dst)
    images, labels = [], []
    for digit in range(10):
        raw = np.asarray(json.loads((src / f"{digit}.json").read_text())["data"])
        raw = np.rint(raw * 255.0).reshape(-1, 784)
        images.append(raw)
        labels.append(np.full(len(raw), digit))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.RandomState(20190801).permutation(len(labels))
    images, labels = images[order], labels[order]

    dst.mkdir(parents=True, exist_ok=True)
    write_images(dst / "train-images-idx3-ubyte.gz", images[:TRAIN_COUNT])
    write_labels(dst / "train-labels-idx1-ubyte.gz", labels[:TRAIN_COUNT])
    write_images(dst / "t10k-images-idx3-ubyte.gz", images[TRAIN_COUNT:])
    write_labels(dst / "t10k-labels-idx1-ubyte.gz", labels[TRAIN_COUNT:])
    print(f"wrote {TRAIN_COUNT} train / {len(labels) - TRAIN_COUNT} test samples to {dst}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
