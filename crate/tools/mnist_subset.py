#!/usr/bin/env python3
"""Build an IDX-format MNIST subset from the digit JSON files shipped in the
npm `mnist` package (10k real MNIST digits stored as pixel/255 rounded to
three decimals, which round(v * 255) recovers exactly).

usage: mnist_subset.py <package/src/digits> <out_dir> [count]
"""
import json
import struct
import sys
from pathlib import Path


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    count = int(sys.argv[3]) if len(sys.argv) > 3 else 1000
    digits = []
    for d in range(10):
        flat = json.loads((src / f"{d}.json").read_text())["data"]
        digits.append([flat[k : k + 784] for k in range(0, len(flat), 784)])
    images, labels = [], []
    k = 0
    while len(images) < count:
        for d in range(10):
            if len(images) == count:
                break
            images.append(bytes(round(v * 255) for v in digits[d][k]))
            labels.append(d)
        k += 1
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, count, 28, 28))
        for img in images:
            f.write(img)
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, count))
        f.write(bytes(labels))


if __name__ == "__main__":
    main()
