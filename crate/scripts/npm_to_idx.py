#!/usr/bin/env python3
"""Convert the digit/clothing JSON shipped in the `mnist` and `fashion-mnist`
npm packages into IDX files (train/test split per class).

usage: npm_to_idx.py PACKAGE_SRC_DIR OUT_DIR --train K --test K
"""
import argparse
import json
import struct
from pathlib import Path

SIDE = 28


def load_class(path):
    data = json.loads(Path(path).read_text())["data"]
    if data and isinstance(data[0], list):
        # fashion-mnist: one 784-list of 0..255 per image
        return [bytes(int(v) for v in img) for img in data]
    # mnist: flat list of floats normalized to [0,1], three decimals
    n = len(data) // (SIDE * SIDE)
    out = []
    for k in range(n):
        chunk = data[k * SIDE * SIDE:(k + 1) * SIDE * SIDE]
        out.append(bytes(min(255, max(0, round(v * 255))) for v in chunk))
    return out


def write_idx(out_dir, prefix, images, labels):
    with open(out_dir / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), SIDE, SIDE))
        for img in images:
            f.write(img)
    with open(out_dir / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("src")
    ap.add_argument("out")
    ap.add_argument("--train", type=int, default=300)
    ap.add_argument("--test", type=int, default=150)
    args = ap.parse_args()

    src = Path(args.src)
    sub = "digits" if (src / "digits").exists() else "clothes"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    train, test = [], []
    for c in range(10):
        imgs = load_class(src / sub / f"{c}.json")
        need = args.train + args.test
        if len(imgs) < need:
            raise SystemExit(f"class {c}: {len(imgs)} images < {need}")
        train += [(img, c) for img in imgs[:args.train]]
        test += [(img, c) for img in imgs[args.train:need]]

    # interleave classes so files look like the upstream distribution
    def interleave(items, per):
        return [items[c * per + k] for k in range(per) for c in range(10)]

    train = interleave(train, args.train)
    test = interleave(test, args.test)
    write_idx(out, "train", [i for i, _ in train], [l for _, l in train])
    write_idx(out, "t10k", [i for i, _ in test], [l for _, l in test])


if __name__ == "__main__":
    main()
