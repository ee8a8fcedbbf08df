#!/usr/bin/env python3
"""Writes a random baseline model, a tiny IDX dataset and a golden trace.

The forward pass here is written from the format description alone and serves
as the reference the C++ runtime is checked against.
"""
import argparse
import pathlib

import numpy as np

G, S, K = 4, 4, 3
GLIMPSES = 5
HIDDEN = 64
ADDED = 1
GH, GS = 128, 256
H = W = 28
CLASSES = 10
PATCH_BITS = 2
NP = G * G * K


def topology():
    t = [
        ("glimpse.patch.weight", (GH, NP)), ("glimpse.patch.bias", (GH,)),
        ("glimpse.loc.weight", (GH, 2)), ("glimpse.loc.bias", (GH,)),
        ("glimpse.out.weight", (GS, 2 * GH)), ("glimpse.out.bias", (GS,)),
        ("core.input.weight", (HIDDEN, GS)), ("core.hidden.weight", (HIDDEN, HIDDEN)),
        ("core.bias", (HIDDEN,)),
    ]
    for i in range(ADDED):
        t += [(f"core.added.{i}.weight", (HIDDEN, HIDDEN)), (f"core.added.{i}.bias", (HIDDEN,))]
    t += [("location.weight", (2, HIDDEN)), ("location.bias", (2,)),
          ("classifier.weight", (CLASSES, HIDDEN)), ("classifier.bias", (CLASSES,))]
    return t


def write_model(rng, out):
    tensors = {}
    manifest = [
        "format = mbi-ram-v1", "loc_encoding = normalized",
        f"patch_size = {G}", f"glimpse_scale = {S}", f"n_patches = {K}", f"n_glimpses = {GLIMPSES}",
        f"hidden_size = {HIDDEN}", f"added_layers = {ADDED}", f"glimpse_hidden = {GH}", f"glimpse_size = {GS}",
        f"image_height = {H}", f"image_width = {W}", "channels = 1", f"n_classes = {CLASSES}",
        f"patch_quant_bits = {PATCH_BITS}",
    ]
    blob = bytearray()
    # reverse order on purpose: the loader must not depend on tensor order
    for name, shape in reversed(topology()):
        fan_in = shape[1] if len(shape) == 2 else 16
        gain = 6.0 if name.startswith(("location", "classifier")) else 1.5
        if name.endswith("bias"):
            gain = 0.3
        a = rng.uniform(-1.0, 1.0, size=shape).astype(np.float32) * np.float32(gain / np.sqrt(fan_in))
        tensors[name] = a
        data = a.astype("<f4").tobytes()
        manifest.append(f"tensor = {name} {','.join(map(str, shape))} {len(blob)} {len(data)}")
        blob += data
    (out / "model.manifest").write_text("\n".join(manifest) + "\n")
    (out / "model.bin").write_bytes(bytes(blob))
    return tensors


def make_images(rng, n):
    imgs = np.zeros((n, H, W), dtype=np.uint8)
    for i in range(n):
        for _ in range(3):
            y0, x0 = rng.integers(2, H - 8, size=2)
            hh, ww = rng.integers(2, 8, size=2)
            imgs[i, y0:y0 + hh, x0:x0 + ww] = rng.integers(60, 256)
        imgs[i] = np.maximum(imgs[i], rng.integers(0, 40, size=(H, W)).astype(np.uint8))
    return imgs


def write_idx(out, imgs, labels):
    n = imgs.shape[0]
    hdr = np.array([0x803, n, H, W], dtype=">u4").tobytes()
    (out / "images.idx").write_bytes(hdr + imgs.tobytes())
    (out / "labels.idx").write_bytes(np.array([0x801, n], dtype=">u4").tobytes() + labels.astype(np.uint8).tobytes())


def patches(img, x, y):
    out = []
    for j in range(K):
        block = S ** j
        side = G * block
        y0, x0 = y - side // 2, x - side // 2
        pad = np.zeros((side, side))
        ys = slice(max(y0, 0), min(y0 + side, H))
        xs = slice(max(x0, 0), min(x0 + side, W))
        pad[ys.start - y0:ys.stop - y0, xs.start - x0:xs.stop - x0] = img[ys, xs]
        out.append(pad.reshape(G, block, G, block).sum(axis=(1, 3)).ravel() / (block * block))
    return np.concatenate(out)


def quantize_dequantize(p, bits):
    lo, hi = p.min(), p.max()
    if lo == hi:
        return np.full_like(p, lo)
    top = 2 ** bits - 1
    levels = np.floor((p - lo) / (hi - lo) * top + 0.5)  # values are >= 0: half away from zero
    return lo + levels * ((hi - lo) / top)


def forward(t, img, x, y, h):
    w = {k: v.astype(np.float64) for k, v in t.items()}
    relu = lambda v: np.maximum(v, 0.0)
    p = quantize_dequantize(patches(img, x, y), PATCH_BITS)
    loc = np.array([2.0 * x / (W - 1) - 1.0, 2.0 * y / (H - 1) - 1.0])
    hp = relu(w["glimpse.patch.weight"] @ p + w["glimpse.patch.bias"])
    hl = relu(w["glimpse.loc.weight"] @ loc + w["glimpse.loc.bias"])
    g = relu(w["glimpse.out.weight"] @ np.concatenate([hp, hl]) + w["glimpse.out.bias"])
    h = relu(w["core.input.weight"] @ g + w["core.hidden.weight"] @ h + w["core.bias"])
    for i in range(ADDED):
        h = relu(w[f"core.added.{i}.weight"] @ h + w[f"core.added.{i}.bias"])
    l = np.tanh(w["location.weight"] @ h + w["location.bias"])
    logits = w["classifier.weight"] @ h + w["classifier.bias"]
    nx = int(np.clip(np.floor((l[0] + 1) / 2 * (W - 1) + 0.5), 0, W - 1))
    ny = int(np.clip(np.floor((l[1] + 1) / 2 * (H - 1) + 0.5), 0, H - 1))
    return h, nx, ny, logits


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--images", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    tensors = write_model(rng, args.out)
    imgs = make_images(rng, args.images)
    labels = rng.integers(0, CLASSES, size=args.images)
    write_idx(args.out, imgs, labels)

    header = ["image", "glimpse", "loc_x", "loc_y", "next_x", "next_y", "pred"]
    header += [f"h{i}" for i in range(HIDDEN)] + [f"logit{i}" for i in range(CLASSES)]
    lines = [",".join(header)]
    for i in range(args.images):
        img = (imgs[i].astype(np.float32) / np.float32(255.0)).astype(np.float64)
        x, y = (3 + 7 * i) % W, (5 + 11 * i) % H
        h = np.zeros(HIDDEN)
        for t in range(GLIMPSES):
            h, nx, ny, logits = forward(tensors, img, x, y, h)
            row = [i, t, x, y, nx, ny, int(np.argmax(logits))]
            lines.append(",".join(map(str, row)) + "," + ",".join(f"{v:.9g}" for v in np.concatenate([h, logits])))
            x, y = nx, ny
    (args.out / "golden.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
