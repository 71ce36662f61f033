#!/usr/bin/env python3
"""Export VGG-19 weights to the manifest + raw-blob format and emit golden fixtures.

Weights come either from torchvision's pretrained VGG-19 (``--source torchvision``,
needs the checkpoint to be downloadable) or from the deterministic synthetic
generator shared with ``include/lexivis/synthetic_weights.hpp``
(``--source synthetic``).

Fixtures: the 224x224 ROI as PNG, the normalized input tensor, the first and last
channel of every post-ReLU conv activation, and the full word-count table
(quantile 0.9, strict >) computed from torch activations.
"""

import argparse
import hashlib
import json
import math
import pathlib

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

CHANNELS = [64, 64, 128, 128, 256, 256, 256, 256, 512, 512, 512, 512, 512, 512, 512, 512]
POOL_AFTER = {2, 4, 8, 12, 16}
MEAN = [0.485, 0.456, 0.406]
STD = [0.229, 0.224, 0.225]
M64 = (1 << 64) - 1


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def splitmix_stream(state: int, count: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        golden = np.uint64(0x9E3779B97F4A7C15)
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(state & M64) + steps * golden
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def synthetic_values(seed: int, layer: int, part: int, count: int, bound: float) -> np.ndarray:
    z = splitmix_stream(seed * 1000003 + layer * 2 + part, count)
    u = (z >> np.uint64(40)).astype(np.float64) * 2.0**-24
    return ((2.0 * u - 1.0) * bound).astype(np.float32)


def synthetic_layers(seed: int):
    layers, cin = [], 3
    for i, cout in enumerate(CHANNELS, start=1):
        fan_in = cin * 9
        w = synthetic_values(seed, i, 0, cout * fan_in, math.sqrt(6.0 / fan_in)).reshape(cout, cin, 3, 3)
        b = synthetic_values(seed, i, 1, cout, 1.0 / math.sqrt(fan_in))
        layers.append((w, b))
        cin = cout
    return layers


def torchvision_layers():
    import torchvision

    model = torchvision.models.vgg19(weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1)
    convs = [m for m in model.features if isinstance(m, torch.nn.Conv2d)]
    if [c.out_channels for c in convs] != CHANNELS:
        raise SystemExit("export error: unexpected VGG-19 conv schedule")
    return [(c.weight.detach().numpy().astype(np.float32), c.bias.detach().numpy().astype(np.float32)) for c in convs]


def write_weights(layers, out: pathlib.Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    entries, block, within, cin = [], 1, 1, 3
    for i, (w, b) in enumerate(layers, start=1):
        cout = CHANNELS[i - 1]
        if w.shape != (cout, cin, 3, 3) or b.shape != (cout,):
            raise SystemExit(f"export error: layer {i} shape {w.shape}")
        name = f"conv{block}_{within}"
        blobs = {}
        for part, arr, shape in (("weight", w, [cout, cin, 3, 3]), ("bias", b, [cout])):
            data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            path = f"{name}.{part}.bin"
            (out / path).write_bytes(data)
            blobs[part] = {"path": path, "dtype": "f32le", "shape": shape, "sha256": sha256(data)}
        entries.append({"name": name, "kind": "conv", "in_channels": cin, "out_channels": cout,
                        "kernel": 3, "stride": 1, "padding": 1,
                        "weights": blobs["weight"], "bias": blobs["bias"]})
        entries.append({"name": f"relu{block}_{within}", "kind": "relu"})
        within += 1
        if i in POOL_AFTER:
            entries.append({"name": f"pool{block}", "kind": "maxpool"})
            block, within = block + 1, 1
        cin = cout
    manifest = {
        "format_version": 1,
        "arch_name": "vgg19",
        "normalization": {"mean": MEAN, "std": STD, "channel_order": "rgb", "pixel_scale": 255.0},
        "layers": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def normalize(rgb: np.ndarray) -> np.ndarray:
    x = rgb.astype(np.float32) / np.float32(255.0)
    mean = np.array(MEAN, dtype=np.float32)
    std = np.array(STD, dtype=np.float32)
    return ((x - mean) / std).transpose(2, 0, 1).copy()


def nearest_rank(n: int, q: float) -> int:
    r = q * n
    return min(max(math.ceil(r - 1e-9 * max(1.0, r)), 1), n)


def word_count(plane: np.ndarray, q: float = 0.9) -> int:
    flat = np.sort(plane.ravel())
    threshold = flat[nearest_rank(flat.size, q) - 1]
    return int((plane > threshold).sum())


def forward(layers, x: np.ndarray):
    torch.set_num_threads(1)
    t = torch.from_numpy(x).unsqueeze(0)
    maps = []
    with torch.no_grad():
        for i, (w, b) in enumerate(layers, start=1):
            t = F.relu(F.conv2d(t, torch.from_numpy(w), torch.from_numpy(b), stride=1, padding=1))
            maps.append(t[0].numpy().copy())
            if i in POOL_AFTER and i < len(layers):
                t = F.max_pool2d(t, 2, 2)
    return maps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--source", choices=["synthetic", "torchvision"], default="synthetic")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--image", required=True)
    ap.add_argument("--roi", default="0,0", help="top-left X,Y of the 224x224 ROI")
    ap.add_argument("--weights-out", required=True)
    ap.add_argument("--fixtures-out", required=True)
    args = ap.parse_args()

    layers = synthetic_layers(args.seed) if args.source == "synthetic" else torchvision_layers()
    write_weights(layers, pathlib.Path(args.weights_out))

    out = pathlib.Path(args.fixtures_out)
    out.mkdir(parents=True, exist_ok=True)
    x0, y0 = (int(v) for v in args.roi.split(","))
    rgb = np.asarray(Image.open(args.image).convert("RGB"))[y0:y0 + 224, x0:x0 + 224]
    if rgb.shape != (224, 224, 3):
        raise SystemExit("ROI does not fit inside the image")
    Image.fromarray(rgb).save(out / "roi.png")

    x = normalize(rgb)
    input_bytes = x.astype("<f4").tobytes()
    (out / "input.bin").write_bytes(input_bytes)

    maps = forward(layers, x)
    activations = []
    for i, m in enumerate(maps, start=1):
        channels = [0, m.shape[0] - 1]
        data = np.ascontiguousarray(m[channels], dtype="<f4").tobytes()
        path = f"act_{i:02d}.bin"
        (out / path).write_bytes(data)
        activations.append({"layer": i, "channels": channels, "shape": [2, m.shape[1], m.shape[2]],
                            "path": path, "sha256": sha256(data)})

    rows = ["layer,kernel,count"]
    for i, m in enumerate(maps, start=1):
        rows += [f"{i},{k},{word_count(m[k])}" for k in range(m.shape[0])]
    counts = "\n".join(rows) + "\n"
    (out / "counts.csv").write_text(counts)

    meta = {
        "weights": {"source": args.source, "seed": args.seed if args.source == "synthetic" else None},
        "image": {"path": "roi.png", "origin": args.image.split("/")[-1], "roi": [x0, y0]},
        "input": {"path": "input.bin", "shape": [3, 224, 224], "sha256": sha256(input_bytes)},
        "activations": activations,
        "counts": {"path": "counts.csv", "threshold": "quantile:0.9", "strict": True, "rows": len(rows) - 1,
                   "sha256": sha256(counts.encode())},
    }
    (out / "fixtures.json").write_text(json.dumps(meta, indent=2) + "\n")


if __name__ == "__main__":
    main()
