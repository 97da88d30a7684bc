"""Builds data/demo: twenty 128x128 RGB crops of scikit-image sample photos.

All sources are public domain or CC0 (see data/demo/SOURCES.md). Images are
box-downsampled by an integer factor, then cropped at fixed offsets, so the
output is reproducible byte for byte.
"""

import os
import sys

import numpy as np
from PIL import Image
from skimage import data

SIZE = 128

# (name, loader, downsample factor, crop anchors as fractions of the free range)
SOURCES = [
    ("astronaut", data.astronaut, 2, [(0.0, 0.0), (0.0, 1.0), (1.0, 0.5)]),
    ("chelsea", data.chelsea, 2, [(0.5, 0.3), (0.5, 0.8)]),
    ("coffee", data.coffee, 2, [(0.5, 0.0), (0.5, 0.5), (0.5, 1.0)]),
    ("rocket", data.rocket, 2, [(0.3, 0.4), (0.8, 0.9)]),
    ("hubble", data.hubble_deep_field, 4, [(0.0, 0.0), (1.0, 1.0)]),
    ("camera", data.camera, 2, [(0.2, 0.3), (0.9, 0.8)]),
    ("brick", data.brick, 2, [(0.0, 0.0), (1.0, 1.0)]),
    ("grass", data.grass, 2, [(0.0, 1.0), (1.0, 0.0)]),
    ("gravel", data.gravel, 2, [(0.5, 0.5), (0.0, 0.8)]),
]


def downsample(img, f):
    h, w = (img.shape[0] // f) * f, (img.shape[1] // f) * f
    x = img[:h, :w].astype(np.float64)
    x = x.reshape(h // f, f, w // f, f, -1).mean(axis=(1, 3))
    return np.floor(x + 0.5).clip(0, 255).astype(np.uint8)


def main(out):
    os.makedirs(out, exist_ok=True)
    count = 0
    for name, load, f, anchors in SOURCES:
        img = load()
        if img.ndim == 2:
            img = np.stack([img] * 3, axis=-1)
        small = downsample(img[..., :3], f)
        h, w = small.shape[:2]
        for k, (ay, ax) in enumerate(anchors):
            y = int(round(ay * (h - SIZE)))
            x = int(round(ax * (w - SIZE)))
            crop = small[y : y + SIZE, x : x + SIZE]
            Image.fromarray(crop, "RGB").save(os.path.join(out, f"{name}_{k}.png"), optimize=False)
            count += 1
    print(f"wrote {count} images to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "demo"))
