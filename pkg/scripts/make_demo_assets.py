#!/usr/bin/env python3
"""Deterministically synthesize demo assets: object textures, backgrounds,
and occluder cutouts.  Textures get high-contrast distinct patterns so the
built-in template detector has something to latch onto."""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from foldlab.datastore import save_image


def make_texture(index: int, size: int = 384) -> np.ndarray:
    """Distinct high-frequency pattern per object index."""
    rng = np.random.default_rng(1000 + index)
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = np.zeros((size, size, 3))
    # layered sinusoid gratings at object-specific frequencies and phases
    for c in range(3):
        f1, f2 = rng.uniform(3, 9, size=2)
        p1, p2 = rng.uniform(0, 2 * np.pi, size=2)
        base[:, :, c] = 0.5 + 0.25 * np.sin(2 * np.pi * f1 * xx + p1) \
            + 0.25 * np.sin(2 * np.pi * f2 * yy + p2)
    # blocky glyphs for unique landmarks
    cell = size // 8
    codes = rng.uniform(size=(8, 8, 3)) > 0.5
    for gy in range(8):
        for gx in range(8):
            if codes[gy, gx].any() and rng.uniform() < 0.35:
                ys, xs = gy * cell, gx * cell
                base[ys : ys + cell // 2, xs : xs + cell // 2] = codes[gy, gx]
    return np.clip(base, 0, 1)


def make_background(index: int, width: int = 640, height: int = 480) -> np.ndarray:
    rng = np.random.default_rng(2000 + index)
    low = rng.uniform(0.1, 0.9, size=(6, 8, 3))
    img = np.kron(low, np.ones((height // 6 + 1, width // 8 + 1, 1)))
    img = img[:height, :width]
    img += rng.normal(0, 0.05, size=img.shape)
    return np.clip(img, 0, 1)


def make_occluder(index: int, size: int = 256) -> np.ndarray:
    rng = np.random.default_rng(3000 + index)
    color = rng.uniform(0.2, 0.9, size=3)
    img = np.tile(color, (size, size, 1))
    img += rng.normal(0, 0.08, size=img.shape)
    return np.clip(img, 0, 1)


def build(root: Path, objects: int = 5, backgrounds: int = 4, occluders: int = 3):
    for sub in ("textures", "backgrounds", "occluders"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i in range(objects):
        save_image(root / "textures" / f"{i}.png", make_texture(i))
    for i in range(backgrounds):
        save_image(root / "backgrounds" / f"bg{i}.png", make_background(i))
    for i in range(occluders):
        save_image(root / "occluders" / f"occ{i}.png", make_occluder(i))
    return root


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("assets"))
    ap.add_argument("--objects", type=int, default=5)
    ap.add_argument("--backgrounds", type=int, default=4)
    ap.add_argument("--occluders", type=int, default=3)
    args = ap.parse_args()
    build(args.out, args.objects, args.backgrounds, args.occluders)
    print(f"wrote assets under {args.out}")


if __name__ == "__main__":
    main()
