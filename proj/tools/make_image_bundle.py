#!/usr/bin/env python3
"""Generate the N=10 synthetic image training bundle.

Ten procedurally drawn 28x28 grayscale glyphs (disks, bars, crosses with
varying pose) are block-downsampled to 8x8, scaled to [0, 1], and written as
grid-function CSVs on Y = (0,1)^2 with 8 cells per axis. Each datum gets a
normalized Gaussian-bump target density on U = (0,1)^2 centred at a
class-specific location.

Deterministic: no RNG, every pixel is a closed-form function of its index.
Run from the repository root:  python3 tools/make_image_bundle.py
"""

import json
import os

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "images10")
CELLS = 8
SRC = 28


def glyph(k: int) -> np.ndarray:
    """28x28 grayscale pattern for class k, values in [0, 1]."""
    yy, xx = np.mgrid[0:SRC, 0:SRC].astype(float) / (SRC - 1)
    cx = 0.3 + 0.05 * k
    cy = 0.7 - 0.04 * k
    r = 0.18 + 0.015 * k
    disk = ((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r).astype(float)
    bar = (np.abs(yy - (0.2 + 0.06 * k)) <= 0.05).astype(float)
    cross = ((np.abs(xx - cx) <= 0.03) | (np.abs(yy - cy) <= 0.03)).astype(float)
    mix = [disk, bar, 0.5 * disk + 0.5 * bar, cross, 0.7 * cross + 0.3 * disk]
    img = mix[k % len(mix)]
    # smooth shading so downsampling produces genuine gray levels
    img = img * (0.6 + 0.4 * np.sin(3.0 * np.pi * (xx + 0.1 * k)) ** 2)
    return img


def downsample(img: np.ndarray) -> np.ndarray:
    """Block average 28x28 -> 8x8 with fractional pixel coverage."""
    edges = np.linspace(0.0, SRC, CELLS + 1)
    out = np.zeros((CELLS, CELLS))
    for i in range(CELLS):
        for j in range(CELLS):
            y0, y1 = edges[i], edges[i + 1]
            x0, x1 = edges[j], edges[j + 1]
            iy = np.arange(int(np.floor(y0)), int(np.ceil(y1)))
            ix = np.arange(int(np.floor(x0)), int(np.ceil(x1)))
            wy = np.clip(np.minimum(iy + 1, y1) - np.maximum(iy, y0), 0, None)
            wx = np.clip(np.minimum(ix + 1, x1) - np.maximum(ix, x0), 0, None)
            w = np.outer(wy, wx)
            out[i, j] = (img[np.ix_(iy, ix)] * w).sum() / w.sum()
    return out


def target(k: int) -> np.ndarray:
    """Normalized bump density on U for class k."""
    yy, xx = (np.mgrid[0:CELLS, 0:CELLS] + 0.5) / CELLS
    cx = (k % 5) / 5.0 + 0.1
    cy = (k // 5) / 2.0 + 0.25
    p = np.exp(-60.0 * ((xx - cx) ** 2 + (yy - cy) ** 2))
    cell = (1.0 / CELLS) ** 2
    return p / (p.sum() * cell)


def cell_center(flat: int) -> tuple:
    # axis-0 fastest, matching the uniform tensor grid's cell indexing
    i0 = flat % CELLS
    i1 = flat // CELLS
    h = 1.0 / CELLS
    return ((i0 + 0.5) * h, (i1 + 0.5) * h)


def write_csv(path: str, grid2d: np.ndarray) -> None:
    flat = grid2d.reshape(-1)
    with open(path, "w", newline="\n") as f:
        f.write("index,x0,x1,value\n")
        for idx, v in enumerate(flat):
            x0, x1 = cell_center(idx)
            f.write(f"{idx},{x0:.17g},{x1:.17g},{v:.17g}\n")


def main() -> None:
    os.makedirs(OUT, exist_ok=True)
    grid = {"dim": 2, "cells_per_axis": CELLS, "lo": 0.0, "hi": 1.0}
    index = {"y_grid": grid, "u_grid": grid, "data": []}
    for k in range(10):
        img = downsample(glyph(k))
        img = img / max(img.max(), 1e-12)
        iname = f"initial_{k:03d}.csv"
        tname = f"target_{k:03d}.csv"
        write_csv(os.path.join(OUT, iname), img)
        write_csv(os.path.join(OUT, tname), target(k))
        index["data"].append({"initial": iname, "target": tname})
    with open(os.path.join(OUT, "index.json"), "w", newline="\n") as f:
        json.dump(index, f, indent=2)
        f.write("\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
