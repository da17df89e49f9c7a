"""Procedural image corpora for desk-scale runs (no dataset downloads here)."""
from __future__ import annotations

import os

import numpy as np

from ..image_core import PixelImage, save_png


def two_mode_images(n: int, seed: int, size: int = 64) -> list[PixelImage]:
    """8x8 block patterns from one of two templates, upscaled to ``size``.

    Mode 0 is a bright-left/dark-right colour split, mode 1 a checker of two
    other colours; each image gets a small random brightness offset.
    """
    rng = np.random.default_rng(seed)
    a = np.zeros((8, 8, 3))
    a[:, :4] = (200, 80, 60)
    a[:, 4:] = (40, 40, 120)
    b = np.zeros((8, 8, 3))
    yy, xx = np.mgrid[:8, :8]
    checker = ((yy // 2 + xx // 2) % 2).astype(bool)
    b[checker] = (60, 180, 90)
    b[~checker] = (220, 220, 200)
    scale = size // 8
    out = []
    for _ in range(n):
        base = a if rng.random() < 0.5 else b
        img = np.clip(base + rng.uniform(-15, 15), 0, 255)
        out.append(PixelImage(np.kron(img, np.ones((scale, scale, 1))).round().astype(np.uint8)))
    return out


def smooth_images(n: int, seed: int, size: int = 64, blobs: int = 6, noise_std: float = 0.0) -> list[PixelImage]:
    """Smooth colour fields: a linear gradient plus random Gaussian blobs."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[:size, :size] / size
    out = []
    for _ in range(n):
        img = rng.uniform(60, 190, 3)[None, None, :] + (
            rng.uniform(-50, 50, 3)[None, None, :] * xx[..., None] + rng.uniform(-50, 50, 3)[None, None, :] * yy[..., None])
        for _ in range(blobs):
            cy, cx = rng.uniform(0, 1, 2)
            r = rng.uniform(0.08, 0.3)
            amp = rng.uniform(-70, 70, 3)
            img = img + amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))[..., None]
        if noise_std:
            img = img + rng.normal(0, noise_std, img.shape)
        out.append(PixelImage(np.clip(np.round(img), 0, 255).astype(np.uint8)))
    return out


KINDS = {"two-mode": two_mode_images, "smooth": smooth_images}


def write_corpus(out_dir, n: int, kind: str = "smooth", seed: int = 0, size: int = 64) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, img in enumerate(KINDS[kind](n, seed, size)):
        p = os.path.join(out_dir, f"{kind}_{i:06d}.png")
        save_png(img, p)
        paths.append(p)
    return paths
