"""Corpus ingestion and cover/stego corpus construction.

A corpus is described by a JSON manifest listing image paths with labels
(0 cover, 1 stego) and the split they belong to.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import keystream
from ..errors import DataError, StegoganError
from ..image_core import PixelImage, center_crop, load_image_any, load_png, save_png, to_grayscale, to_tensor
from ..stego_codec import stego_pixels

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp")


@dataclass
class CorpusManifest:
    name: str
    paths: list[str] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)
    split: str = "train"
    provenance: dict = field(default_factory=lambda: {"source": "real"})
    payload: float | None = None
    key_policy: str | None = None

    def __post_init__(self):
        if len(self.paths) != len(self.labels):
            raise DataError(f"manifest {self.name}: {len(self.paths)} paths but {len(self.labels)} labels")
        if any(lab not in (0, 1) for lab in self.labels):
            raise DataError(f"manifest {self.name}: labels must be 0 or 1")
        if self.split not in ("train", "test"):
            raise DataError(f"manifest {self.name}: split must be train or test")

    def __len__(self):
        return len(self.paths)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        try:
            with open(path) as fh:
                return cls(**json.load(fh))
        except FileNotFoundError as exc:
            raise DataError(f"manifest not found: {path}") from exc
        except (json.JSONDecodeError, TypeError) as exc:
            raise DataError(f"malformed manifest {path}: {exc}") from exc

    def images(self) -> list[PixelImage]:
        return [load_png(p) for p in self.paths]

    def tensor(self, dtype=np.float32) -> np.ndarray:
        return to_tensor(self.images(), dtype=dtype)


def split_sizes(n: int, split: float) -> tuple[int, int]:
    """(n_train, n_test); the test side is rounded down."""
    if not 0 < split <= 1:
        raise DataError(f"split must lie in (0, 1], got {split}")
    n_test = math.floor(n * (1 - split) + 1e-9)
    return n - n_test, n_test


def _ensure_dir(path) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {path}: {exc}") from exc


def prepare_dataset(src_dir, out_dir, crop: int = 64, split: float = 0.9, seed: int = 0,
                    grayscale: bool = False) -> tuple[CorpusManifest, CorpusManifest]:
    """Center-crop every decodable image in ``src_dir`` and split it by a seeded shuffle.

    Files that fail to decode or are smaller than ``crop`` are skipped.
    Writes ``train.json`` and ``test.json`` into ``out_dir``.
    """
    if not os.path.isdir(src_dir):
        raise DataError(f"source directory not found: {src_dir}")
    names = sorted(f for f in os.listdir(src_dir) if f.lower().endswith(IMAGE_EXTENSIONS))
    crops, origins = [], []
    for name in names:
        try:
            img = center_crop(load_image_any(os.path.join(src_dir, name)), crop)
        except StegoganError:
            continue
        crops.append(to_grayscale(img) if grayscale else img)
        origins.append(name)
    if not crops:
        raise DataError(f"no decodable images of at least {crop}x{crop} in {src_dir}")
    img_dir = os.path.join(out_dir, "images")
    _ensure_dir(img_dir)
    order = np.random.default_rng(seed).permutation(len(crops))
    n_train, _ = split_sizes(len(crops), split)
    manifests = []
    for split_name, idx in (("train", order[:n_train]), ("test", order[n_train:])):
        paths = []
        for i in sorted(idx.tolist()):
            p = os.path.join(img_dir, f"{i:06d}.png")
            save_png(crops[i], p)
            paths.append(p)
        m = CorpusManifest(f"covers-{split_name}", paths, [0] * len(paths), split_name,
                           {"source": "real", "src_dir": os.fspath(src_dir), "seed": seed, "crop": crop,
                            "grayscale": grayscale})
        m.save(os.path.join(out_dir, f"{split_name}.json"))
        manifests.append(m)
    return manifests[0], manifests[1]


def manifest_from_images(images: list[PixelImage], out_dir, name: str, split: str = "train",
                         provenance: dict | None = None) -> CorpusManifest:
    """Write in-memory covers as PNGs and describe them with a manifest."""
    _ensure_dir(out_dir)
    paths = []
    for i, img in enumerate(images):
        p = os.path.join(out_dir, f"{name}_{i:06d}.png")
        save_png(img, p)
        paths.append(p)
    m = CorpusManifest(name, paths, [0] * len(paths), split, provenance or {"source": "real"})
    m.save(os.path.join(out_dir, f"{name}.json"))
    return m


def build_stego_corpus(manifest: CorpusManifest, out_dir, payload: float = 0.4, key_policy: str = "per-image",
                       seed: int = 0, embedder: str = "lsb-matching") -> CorpusManifest:
    """Pair every cover with a stego copy carrying fresh random bits.

    Entries alternate cover, stego; covers are referenced in place and never rewritten.
    """
    covers = [i for i, lab in enumerate(manifest.labels) if lab == 0]
    cover_imgs = [load_png(manifest.paths[i]) for i in covers]
    stegos = stego_pixels(cover_imgs, payload, key_policy, keystream.derive_seed(seed, 0x434F), embedder)
    _ensure_dir(out_dir)
    paths, labels = [], []
    for i, img in zip(covers, stegos):
        base = os.path.splitext(os.path.basename(manifest.paths[i]))[0]
        p = os.path.join(out_dir, f"{base}_stego.png")
        save_png(img, p)
        paths += [manifest.paths[i], p]
        labels += [0, 1]
    prov = dict(manifest.provenance, cover_manifest=manifest.name, embedder=embedder, seed=seed)
    m = CorpusManifest(f"{manifest.name}+stego", paths, labels, manifest.split, prov, payload, key_policy)
    m.save(os.path.join(out_dir, f"{manifest.split}_pairs.json"))
    return m
