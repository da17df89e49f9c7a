"""8-bit images, PNG persistence and the pixel <-> tensor mapping.

A ``PixelImage`` holds exact 8-bit pixel values in (height, width, channels)
order, which flattens row-major with channels interleaved.  Batches used by
the networks are plain ``numpy`` arrays of shape (n, c, h, w) with values
nominally in [-1, 1] ("image tensors").
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import (
    DataError,
    InvalidDimensionsError,
    MalformedImageError,
    MissingFileError,
    ShapeError,
    UnsupportedBitDepthError,
)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass(eq=False)
class PixelImage:
    data: np.ndarray  # uint8, shape (height, width, channels)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise InvalidDimensionsError(f"expected (h, w, 1|3) pixels, got shape {data.shape}")
        if data.dtype != np.uint8:
            if not np.issubdtype(data.dtype, np.integer) or data.min(initial=0) < 0 or data.max(initial=0) > 255:
                raise DataError("pixel values must be integers in [0, 255]")
            data = data.astype(np.uint8)
        self.data = np.ascontiguousarray(data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def flat(self) -> np.ndarray:
        """Row-major, channel-interleaved view of the pixel values."""
        return self.data.reshape(-1)

    def copy(self) -> "PixelImage":
        return PixelImage(self.data.copy())

    def __eq__(self, other):
        if not isinstance(other, PixelImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self):
        return f"PixelImage(width={self.width}, height={self.height}, channels={self.channels})"


def _read_ihdr(path: str) -> tuple[int, int, int, int]:
    with open(path, "rb") as fh:
        head = fh.read(33)
    if len(head) < 33 or head[:8] != PNG_SIGNATURE or head[12:16] != b"IHDR":
        raise MalformedImageError(f"{path}: not a PNG file")
    width, height, depth, colour = struct.unpack(">IIBB", head[16:26])
    return width, height, depth, colour


def load_png(path: str | os.PathLike) -> PixelImage:
    """Decode an 8-bit grayscale, RGB or palette PNG.

    Alpha channels are dropped; palette images are expanded to RGB.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFileError(f"{path}: no such file")
    width, height, depth, colour = _read_ihdr(path)
    if colour == 3:
        if depth > 8:
            raise MalformedImageError(f"{path}: invalid palette bit depth {depth}")
    elif depth != 8:
        raise UnsupportedBitDepthError(f"{path}: bit depth {depth} unsupported, only 8-bit PNGs are accepted")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode == "P":
                im = im.convert("RGB")
            elif im.mode == "RGBA":
                im = im.convert("RGB")
            elif im.mode == "LA":
                im = im.convert("L")
            if im.mode not in ("L", "RGB"):
                raise UnsupportedBitDepthError(f"{path}: unsupported PNG mode {im.mode}")
            data = np.array(im, dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as exc:
        raise MalformedImageError(f"{path}: {exc}") from exc
    if data.shape[:2] != (height, width):
        raise MalformedImageError(f"{path}: decoded size disagrees with header")
    return PixelImage(data)


def save_png(img: PixelImage, path: str | os.PathLike) -> None:
    if img.width == 0 or img.height == 0:
        raise InvalidDimensionsError("cannot save a zero-sized image")
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    mode = "L" if img.channels == 1 else "RGB"
    try:
        Image.fromarray(arr, mode=mode).save(os.fspath(path), format="PNG")
    except OSError as exc:
        raise DataError(f"{path}: cannot write PNG ({exc})") from exc


def load_image_any(path: str | os.PathLike) -> PixelImage:
    """Decode any Pillow-readable image into 8-bit RGB (used for JPEG ingestion)."""
    path = os.fspath(path)
    if path.lower().endswith(".png"):
        return load_png(path)
    try:
        with Image.open(path) as im:
            data = np.array(im.convert("RGB"), dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as exc:
        raise MalformedImageError(f"{path}: {exc}") from exc
    return PixelImage(data)


def center_crop(img: PixelImage, size: int) -> PixelImage:
    if img.width < size or img.height < size:
        raise InvalidDimensionsError(f"image {img.width}x{img.height} smaller than crop size {size}")
    top = (img.height - size) // 2
    left = (img.width - size) // 2
    return PixelImage(img.data[top:top + size, left:left + size].copy())


def to_grayscale(img: PixelImage) -> PixelImage:
    """ITU-R BT.601 luma with integer rounding."""
    if img.channels == 1:
        return img.copy()
    rgb = img.data.astype(np.int64)
    y = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return PixelImage(y.astype(np.uint8))


def to_tensor(imgs: Sequence[PixelImage], dtype=np.float32) -> np.ndarray:
    """Stack images into an (n, c, h, w) array with v -> v/127.5 - 1."""
    if len(imgs) == 0:
        return np.zeros((0, 0, 0, 0), dtype=dtype)
    shape = imgs[0].shape
    for im in imgs[1:]:
        if im.shape != shape:
            raise ShapeError(f"heterogeneous image shapes {shape} and {im.shape}")
    batch = np.stack([im.data for im in imgs]).transpose(0, 3, 1, 2)
    return (batch.astype(np.float64) / 127.5 - 1.0).astype(dtype)


def quantize(t: np.ndarray) -> np.ndarray:
    """Real values to uint8 via round-half-away-from-zero of (v+1)*127.5, then clamp."""
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise DataError("cannot quantize non-finite values")
    scaled = (t + 1.0) * 127.5
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def from_tensor(t: np.ndarray) -> list[PixelImage]:
    t = np.asarray(t)
    if t.ndim != 4:
        raise ShapeError(f"expected (n, c, h, w) tensor, got shape {t.shape}")
    q = quantize(t).transpose(0, 2, 3, 1)
    return [PixelImage(q[i]) for i in range(q.shape[0])]


def make_grid(imgs: Iterable[PixelImage], ncols: int = 8, pad: int = 2) -> PixelImage:
    """Tile equally sized images into one sheet with a black border."""
    imgs = list(imgs)
    if not imgs:
        raise InvalidDimensionsError("empty image list")
    h, w, c = imgs[0].shape
    ncols = min(ncols, len(imgs))
    nrows = -(-len(imgs) // ncols)
    sheet = np.zeros((nrows * (h + pad) + pad, ncols * (w + pad) + pad, c), dtype=np.uint8)
    for k, im in enumerate(imgs):
        r, col = divmod(k, ncols)
        y, x = pad + r * (h + pad), pad + col * (w + pad)
        sheet[y:y + h, x:x + w] = im.data
    return PixelImage(sheet)
