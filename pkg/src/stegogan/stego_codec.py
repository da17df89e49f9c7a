"""Keyed +-1 LSB matching.

Embedding positions are the prefix of a Fisher-Yates permutation of all
flattened pixel indices, driven by a SplitMix64 stream seeded with the key
(see ``keystream``).  Stream word ``2i`` selects the swap partner of slot
``i`` and word ``2i + 1`` supplies the sign of a possible +-1 change (top bit
set means +1), so the plan for ``n`` bits is a prefix of the plan for
``n + 1`` bits.

No length header is written; ``extract`` needs the bit count.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import keystream
from .errors import CapacityError, UsageError
from .image_core import PixelImage, from_tensor, to_tensor

KEY_POLICIES = ("fixed", "per-image")


@dataclass(frozen=True)
class EmbedPlan:
    positions: np.ndarray  # int64, pairwise distinct flat pixel indices
    signs: np.ndarray  # int16, entries in {+1, -1}


def _check_key(key: int) -> int:
    key = int(key)
    if not 0 <= key <= keystream.MASK64:
        raise UsageError(f"stego key {key} outside the unsigned 64-bit range")
    return key


def capacity(img: PixelImage | tuple, payload: float) -> int:
    """Number of message bits carried at ``payload`` bits per pixel value."""
    if not 0 < payload <= 1:
        raise UsageError(f"payload must lie in (0, 1], got {payload}")
    shape = img.shape if isinstance(img, PixelImage) else tuple(img)
    total = int(np.prod(shape))
    # tolerate binary fractions like 0.4 * 4096 = 1638.4000000000001
    return int(np.floor(total * payload + 1e-9))


def derive_plan(key: int, img_shape: tuple, n_bits: int) -> EmbedPlan:
    key = _check_key(key)
    total = int(np.prod(img_shape))
    if n_bits < 0 or n_bits > total:
        raise CapacityError(f"{n_bits} bits requested but the image has {total} pixel values")
    if total >= 1 << 32:
        raise CapacityError("image too large for 32-bit bounded draws")
    words = keystream.splitmix64(key, 2 * n_bits)
    offsets = keystream.bounded(words[0::2], np.arange(total, total - n_bits, -1, dtype=np.uint64))
    partners = (offsets + np.arange(n_bits, dtype=np.uint64)).tolist()
    perm = list(range(total))
    for i, j in enumerate(partners):
        perm[i], perm[j] = perm[j], perm[i]
    positions = np.array(perm[:n_bits], dtype=np.int64)
    signs = np.where(words[1::2] >> np.uint64(63), 1, -1).astype(np.int16)
    return EmbedPlan(positions, signs)


def _as_bits(msg) -> np.ndarray:
    bits = np.asarray(msg, dtype=np.uint8).reshape(-1)
    if bits.size and bits.max() > 1:
        raise UsageError("message bits must be 0 or 1")
    return bits


class Embedder(Protocol):
    name: str

    def embed(self, cover: PixelImage, msg, key: int) -> PixelImage: ...

    def extract(self, stego: PixelImage, key: int, n_bits: int) -> np.ndarray: ...


class LSBMatching:
    """+-1 embedding: flip the LSB by adding or subtracting one at random."""

    name = "lsb-matching"

    def embed(self, cover: PixelImage, msg, key: int) -> PixelImage:
        bits = _as_bits(msg)
        plan = derive_plan(key, cover.shape, bits.size)
        flat = cover.flat().astype(np.int16)
        vals = flat[plan.positions]
        change = (vals & 1) != bits
        step = plan.signs.copy()
        step[vals == 0] = 1
        step[vals == 255] = -1
        flat[plan.positions[change]] += step[change]
        return PixelImage(flat.astype(np.uint8).reshape(cover.shape))

    def extract(self, stego: PixelImage, key: int, n_bits: int) -> np.ndarray:
        plan = derive_plan(key, stego.shape, n_bits)
        return (stego.flat()[plan.positions] & 1).astype(np.uint8)


class LSBReplacement(LSBMatching):
    """Plain LSB overwrite; easier to detect, used as a detector sanity baseline."""

    name = "lsb-replacement"

    def embed(self, cover: PixelImage, msg, key: int) -> PixelImage:
        bits = _as_bits(msg)
        plan = derive_plan(key, cover.shape, bits.size)
        flat = cover.flat().copy()
        flat[plan.positions] = (flat[plan.positions] & 0xFE) | bits
        return PixelImage(flat.reshape(cover.shape))


EMBEDDERS: dict[str, Embedder] = {e.name: e for e in (LSBMatching(), LSBReplacement())}


def get_embedder(name: str) -> Embedder:
    try:
        return EMBEDDERS[name]
    except KeyError:
        raise UsageError(f"unknown embedder {name!r}; choose from {sorted(EMBEDDERS)}") from None


def embed(cover: PixelImage, msg, key: int) -> PixelImage:
    return EMBEDDERS["lsb-matching"].embed(cover, msg, key)


def extract(stego: PixelImage, key: int, n_bits: int) -> np.ndarray:
    return EMBEDDERS["lsb-matching"].extract(stego, key, n_bits)


def random_bits(seed: int, n_bits: int) -> np.ndarray:
    """Uniform message bits taken from the top bit of a SplitMix64 stream."""
    return (keystream.splitmix64(seed, n_bits) >> np.uint64(63)).astype(np.uint8)


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    return np.packbits(_as_bits(bits)).tobytes()


def image_keys(seed: int, n: int, key_policy: str) -> list[int]:
    if key_policy not in KEY_POLICIES:
        raise UsageError(f"key policy must be one of {KEY_POLICIES}, got {key_policy!r}")
    if key_policy == "fixed":
        return [keystream.derive_seed(seed, 0)] * n
    return [keystream.derive_seed(seed, 1, i) for i in range(n)]


def stego_pixels(covers: list[PixelImage], payload: float, key_policy: str, seed: int,
                 embedder: str = "lsb-matching") -> list[PixelImage]:
    """Embed fresh random bits into each cover. Messages always differ per image."""
    emb = get_embedder(embedder)
    keys = image_keys(seed, len(covers), key_policy)
    out = []
    for i, (cover, key) in enumerate(zip(covers, keys)):
        bits = random_bits(keystream.derive_seed(seed, 2, i), capacity(cover, payload))
        out.append(emb.embed(cover, bits, key))
    return out


def stego_batch(t: np.ndarray, payload: float = 0.4, key_policy: str = "per-image", seed: int = 0) -> np.ndarray:
    """The Stego(.) operator on a real-valued batch: quantize, embed, dequantize."""
    covers = from_tensor(t)
    stegos = stego_pixels(covers, payload, key_policy, seed)
    return to_tensor(stegos, dtype=np.asarray(t).dtype)
