"""Generator, realism discriminator and steganalyser.

Default widths follow the DCGAN layout (G: 512-256-128-64-3 from a 4x4
projection, D mirrored); ``base_width`` scales them down for desk-scale runs.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeError
from .nn import functional as F
from .nn.layers import (AvgPool2d, BatchNorm2d, Conv2d, ConvTranspose2d, Gaussian, LeakyReLU, Linear, ReflectPad2d,
                        Reshape, Sequential, Sigmoid, Tanh)
from .nn.params import ParamStore

IMAGE_SIZE = 64

HPF_KERNEL = np.array([
    [-1, 2, -2, 2, -1],
    [2, -6, 8, -6, 2],
    [-2, 8, -12, 8, -2],
    [2, -6, 8, -6, 2],
    [-1, 2, -2, 2, -1],
], dtype=np.float64)

HPF_NAME = "hpf.weight"


@dataclass
class NoiseSpec:
    z_dim: int = 100
    distribution: str = "uniform"  # uniform on [-1, 1]

    def sample(self, rng: np.random.Generator, n: int, dtype=np.float32) -> np.ndarray:
        if self.z_dim <= 0:
            raise ValueError("z_dim must be positive")
        return rng.uniform(-1.0, 1.0, size=(n, self.z_dim)).astype(dtype)


@dataclass
class GeneratorSpec:
    z_dim: int = 100
    base_width: int = 64
    out_channels: int = 3
    slope: float = 0.2

    @property
    def widths(self) -> list[int]:
        b = self.base_width
        return [8 * b, 4 * b, 2 * b, b, self.out_channels]


@dataclass
class DiscriminatorSpec:
    base_width: int = 64
    in_channels: int = 3
    head: str = "sigmoid"  # or "critic"
    slope: float = 0.2

    @property
    def widths(self) -> list[int]:
        b = self.base_width
        return [self.in_channels, b, 2 * b, 4 * b, 8 * b]


@dataclass
class SteganalyserSpec:
    in_channels: int = 3
    widths: list[int] = field(default_factory=lambda: [16, 32, 64, 128])
    kernel: int = 5
    hidden: int = 256
    activation: str = "leaky_relu"  # or "gaussian"
    slope: float = 0.2
    gaussian_sigma: float = 1.0


def _check_images(x, channels):
    if x.ndim != 4 or x.shape[1:] != (channels, IMAGE_SIZE, IMAGE_SIZE):
        raise ShapeError(f"expected (n, {channels}, {IMAGE_SIZE}, {IMAGE_SIZE}) images, got {x.shape}")


class Network:
    """A ParamStore plus the layer stack that reads it."""

    spec = None

    def __init__(self, store: ParamStore, net: Sequential):
        self.store, self.net = store, net

    def backward(self, dout):
        return self.net.backward(dout)

    def spec_dict(self) -> dict:
        return asdict(self.spec)


class Generator(Network):
    def __init__(self, spec: GeneratorSpec, rng: np.random.Generator, dtype=np.float32):
        self.spec = spec
        s = ParamStore(dtype)
        w = spec.widths
        # layers feeding a batchnorm carry no bias: the normalisation removes it
        layers = [Linear(s, "project", spec.z_dim, w[0] * 16, rng, bias=False), Reshape(w[0], 4, 4),
                  BatchNorm2d(s, "project_bn", w[0]), LeakyReLU(spec.slope)]
        for i in range(4):
            layers.append(ConvTranspose2d(s, f"up{i}", w[i], w[i + 1], 4, stride=2, pad=1, rng=rng, bias=i == 3))
            if i < 3:
                layers += [BatchNorm2d(s, f"up{i}_bn", w[i + 1]), LeakyReLU(spec.slope)]
        layers.append(Tanh())
        super().__init__(s, Sequential(s, layers))

    def forward(self, z, train=True, update_stats=True):
        z = np.asarray(z)
        if z.ndim != 2 or z.shape[1] != self.spec.z_dim:
            raise ShapeError(f"expected noise of shape (n, {self.spec.z_dim}), got {z.shape}")
        return self.net.forward(z, train, update_stats)


class Discriminator(Network):
    def __init__(self, spec: DiscriminatorSpec, rng: np.random.Generator, dtype=np.float32):
        if spec.head not in ("sigmoid", "critic"):
            raise ValueError(f"unknown discriminator head {spec.head!r}")
        self.spec = spec
        s = ParamStore(dtype)
        w = spec.widths
        layers = []
        for i in range(4):
            layers.append(Conv2d(s, f"conv{i}", w[i], w[i + 1], 4, stride=2, pad=1, rng=rng, bias=i == 0))
            if i > 0:
                layers.append(BatchNorm2d(s, f"conv{i}_bn", w[i + 1]))
            layers.append(LeakyReLU(spec.slope))
        layers += [Reshape(w[4] * 16), Linear(s, "head", w[4] * 16, 1, rng), Reshape()]
        if spec.head == "sigmoid":
            layers.append(Sigmoid())
        super().__init__(s, Sequential(s, layers))

    def forward(self, x, train=True, update_stats=True):
        _check_images(np.asarray(x), self.spec.in_channels)
        return self.net.forward(x, train, update_stats)


class Steganalyser(Network):
    """Fixed high-pass filter, four conv/activation/avg-pool stages, two FC layers.

    ``forward`` returns the two class logits (cover, stego); ``prob`` the
    softmax probability of "stego".
    """

    def __init__(self, spec: SteganalyserSpec, rng: np.random.Generator, dtype=np.float32):
        if spec.activation not in ("leaky_relu", "gaussian"):
            raise ValueError(f"unknown activation {spec.activation!r}")
        self.spec = spec
        s = ParamStore(dtype)
        hpf = np.broadcast_to(HPF_KERNEL, (1, spec.in_channels, 5, 5)).copy()
        layers = [ReflectPad2d(2), Conv2d(s, "hpf", spec.in_channels, 1, 5, bias=False, weight=hpf, trainable=False)]
        chans = [1] + list(spec.widths)
        pad = spec.kernel // 2
        for i in range(len(spec.widths)):
            layers += [Conv2d(s, f"conv{i}", chans[i], chans[i + 1], spec.kernel, pad=pad, rng=rng),
                       self._act(), AvgPool2d(2, 2)]
        side = IMAGE_SIZE // 2 ** len(spec.widths)
        flat = chans[-1] * side * side
        layers += [Reshape(flat), Linear(s, "fc0", flat, spec.hidden, rng), self._act(),
                   Linear(s, "fc1", spec.hidden, 2, rng)]
        super().__init__(s, Sequential(s, layers))

    def _act(self):
        if self.spec.activation == "gaussian":
            return Gaussian(self.spec.gaussian_sigma)
        return LeakyReLU(self.spec.slope)

    def forward(self, x, train=True, update_stats=True):
        _check_images(np.asarray(x), self.spec.in_channels)
        return self.net.forward(x, train, update_stats)

    def prob(self, x, train=True):
        """P(stego) per sample; keeps what ``prob_backward`` needs."""
        self._p = F.softmax2(self.forward(x, train))
        return self._p

    def prob_backward(self, dp):
        return self.backward(F.softmax2_backward(dp, self._p))

    def hpf_digest(self) -> str:
        return hashlib.sha256(self.store[HPF_NAME].tobytes()).hexdigest()


def hpf_residual(x: np.ndarray) -> np.ndarray:
    """High-pass residual, channels summed into one plane (stride 1, 2-pixel reflect padding).

    The kernel sums to zero and reflection keeps constants constant, so
    subtracting each image's top-left pixel first changes nothing
    mathematically but makes constant images give exactly zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[2] < 5 or x.shape[3] < 5:
        raise ShapeError(f"hpf_residual needs (n, c, >=5, >=5) input, got {x.shape}")
    w = np.broadcast_to(HPF_KERNEL, (1, x.shape[1], 5, 5))
    padded, _ = F.reflect_pad_forward(x - x[:, :, :1, :1], 2)
    out, _ = F.conv2d_forward(padded, w, None, 1, 0)
    return out


def forward_g(gen: Generator, z, train=False) -> np.ndarray:
    return gen.forward(z, train=train, update_stats=False)


def forward_d(disc: Discriminator, x, train=False) -> np.ndarray:
    return disc.forward(x, train=train, update_stats=False)


def forward_s(steg: Steganalyser, x, train=False) -> np.ndarray:
    return steg.prob(x, train=train)


def clip_weights(store: ParamStore, c: float) -> None:
    """Clamp every trainable parameter into [-c, c] in place."""
    if c <= 0:
        raise ValueError("clip bound must be positive")
    for k in store.trainable_names():
        np.clip(store.params[k], -c, c, out=store.params[k])
