"""Stateful layer wrappers around ``functional`` plus a sequential container.

A layer caches what its backward pass needs during ``forward``; one forward
must be followed by at most one backward before the next forward.
"""
from __future__ import annotations

import numpy as np

from . import functional as F
from .params import ParamStore

INIT_STD = 0.02


class Layer:
    def forward(self, x, train=True, update_stats=True):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError


class Conv2d(Layer):
    def __init__(self, store: ParamStore, name, cin, cout, k, stride=1, pad=0, rng=None, bias=True,
                 weight=None, trainable=True):
        self.store, self.stride, self.pad = store, stride, pad
        self.w = f"{name}.weight"
        self.b = f"{name}.bias" if bias else None
        if weight is None:
            weight = rng.normal(0.0, INIT_STD, size=(cout, cin, k, k))
        store.add(self.w, weight, trainable=trainable)
        if bias:
            store.add(self.b, np.zeros(cout), trainable=trainable)

    def forward(self, x, train=True, update_stats=True):
        b = self.store[self.b] if self.b else None
        out, self.cache = F.conv2d_forward(x, self.store[self.w], b, self.stride, self.pad)
        return out

    def backward(self, dout):
        dx, dw, db = F.conv2d_backward(dout, self.cache, need_dw=self.store.trainable[self.w])
        if dw is not None:
            self.store.accumulate(self.w, dw)
        if self.b:
            self.store.accumulate(self.b, db)
        return dx


class ConvTranspose2d(Layer):
    def __init__(self, store: ParamStore, name, cin, cout, k, stride=1, pad=0, rng=None, bias=True):
        self.store, self.stride, self.pad = store, stride, pad
        self.w = f"{name}.weight"
        self.b = f"{name}.bias" if bias else None
        store.add(self.w, rng.normal(0.0, INIT_STD, size=(cin, cout, k, k)))
        if bias:
            store.add(self.b, np.zeros(cout))

    def forward(self, x, train=True, update_stats=True):
        b = self.store[self.b] if self.b else None
        out, self.cache = F.tconv2d_forward(x, self.store[self.w], b, self.stride, self.pad)
        return out

    def backward(self, dout):
        dx, dw, db = F.tconv2d_backward(dout, self.cache)
        self.store.accumulate(self.w, dw)
        if self.b:
            self.store.accumulate(self.b, db)
        return dx


class BatchNorm2d(Layer):
    def __init__(self, store: ParamStore, name, channels, momentum=0.1, eps=1e-5):
        self.store, self.momentum, self.eps = store, momentum, eps
        self.g, self.b = f"{name}.gamma", f"{name}.beta"
        store.add(self.g, np.ones(channels))
        store.add(self.b, np.zeros(channels))
        self.rm, self.rv = f"{name}.running_mean", f"{name}.running_var"
        store.add_buffer(self.rm, np.zeros(channels))
        store.add_buffer(self.rv, np.ones(channels))

    def forward(self, x, train=True, update_stats=True):
        running = (self.store.buffers[self.rm], self.store.buffers[self.rv])
        out, self.cache = F.batchnorm_forward(x, self.store[self.g], self.store[self.b], train, running,
                                              self.momentum, self.eps, update_stats)
        return out

    def backward(self, dout):
        dx, dg, db = F.batchnorm_backward(dout, self.cache)
        self.store.accumulate(self.g, dg)
        self.store.accumulate(self.b, db)
        return dx


class Linear(Layer):
    def __init__(self, store: ParamStore, name, din, dout, rng, bias=True):
        self.store = store
        self.w = f"{name}.weight"
        self.b = f"{name}.bias" if bias else None
        store.add(self.w, rng.normal(0.0, INIT_STD, size=(din, dout)))
        if bias:
            store.add(self.b, np.zeros(dout))

    def forward(self, x, train=True, update_stats=True):
        b = self.store[self.b] if self.b else 0.0
        out, self.cache = F.fc_forward(x, self.store[self.w], b)
        return out

    def backward(self, dout):
        dx, dw, db = F.fc_backward(dout, self.cache)
        self.store.accumulate(self.w, dw)
        if self.b:
            self.store.accumulate(self.b, db)
        return dx


class LeakyReLU(Layer):
    def __init__(self, slope=0.2):
        self.slope = slope

    def forward(self, x, train=True, update_stats=True):
        out, self.cache = F.leaky_relu_forward(x, self.slope)
        return out

    def backward(self, dout):
        return F.leaky_relu_backward(dout, self.cache)


class Tanh(Layer):
    def forward(self, x, train=True, update_stats=True):
        out, self.cache = F.tanh_forward(x)
        return out

    def backward(self, dout):
        return F.tanh_backward(dout, self.cache)


class Sigmoid(Layer):
    def forward(self, x, train=True, update_stats=True):
        out, self.cache = F.sigmoid_forward(x)
        return out

    def backward(self, dout):
        return F.sigmoid_backward(dout, self.cache)


class Gaussian(Layer):
    def __init__(self, sigma=1.0):
        self.sigma = sigma

    def forward(self, x, train=True, update_stats=True):
        out, self.cache = F.gaussian_forward(x, self.sigma)
        return out

    def backward(self, dout):
        return F.gaussian_backward(dout, self.cache)


class AvgPool2d(Layer):
    def __init__(self, k=2, stride=2):
        self.k, self.stride = k, stride

    def forward(self, x, train=True, update_stats=True):
        out, self.cache = F.avgpool_forward(x, self.k, self.stride)
        return out

    def backward(self, dout):
        return F.avgpool_backward(dout, self.cache)


class ReflectPad2d(Layer):
    def __init__(self, pad):
        self.pad = pad

    def forward(self, x, train=True, update_stats=True):
        out, self.cache = F.reflect_pad_forward(x, self.pad)
        return out

    def backward(self, dout):
        return F.reflect_pad_backward(dout, self.cache)


class Reshape(Layer):
    def __init__(self, *shape):
        self.shape = shape

    def forward(self, x, train=True, update_stats=True):
        self.in_shape = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, dout):
        return dout.reshape(self.in_shape)


class Sequential:
    def __init__(self, store: ParamStore, layers: list[Layer]):
        self.store = store
        self.layers = layers

    def forward(self, x, train=True, update_stats=True):
        x = np.asarray(x, dtype=self.store.dtype)
        for layer in self.layers:
            x = layer.forward(x, train=train, update_stats=update_stats)
        return x

    def backward(self, dout):
        dout = np.asarray(dout, dtype=self.store.dtype)
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout
