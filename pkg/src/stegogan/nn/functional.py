"""Forward/backward pairs for every layer type.

Each ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
takes ``(dout, cache)``.  Convolutions use NCHW activations; conv weights are
(out, in, k, k) and transposed-conv weights (in, out, k, k).
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def conv_out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def tconv_out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size - 1) * stride - 2 * pad + k


def _pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _im2col(x, k, stride, pad):
    """(n, c, h, w) -> (c*k*k, n*oh*ow) patch matrix.

    Filled one kernel offset at a time so every copy reads whole rows.
    """
    xp = _pad(x, pad)
    n, c, hp, wp = xp.shape
    oh, ow = (hp - k) // stride + 1, (wp - k) // stride + 1
    cols = np.empty((c, k, k, n, oh, ow), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, :, i:i + stride * (oh - 1) + 1:stride,
                               j:j + stride * (ow - 1) + 1:stride].transpose(1, 0, 2, 3)
    return cols.reshape(c * k * k, n * oh * ow), oh, ow


def _col2im(cols, out_shape, k, stride):
    """Adjoint of ``_im2col`` (before cropping the padding)."""
    n, c, hp, wp = out_shape
    oh, ow = (hp - k) // stride + 1, (wp - k) // stride + 1
    cols = cols.reshape(c, k, k, n, oh, ow)
    out = np.zeros((c, n, hp, wp), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * (oh - 1) + 1:stride, j:j + stride * (ow - 1) + 1:stride] += cols[:, i, j]
    return out.transpose(1, 0, 2, 3)


def _to_cm(t):
    # (n, c, h, w) -> (c, n*h*w)
    return np.ascontiguousarray(t.transpose(1, 0, 2, 3)).reshape(t.shape[1], -1)


def _from_cm(m, n, oh, ow):
    # (c, n*oh*ow) -> contiguous (n, c, oh, ow)
    return np.ascontiguousarray(m.reshape(-1, n, oh, ow).transpose(1, 0, 2, 3))


def _conv_data_grad(dout, w, x_shape, stride, pad):
    n, c, h, wd = x_shape
    cout, _, k, _ = w.shape
    if stride == 1 and pad <= k - 1 and cout <= c:
        # full correlation with the flipped, channel-swapped kernel (smaller patch matrix when cout <= c)
        wf = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)).reshape(c, -1)
        cols, oh, ow = _im2col(dout, k, 1, k - 1 - pad)
        return _from_cm(wf @ cols, n, oh, ow)[:, :, :h, :wd]
    dcols = w.reshape(cout, -1).T @ _to_cm(dout)
    dxp = _col2im(dcols, (n, c, h + 2 * pad, wd + 2 * pad), k, stride)
    return np.ascontiguousarray(dxp[:, :, pad:pad + h, pad:pad + wd])


def conv2d_forward(x, w, b, stride=1, pad=0):
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or w.shape[2] != w.shape[3]:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with weight {w.shape}")
    k = w.shape[2]
    if conv_out_size(x.shape[2], k, stride, pad) <= 0 or conv_out_size(x.shape[3], k, stride, pad) <= 0:
        raise ShapeError(f"conv2d: input {x.shape} too small for kernel {k}")
    cols, oh, ow = _im2col(x, k, stride, pad)
    out = w.reshape(w.shape[0], -1) @ cols
    if b is not None:
        out += b[:, None]
    return _from_cm(out, x.shape[0], oh, ow), (cols, x.shape, w, b, stride, pad)


def conv2d_backward(dout, cache, need_dw=True):
    cols, x_shape, w, b, stride, pad = cache
    dmat = _to_cm(dout)
    dw = (dmat @ cols.T).reshape(w.shape) if need_dw else None
    db = dmat.sum(axis=1) if b is not None else None
    return _conv_data_grad(dout, w, x_shape, stride, pad), dw, db


def tconv2d_forward(x, w, b, stride=1, pad=0):
    """Fractionally-strided convolution: the data-gradient of conv2d."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[0] or w.shape[2] != w.shape[3]:
        raise ShapeError(f"tconv2d: input {x.shape} incompatible with weight {w.shape}")
    k = w.shape[2]
    n, _, h, wd = x.shape
    oh, ow = tconv_out_size(h, k, stride, pad), tconv_out_size(wd, k, stride, pad)
    if oh <= 0 or ow <= 0:
        raise ShapeError("tconv2d: non-positive output size")
    # the conv2d that this transposes maps (cout, oh, ow) -> (cin, h, w) with weight w
    out = _conv_data_grad(x, w, (n, w.shape[1], oh, ow), stride, pad)
    if b is not None:
        out += b[None, :, None, None]
    return out, (x, w, b, stride, pad)


def tconv2d_backward(dout, cache):
    x, w, b, stride, pad = cache
    k = w.shape[2]
    cols, oh, ow = _im2col(dout, k, stride, pad)
    dx = _from_cm(w.reshape(w.shape[0], -1) @ cols, x.shape[0], oh, ow)
    dw = (_to_cm(x) @ cols.T).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3)) if b is not None else None
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, train=True, running=None, momentum=0.1, eps=1e-5, update_stats=True):
    """Per-channel normalisation over (n, h, w).

    ``running`` is a (mean, var) pair of arrays updated in place in train
    mode when ``update_stats`` is set.
    """
    if x.shape[0] == 0:
        raise ShapeError("batchnorm on an empty batch")
    if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batchnorm: gamma/beta must have length {x.shape[1]}")
    axes = (0, 2, 3)
    if train:
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)
        if running is not None and update_stats:
            m = x.size // x.shape[1]
            rmean, rvar = running
            rmean *= 1 - momentum
            rmean += momentum * mu
            rvar *= 1 - momentum
            rvar += momentum * var * (m / max(m - 1, 1))
    else:
        mu, var = running
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, gamma, inv_std, train)


def batchnorm_backward(dout, cache):
    xhat, gamma, inv_std, train = cache
    axes = (0, 2, 3)
    dbeta = dout.sum(axis=axes)
    dgamma = (dout * xhat).sum(axis=axes)
    dxhat = dout * gamma[None, :, None, None]
    if not train:
        return dxhat * inv_std[None, :, None, None], dgamma, dbeta
    m = dout.size // dout.shape[1]
    dx = (inv_std[None, :, None, None] / m) * (
        m * dxhat
        - dxhat.sum(axis=axes)[None, :, None, None]
        - xhat * (dxhat * xhat).sum(axis=axes)[None, :, None, None]
    )
    return dx, dgamma, dbeta


def reflect_pad_forward(x, pad):
    if min(x.shape[2], x.shape[3]) <= pad:
        raise ShapeError(f"reflect padding {pad} needs spatial dims > {pad}, got {x.shape}")
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="reflect"), (x.shape, pad)


def reflect_pad_backward(dout, cache):
    """Fold the mirrored border gradients back onto the pixels they copied."""
    (_, _, h, w), p = cache
    rows = dout[:, :, p:p + h, :].copy()
    for i in range(1, p + 1):
        rows[:, :, i, :] += dout[:, :, p - i, :]
        rows[:, :, h - 1 - i, :] += dout[:, :, p + h - 1 + i, :]
    dx = rows[:, :, :, p:p + w].copy()
    for j in range(1, p + 1):
        dx[:, :, :, j] += rows[:, :, :, p - j]
        dx[:, :, :, w - 1 - j] += rows[:, :, :, p + w - 1 + j]
    return dx


def leaky_relu_forward(x, slope=0.2):
    return np.where(x > 0, x, slope * x), (x, slope)


def leaky_relu_backward(dout, cache):
    x, slope = cache
    return np.where(x > 0, dout, slope * dout)


def tanh_forward(x):
    out = np.tanh(x)
    return out, out


def tanh_backward(dout, out):
    return dout * (1 - out * out)


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_forward(x):
    out = sigmoid(x)
    return out, out


def sigmoid_backward(dout, out):
    return dout * out * (1 - out)


def gaussian_forward(x, sigma=1.0):
    out = np.exp(-(x * x) / (sigma * sigma))
    return out, (x, out, sigma)


def gaussian_backward(dout, cache):
    x, out, sigma = cache
    return dout * out * (-2.0 * x / (sigma * sigma))


def avgpool_forward(x, k=2, stride=2):
    oh, ow = conv_out_size(x.shape[2], k, stride, 0), conv_out_size(x.shape[3], k, stride, 0)
    if oh <= 0 or ow <= 0:
        raise ShapeError(f"avgpool: input {x.shape} smaller than window {k}")
    out = np.zeros(x.shape[:2] + (oh, ow), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            out += x[:, :, i:i + stride * (oh - 1) + 1:stride, j:j + stride * (ow - 1) + 1:stride]
    out /= k * k
    return out, (x.shape, k, stride)


def avgpool_backward(dout, cache):
    shape, k, stride = cache
    oh, ow = dout.shape[2], dout.shape[3]
    share = dout / (k * k)
    dx = np.zeros(shape, dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + stride * (oh - 1) + 1:stride, j:j + stride * (ow - 1) + 1:stride] += share
    return dx


def fc_forward(x, w, b):
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"fully_connected: input {x.shape} incompatible with weight {w.shape}")
    return x @ w + b, (x, w)


def fc_backward(dout, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def bce_loss(pred, label, eps=1e-7):
    """Mean binary cross-entropy and its gradient w.r.t. ``pred``.

    Predictions are clamped to [eps, 1 - eps]; clamped entries get zero gradient.
    """
    pred = np.asarray(pred)
    label = np.asarray(label, dtype=pred.dtype)
    p = np.clip(pred, eps, 1 - eps)
    n = p.size
    loss = -np.mean(label * np.log(p) + (1 - label) * np.log(1 - p))
    grad = (-(label / p) + (1 - label) / (1 - p)) / n
    grad = np.where((pred < eps) | (pred > 1 - eps), 0.0, grad).astype(pred.dtype)
    return float(loss), grad


def softmax2(logits):
    """Two-class softmax; returns P(class 1) computed stably as sigmoid(l1 - l0)."""
    return sigmoid(logits[:, 1] - logits[:, 0])


def softmax2_backward(dp, p):
    d = dp * p * (1 - p)
    return np.stack([-d, d], axis=1)
