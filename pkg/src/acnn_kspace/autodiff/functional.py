"""Differentiable operators used by the reconstruction networks.

All image tensors are laid out ``(batch, channel, height, width)``.
"""

import numpy as np
from scipy.special import expit

from ..validation import ShapeError
from .tensor import GraphError, Tensor, as_tensor

# Branch decisions of the nonsmooth ops (ReLU masks, pooling argmaxes, Max-out
# choices, L1 signs). A gradient check records them on the unperturbed pass and
# replays them on the perturbed ones, so finite differences follow the same
# smooth piece that backprop differentiates.
_branch_log = None
_branch_replay = None


def _branch(decision):
    """Record the decision the op would make; return the replayed one if any."""
    if _branch_log is not None:
        _branch_log.append(np.asarray(decision).copy())
    if _branch_replay is not None:
        try:
            frozen = next(_branch_replay)
        except StopIteration:
            raise GraphError("replayed forward pass made more branch decisions than recorded") from None
        if frozen.shape != np.shape(decision):
            raise GraphError(f"replayed branch decision has shape {frozen.shape}, expected {np.shape(decision)}")
        decision = frozen
    return decision


class record_branches:
    """Collect the branch decisions made during a forward pass in ``.decisions``."""

    def __enter__(self):
        global _branch_log
        self._previous = _branch_log
        _branch_log = self.decisions = []
        return self

    def __exit__(self, *exc):
        global _branch_log
        _branch_log = self._previous
        return False

    def same_as(self, other):
        return len(self.decisions) == len(other.decisions) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.decisions, other.decisions)
        )


class freeze_branches:
    """Re-use recorded decisions, in order, instead of recomputing them."""

    def __init__(self, decisions):
        self.decisions = decisions

    def __enter__(self):
        global _branch_replay
        self._previous = _branch_replay
        _branch_replay = iter(self.decisions)
        return self

    def __exit__(self, *exc):
        global _branch_replay
        _branch_replay = self._previous
        return False


def _out_size(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def _im2col(x, k, stride, pad):
    """``(B, C, H, W) -> (B, C*k*k, Ho*Wo)`` built from k*k contiguous slice copies."""
    b, c, h, w = x.shape
    ho, wo = _out_size(h, k, stride, pad), _out_size(w, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((b, c, k, k, ho, wo), dtype=x.dtype)
    for p in range(k):
        for q in range(k):
            cols[:, :, p, q] = xp[:, :, p : p + stride * ho : stride, q : q + stride * wo : stride]
    return cols.reshape(b, c * k * k, ho * wo), (ho, wo)


def _col2im(cols, shape, k, stride, pad, out_hw):
    """Adjoint of :func:`_im2col`: scatter-add columns back into an image."""
    b, c, h, w = shape
    ho, wo = out_hw
    cols = cols.reshape(b, c, k, k, ho, wo)
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for p in range(k):
        for q in range(k):
            xp[:, :, p : p + stride * ho : stride, q : q + stride * wo : stride] += cols[:, :, p, q]
    return xp[:, :, pad : pad + h, pad : pad + w] if pad else xp


def _conv_forward(x, w, stride, pad):
    o, c, k, _ = w.shape
    cols, (ho, wo) = _im2col(x, k, stride, pad)
    out = np.matmul(w.reshape(o, c * k * k), cols)
    return out.reshape(x.shape[0], o, ho, wo), cols


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2D cross-correlation; ``weight`` is ``(out, in, k, k)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be 4D, got {x.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d expects {weight.shape[1]} input channels, got {x.shape[1]}")
    o, c, k, _ = weight.shape
    xshape, wd = x.data.shape, weight.data
    out, cols = _conv_forward(x.data, wd, stride, padding)
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, :, None, None]
        parents = parents + (bias,)

    def backward(g):
        b = g.shape[0]
        g2 = g.reshape(b, o, -1)
        gx = gw = None
        if x.requires_grad:
            gcols = np.matmul(wd.reshape(o, -1).T, g2)
            gx = _col2im(gcols, xshape, k, stride, padding, g.shape[-2:])
        if weight.requires_grad:
            gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(wd.shape)
        grads = (gx, gw)
        if bias is not None:
            grads = grads + (g.sum(axis=(0, 2, 3)),)
        return grads

    return Tensor._make(out, parents, "conv2d", backward)


def conv2d_transpose(x, weight, bias=None, stride=2, padding=1, output_padding=1):
    """Transposed convolution (adjoint of :func:`conv2d`); ``weight`` is ``(in, out, k, k)``.

    Output size is ``(H - 1) * stride - 2 * padding + k + output_padding``.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4:
        raise ShapeError(f"conv2d_transpose input must be 4D, got {x.shape}")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"conv2d_transpose expects {weight.shape[0]} input channels, got {x.shape[1]}"
        )
    cin, cout, k, _ = weight.shape
    b, _, h, w = x.shape
    oh = (h - 1) * stride - 2 * padding + k + output_padding
    ow = (w - 1) * stride - 2 * padding + k + output_padding
    out_shape = (b, cout, oh, ow)
    xd, wd = x.data, weight.data
    x2 = xd.reshape(b, cin, h * w)
    out = _col2im(np.matmul(wd.reshape(cin, -1).T, x2), out_shape, k, stride, padding, (h, w))
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, :, None, None]
        parents = parents + (bias,)

    def backward(g):
        gcols, _ = _im2col(g, k, stride, padding)
        gx = gw = None
        if x.requires_grad:
            gx = np.matmul(wd.reshape(cin, -1), gcols).reshape(xd.shape)
        if weight.requires_grad:
            gw = np.matmul(x2, gcols.transpose(0, 2, 1)).sum(axis=0).reshape(wd.shape)
        grads = (gx, gw)
        if bias is not None:
            grads = grads + (g.sum(axis=(0, 2, 3)),)
        return grads

    return Tensor._make(np.ascontiguousarray(out), parents, "conv2d_transpose", backward)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` for ``x`` of shape ``(batch, in)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear expects {weight.shape[1]} features, got {x.shape[-1]}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = parents + (bias,)

    def backward(g):
        grads = (g @ wd, g.T @ xd)
        if bias is not None:
            grads = grads + (g.sum(axis=0),)
        return grads

    return Tensor._make(out, parents, "linear", backward)


def relu(x):
    x = as_tensor(x)
    mask = _branch(x.data > 0)
    return Tensor._make(x.data * mask, (x,), "relu", lambda g: (g * mask,))


def sigmoid(x):
    x = as_tensor(x)
    s = expit(x.data)
    return Tensor._make(s, (x,), "sigmoid", lambda g: (g * s * (1 - s),))


def maximum(a, b):
    """Elementwise max; ties send the whole gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = _branch(a.data >= b.data)
    return Tensor._make(
        np.where(take_a, a.data, b.data),
        (a, b),
        "elementwise_max",
        lambda g: (g * take_a, g * ~take_a),
    )


def l1_per_channel(x):
    """Sum of absolute values over the spatial axes: ``(B, C, H, W) -> (B, C)``."""
    x = as_tensor(x)
    sign = _branch(np.sign(x.data))
    return Tensor._make(
        (x.data * sign).sum(axis=(2, 3)),
        (x,),
        "l1_reduce_per_channel",
        lambda g: (g[:, :, None, None] * sign,),
    )


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._make(
        out, tuple(tensors), "concat", lambda g: tuple(np.split(g, splits, axis=axis))
    )


def maxpool2d(x, size=2):
    x = as_tensor(x)
    b, c, h, w = x.shape
    if h % size or w % size:
        raise ShapeError(f"maxpool2d: spatial size {h}x{w} not divisible by {size}")
    blocks = x.data.reshape(b, c, h // size, size, w // size, size).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(b, c, h // size, w // size, size * size)
    idx = _branch(flat.argmax(axis=-1))  # first maximum wins ties
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        onehot = np.zeros_like(flat)
        np.put_along_axis(onehot, idx[..., None], g[..., None], axis=-1)
        gx = onehot.reshape(b, c, h // size, w // size, size, size).transpose(0, 1, 2, 4, 3, 5)
        return (gx.reshape(b, c, h, w),)

    return Tensor._make(out, (x,), "maxpool2d", backward)


def batchnorm2d(x, gamma, beta, running_mean, running_var, training, momentum=0.1, eps=1e-5):
    """Batch normalisation over ``(batch, height, width)`` per channel.

    In training mode the running statistics (plain arrays) are updated in place
    with the unbiased batch variance. In eval mode they are used as-is and the
    op is a fixed per-channel affine map.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    xd = x.data
    shape = (1, -1, 1, 1)
    if training:
        n = xd.shape[0] * xd.shape[2] * xd.shape[3]
        mu = xd.mean(axis=(0, 2, 3))
        var = xd.var(axis=(0, 2, 3))
        if running_mean is not None:
            running_mean *= 1 - momentum
            running_mean += momentum * mu
            running_var *= 1 - momentum
            running_var += momentum * var * (n / max(n - 1, 1))
    else:
        mu, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu.reshape(shape)) * inv.reshape(shape)
    out = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)
    gd = gamma.data

    def backward(g):
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gbeta = g.sum(axis=(0, 2, 3))
        gxhat = g * gd.reshape(shape)
        if training:
            m = gxhat.mean(axis=(0, 2, 3), keepdims=True)
            mx = (gxhat * xhat).mean(axis=(0, 2, 3), keepdims=True)
            gx = (gxhat - m - xhat * mx) * inv.reshape(shape)
        else:
            gx = gxhat * inv.reshape(shape)
        return gx, ggamma, gbeta

    return Tensor._make(out.astype(xd.dtype, copy=False), (x, gamma, beta), "batchnorm2d", backward)


def channel_slice(x, start, stop):
    return x[:, start:stop]


def mse_loss(pred, target):
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size

    def backward(g):
        gd = g * (2.0 / n) * diff
        return gd, -gd

    return Tensor._make(np.asarray(np.mean(diff * diff), dtype=diff.dtype), (pred, target), "mse_loss", backward)


def _to_complex(d):
    b, c, h, w = d.shape
    pairs = d.reshape(b, c // 2, 2, h, w)
    return pairs[:, :, 0] + 1j * pairs[:, :, 1]


def _to_pairs(z, dtype):
    b, n, h, w = z.shape
    return np.stack([z.real, z.imag], axis=2).reshape(b, 2 * n, h, w).astype(dtype)


def _fft2c(z, inverse):
    fn = np.fft.ifft2 if inverse else np.fft.fft2
    return np.fft.fftshift(fn(np.fft.ifftshift(z, axes=(-2, -1)), norm="ortho"), axes=(-2, -1))


def ifft2c_channels(x):
    """Centered orthonormal inverse FFT of ``(re, im)`` channel pairs."""
    x = as_tensor(x)
    if x.shape[1] % 2:
        raise ShapeError(f"ifft2c_channels needs an even channel count, got {x.shape[1]}")
    dtype = x.dtype
    out = _to_pairs(_fft2c(_to_complex(x.data), inverse=True), dtype)
    # unitary map, so the adjoint is the forward transform
    return Tensor._make(
        out, (x,), "ifft2c", lambda g: (_to_pairs(_fft2c(_to_complex(g), inverse=False), dtype),)
    )


def rss(x):
    """Root-sum-of-squares over ``(re, im)`` channel pairs: ``(B, 2n, H, W) -> (B, H, W)``."""
    x = as_tensor(x)
    r = np.sqrt((x.data**2).sum(axis=1))
    nonzero = _branch(r > 0)
    safe = np.where(nonzero, r, 1)

    def backward(g):
        return (np.where(nonzero, g / safe, 0)[:, None] * x.data,)

    return Tensor._make(r, (x,), "rss", backward)


def require_scalar(t):
    if t.data.size != 1:
        raise GraphError(f"expected a scalar, got shape {t.shape}")
    if not np.isfinite(t.data).all():
        raise FloatingPointError("loss is not finite")
    return t
