"""Differentiable primitives used by the network."""
from dataclasses import dataclass

import numpy as np

from deblurnet import kernels
from deblurnet.errors import DegenerateStatisticsError, ShapeError, UnsupportedConfigError
from deblurnet.tensor import Tensor


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    transposed: bool = False

    def __post_init__(self):
        if self.kernel_size % 2 != 1:
            raise UnsupportedConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.stride not in (1, 2):
            raise UnsupportedConfigError(f"stride must be 1 or 2, got {self.stride}")
        if self.transposed and self.stride != 2:
            raise UnsupportedConfigError("transposed convolution supports stride 2 only")

    @property
    def padding(self):
        return (self.kernel_size - 1) // 2

    @property
    def weight_shape(self):
        k = self.kernel_size
        if self.transposed:
            return (self.in_channels, self.out_channels, k, k)
        return (self.out_channels, self.in_channels, k, k)


def _check_input(x, spec, weight, bias, op):
    if x.data.ndim != 4:
        raise ShapeError(f"{op}: input must be 4-D (B, C, H, W), got shape {x.shape}", "rank")
    if x.shape[1] != spec.in_channels:
        raise ShapeError(
            f"{op}: input channel dimension is {x.shape[1]}, spec expects {spec.in_channels}",
            "channels")
    if weight.shape != spec.weight_shape:
        raise ShapeError(
            f"{op}: weight shape {weight.shape} != expected {spec.weight_shape}", "weight")
    if bias is not None and bias.shape != (spec.out_channels,):
        raise ShapeError(
            f"{op}: bias shape {bias.shape} != ({spec.out_channels},)", "bias")


def conv2d(x, spec, weight, bias=None):
    """Zero "same"-padded convolution; output extents are ceil(H/stride), ceil(W/stride)."""
    if spec.transposed:
        raise UnsupportedConfigError("conv2d called with a transposed spec")
    _check_input(x, spec, weight, bias, "conv2d")
    B, C, H, W = x.shape
    k, s, p = spec.kernel_size, spec.stride, spec.padding
    ho, wo = -(-H // s), -(-W // s)
    cout = spec.out_channels

    cols = kernels.im2col(x.data, k, s, p, ho, wo)
    wmat = weight.data.reshape(cout, -1)
    out = np.matmul(wmat, cols)
    if bias is not None:
        out += bias.data[:, None]
    out = np.ascontiguousarray(out.reshape(cout, B, ho, wo).transpose(1, 0, 2, 3))

    def backward(g):
        g = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(cout, B * ho * wo)
        gx = gw = gb = None
        if x.requires_grad:
            gx = kernels.col2im(np.matmul(wmat.T, g), B, C, H, W, k, s, p, ho, wo)
        if weight.requires_grad:
            gw = np.matmul(g, cols.T).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=1)
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(out, parents, backward)


def conv2d_transposed(x, spec, weight, bias=None):
    """Stride-2 fractional-stride convolution, the adjoint of :func:`conv2d`.

    ``weight`` has shape (Cin, Cout, k, k); the same array used as a conv2d
    weight maps Cout channels at (2H, 2W) back to Cin channels at (H, W).
    """
    if not spec.transposed:
        raise UnsupportedConfigError("conv2d_transposed called with a non-transposed spec")
    _check_input(x, spec, weight, bias, "conv2d_transposed")
    B, C, H, W = x.shape
    k, s, p = spec.kernel_size, spec.stride, spec.padding
    cout = spec.out_channels
    ho, wo = s * H, s * W

    wmat = weight.data.reshape(C, -1)
    xm = np.ascontiguousarray(x.data.transpose(1, 0, 2, 3)).reshape(C, B * H * W)
    out = kernels.col2im(np.matmul(wmat.T, xm), B, cout, ho, wo, k, s, p, H, W)
    if bias is not None:
        out += bias.data[None, :, None, None]

    def backward(g):
        gcols = kernels.im2col(np.ascontiguousarray(g), k, s, p, H, W)
        gx = gw = gb = None
        if x.requires_grad:
            gx = np.matmul(wmat, gcols).reshape(C, B, H, W).transpose(1, 0, 2, 3)
        if weight.requires_grad:
            gw = np.matmul(xm, gcols.T).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(out, parents, backward)


@dataclass
class BatchNormState:
    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.1

    @classmethod
    def create(cls, channels, dtype=np.float32, eps=1e-5, momentum=0.1):
        return cls(
            gamma=Tensor(np.ones(channels, dtype=dtype), requires_grad=True),
            beta=Tensor(np.zeros(channels, dtype=dtype), requires_grad=True),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
            eps=eps,
            momentum=momentum,
        )

    @property
    def channels(self):
        return self.gamma.shape[0]


def batchnorm(x, state, training):
    """Per-channel normalization over (B, H, W) followed by scale and shift."""
    if x.data.ndim != 4 or x.shape[1] != state.channels:
        raise ShapeError(
            f"batchnorm: input shape {x.shape} does not match {state.channels} channels",
            "channels")
    B, C, H, W = x.shape
    n = B * H * W
    dt = x.dtype.type
    gamma, beta = state.gamma, state.beta

    if training:
        if n == 1:
            raise DegenerateStatisticsError(
                "batchnorm: batch and spatial size 1 give no statistics in training mode")
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        m = state.momentum
        state.running_mean[...] = (1 - m) * state.running_mean + m * mean
        state.running_var[...] = (1 - m) * state.running_var + m * var * (n / (n - 1))
    else:
        mean = state.running_mean
        var = state.running_var

    inv_std = (1.0 / np.sqrt(var + dt(state.eps))).astype(x.dtype)
    xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def backward(g):
        gg = (g * xhat).sum(axis=(0, 2, 3))
        gb = g.sum(axis=(0, 2, 3))
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data[None, :, None, None]
            if training:
                gx = (inv_std[None, :, None, None] / n) * (
                    n * gxhat
                    - gxhat.sum(axis=(0, 2, 3), keepdims=True)
                    - xhat * (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
            else:
                gx = gxhat * inv_std[None, :, None, None]
        return gx, gg, gb

    return Tensor._make(out, (x, gamma, beta), backward)


def relu(x):
    mask = x.data > 0
    return Tensor._make(np.where(mask, x.data, 0).astype(x.dtype), (x,),
                        lambda g: (g * mask,))


def _halve(a):
    B, C, H, W = a.shape
    r = a.reshape(B, C, H // 2, 2, W // 2, 2)
    return ((r[:, :, :, 0, :, 0] + r[:, :, :, 0, :, 1])
            + (r[:, :, :, 1, :, 0] + r[:, :, :, 1, :, 1])) * a.dtype.type(0.25)


def downsample_array(a, k):
    """k x k block average of a (B, C, H, W) array, k in {1, 2, 4}.

    Factor 4 is computed as two halvings, so composing two factor-2 calls
    reproduces it exactly.
    """
    if k not in (1, 2, 4):
        raise UnsupportedConfigError(f"downsample factor must be 2 or 4, got {k}")
    H, W = a.shape[-2:]
    if H % k or W % k:
        raise ShapeError(
            f"downsample: extent {H}x{W} is not divisible by {k}; crop the input first",
            "height" if H % k else "width")
    while k > 1:
        a = _halve(a)
        k //= 2
    return a


def downsample(x, k):
    out = downsample_array(x.data, k)
    inv = x.dtype.type(1.0 / (k * k))

    def backward(g):
        return (np.repeat(np.repeat(g, k, axis=2), k, axis=3) * inv,)

    return Tensor._make(out, (x,), backward)


def sse_loss(a, b, reduction="mean"):
    """Squared error between two same-shaped tensors, summed or averaged."""
    if a.shape != b.shape:
        raise ShapeError(f"sse_loss: shapes {a.shape} and {b.shape} differ", "shape")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    diff = a.data - b.data
    total = np.sum(diff * diff)
    scale = a.dtype.type(1.0 / diff.size) if reduction == "mean" else a.dtype.type(1.0)
    out = np.asarray(total * scale, dtype=a.dtype)

    def backward(g):
        ga = (2 * scale * g) * diff
        return ga, -ga

    return Tensor._make(out, (a, b), backward)
