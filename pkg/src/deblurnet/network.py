"""The three-stage residual pyramid network.

Layer table (full width):

    N1: conv 96/11 s2, 256/7, 384/7, 384/7 s2, 256/3, 256/3, 3/3
    N2: conv 256/5 x4, deconv 3/5 up2
    N3: same as N2

Hidden layers are followed by batch normalization and ReLU. The last layer of
each stage emits a 3-channel residual and is zero-initialized, so an untrained
network is the identity at every scale.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from deblurnet import functional as F
from deblurnet.errors import ShapeError
from deblurnet.tensor import Tensor

# (out_channels, kernel, stride, transposed)
N1_LAYERS = [(96, 11, 2, False), (256, 7, 1, False), (384, 7, 1, False), (384, 7, 2, False),
             (256, 3, 1, False), (256, 3, 1, False), (3, 3, 1, False)]
N2_LAYERS = [(256, 5, 1, False)] * 4 + [(3, 5, 2, True)]
N3_LAYERS = list(N2_LAYERS)

IMAGE_CHANNELS = 3


def scaled_channels(channels, width_multiplier):
    return max(1, int(round(channels * width_multiplier)))


class Layer:
    """One conv or deconv with its optional batch norm (followed by ReLU)."""

    def __init__(self, spec, weight, bias, bn=None):
        self.spec = spec
        self.weight = weight
        self.bias = bias
        self.bn = bn

    def __call__(self, x, training):
        if self.spec.transposed:
            y = F.conv2d_transposed(x, self.spec, self.weight, self.bias)
        else:
            y = F.conv2d(x, self.spec, self.weight, self.bias)
        if self.bn is not None:
            y = F.relu(F.batchnorm(y, self.bn, training))
        return y


def _build_stage(table, width_multiplier, rng, dtype):
    layers = []
    cin = IMAGE_CHANNELS
    for idx, (cout, k, stride, transposed) in enumerate(table):
        last = idx == len(table) - 1
        if not last:
            cout = scaled_channels(cout, width_multiplier)
        spec = F.ConvSpec(cin, cout, k, stride, transposed)
        if last:
            w = np.zeros(spec.weight_shape, dtype=dtype)
        else:
            fan_in = cin * k * k
            w = (rng.standard_normal(spec.weight_shape) * np.sqrt(2.0 / fan_in)).astype(dtype)
        weight = Tensor(w, requires_grad=True)
        bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)
        bn = None if last else F.BatchNormState.create(cout, dtype=dtype)
        layers.append(Layer(spec, weight, bias, bn))
        cin = cout
    return layers


class DeblurNetParams:
    """All learnable weights and batch-norm buffers of the three stages."""

    def __init__(self, n1, n2, n3, width_multiplier=Fraction(1), dtype=np.float32):
        self.n1 = n1
        self.n2 = n2
        self.n3 = n3
        self.width_multiplier = Fraction(width_multiplier)
        self.dtype = np.dtype(dtype)

    @classmethod
    def create(cls, width_multiplier=1, seed=0, dtype=np.float32, rng=None):
        wm = Fraction(width_multiplier).limit_denominator(1000)
        rng = np.random.default_rng(seed) if rng is None else rng
        return cls(
            _build_stage(N1_LAYERS, wm, rng, dtype),
            _build_stage(N2_LAYERS, wm, rng, dtype),
            _build_stage(N3_LAYERS, wm, rng, dtype),
            width_multiplier=wm,
            dtype=dtype,
        )

    def stages(self):
        return (("n1", self.n1), ("n2", self.n2), ("n3", self.n3))

    def named_parameters(self):
        for stage, layers in self.stages():
            for i, layer in enumerate(layers):
                prefix = f"{stage}.{i}"
                yield f"{prefix}.weight", layer.weight
                yield f"{prefix}.bias", layer.bias
                if layer.bn is not None:
                    yield f"{prefix}.bn.gamma", layer.bn.gamma
                    yield f"{prefix}.bn.beta", layer.bn.beta

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self):
        for stage, layers in self.stages():
            for i, layer in enumerate(layers):
                if layer.bn is not None:
                    yield f"{stage}.{i}.bn.running_mean", layer.bn.running_mean
                    yield f"{stage}.{i}.bn.running_var", layer.bn.running_var

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def zero_residual_layers(self):
        """Zero the final layer of every stage, making the network the identity."""
        for _, layers in self.stages():
            layers[-1].weight.data[...] = 0
            layers[-1].bias.data[...] = 0


@dataclass
class PyramidOutput:
    s4: Tensor
    s2: Tensor
    s1: Tensor
    r1: Tensor
    r2: Tensor
    r3: Tensor


def _run(layers, x, training):
    for layer in layers:
        x = layer(x, training)
    return x


def _check_divisible(g):
    if g.data.ndim != 4:
        raise ShapeError(f"expected a (B, 3, H, W) tensor, got shape {g.shape}", "rank")
    H, W = g.shape[-2:]
    if H % 4:
        raise ShapeError(f"height {H} is not divisible by 4", "height")
    if W % 4:
        raise ShapeError(f"width {W} is not divisible by 4", "width")


def forward_n1(g, params, training=True):
    """Residual of the first stage at 1/4 resolution."""
    _check_divisible(g)
    return _run(params.n1, g, training)


def forward_pyramid(g, params, training=True):
    _check_divisible(g)
    r1 = _run(params.n1, g, training)
    s4 = r1 + F.downsample(g, 4)
    r2 = _run(params.n2, s4, training)
    s2 = r2 + F.downsample(g, 2)
    r3 = _run(params.n3, s2, training)
    s1 = r3 + g
    return PyramidOutput(s4=s4, s2=s2, s1=s1, r1=r1, r2=r2, r3=r3)


@dataclass
class LossBreakdown:
    l1: float
    l2: float
    l3: float
    total: float


def loss_total(g, f, params, training=True, reduction="mean"):
    """Sum of the three scale-wise squared errors.

    Returns ``(total, breakdown, output)`` where ``total`` is a scalar tensor
    ready for ``backward()``.
    """
    if g.shape != f.shape:
        raise ShapeError(f"blurry {g.shape} and sharp {f.shape} shapes differ", "shape")
    out = forward_pyramid(g, params, training)
    l1 = F.sse_loss(out.s4, F.downsample(f, 4), reduction)
    l2 = F.sse_loss(out.s2, F.downsample(f, 2), reduction)
    l3 = F.sse_loss(out.s1, f, reduction)
    total = l1 + l2 + l3
    breakdown = LossBreakdown(l1.item(), l2.item(), l3.item(), total.item())
    return total, breakdown, out

