"""Minimal module system: parameter registration, train/eval mode, layers."""

from collections import OrderedDict

import numpy as np

from . import functional as F
from .tensor import Parameter, Tensor


class Module:
    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix=""):
        """Parameters in declaration order, with dotted names."""
        out = OrderedDict()
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                out[prefix + name] = value
        for name, child in self.children():
            out.update(child.named_parameters(prefix + name + "."))
        return out

    def parameters(self, trainable_only=True):
        return [p for p in self.named_parameters().values() if p.trainable or not trainable_only]

    def named_buffers(self, prefix=""):
        out = OrderedDict()
        for name in getattr(self, "_buffers", ()):
            out[prefix + name] = getattr(self, name)
        for name, child in self.children():
            out.update(child.named_buffers(prefix + name + "."))
        return out

    def train(self, mode=True):
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters(trainable_only=False):
            p.grad = None

    def astype(self, dtype):
        """Cast every parameter and buffer in place (float64 for gradient checks)."""
        for p in self.named_parameters().values():
            p.data = p.data.astype(dtype)
            p.grad = None
        for mod in self.modules():
            for name in getattr(mod, "_buffers", ()):
                setattr(mod, name, getattr(mod, name).astype(dtype))
        return self

    def modules(self):
        yield self
        for _, child in self.children():
            yield from child.modules()

    def state_dict(self):
        state = OrderedDict((k, p.data) for k, p in self.named_parameters().items())
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, state):
        params = self.named_parameters()
        for name, p in params.items():
            if name not in state:
                raise KeyError(f"missing parameter {name!r}")
            if state[name].shape != p.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.shape}")
            p.data = np.array(state[name], dtype=p.dtype)
        for mod_name, mod in self._named_modules():
            for b in getattr(mod, "_buffers", ()):
                key = f"{mod_name}{b}"
                if key not in state:
                    raise KeyError(f"missing buffer {key!r}")
                setattr(mod, b, np.array(state[key], dtype=getattr(mod, b).dtype))

    def _named_modules(self, prefix=""):
        yield prefix, self
        for name, child in self.children():
            yield from child._named_modules(prefix + name + ".")


def kaiming_uniform(rng, shape, fan_in, dtype=np.float32):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Module):
    def __init__(self, in_ch, out_ch, kernel_size=3, bias=True, rng=None, name="conv"):
        super().__init__()
        rng = rng or np.random.default_rng()
        self.padding = kernel_size // 2
        fan_in = in_ch * kernel_size * kernel_size
        self.weight = Parameter(
            kaiming_uniform(rng, (out_ch, in_ch, kernel_size, kernel_size), fan_in), "weight"
        )
        self.bias = Parameter(np.zeros(out_ch, np.float32), "bias") if bias else None

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, stride=1, padding=self.padding)


class ConvTranspose2d(Module):
    """Stride-2 unpooling with a 3x3 kernel; doubles height and width."""

    def __init__(self, in_ch, out_ch, kernel_size=3, bias=True, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng()
        fan_in = out_ch * kernel_size * kernel_size
        self.weight = Parameter(
            kaiming_uniform(rng, (in_ch, out_ch, kernel_size, kernel_size), fan_in), "weight"
        )
        self.bias = Parameter(np.zeros(out_ch, np.float32), "bias") if bias else None

    def forward(self, x):
        return F.conv2d_transpose(x, self.weight, self.bias, stride=2, padding=1, output_padding=1)


class Linear(Module):
    def __init__(self, in_features, out_features, bias=True, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng()
        self.weight = Parameter(
            kaiming_uniform(rng, (out_features, in_features), in_features), "weight"
        )
        self.bias = Parameter(np.zeros(out_features, np.float32), "bias") if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class BatchNorm2d(Module):
    _buffers = ("running_mean", "running_var")

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.gamma = Parameter(np.ones(channels, np.float32), "gamma")
        self.beta = Parameter(np.zeros(channels, np.float32), "beta")
        self.running_mean = np.zeros(channels, np.float32)
        self.running_var = np.ones(channels, np.float32)

    def forward(self, x):
        return F.batchnorm2d(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            self.training, self.momentum, self.eps,
        )


class ReLU(Module):
    def forward(self, x):
        return F.relu(x)


class Sequential(Module):
    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x


def as_input(x, requires_grad=False):
    """Wrap an array as a graph input, optionally tracking its gradient."""
    if isinstance(x, Tensor):
        x.requires_grad = requires_grad or x.requires_grad
        return x
    return Tensor(np.asarray(x), requires_grad=requires_grad)
