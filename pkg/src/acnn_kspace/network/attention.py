"""Frequency- and channel-attention layers and the blocks that combine them."""

from dataclasses import dataclass

import numpy as np

from ..autodiff import functional as F
from ..autodiff.nn import Module, kaiming_uniform
from ..autodiff.tensor import Parameter, as_tensor
from ..validation import ShapeError

MODES = ("parallel", "channel_then_frequency", "frequency_then_channel")
MODE_ALIASES = {"cf": "channel_then_frequency", "fc": "frequency_then_channel", "parallel": "parallel"}
LAYERS = ("both", "channel", "frequency", "none")


def frequency_attention(x, w_conv, bias=None):
    """Per-location gate from a 1x1 convolution collapsing all channels.

    Returns ``(S_f, Y_f)`` with ``S_f`` of shape ``(B, 1, H, W)`` in (0, 1) and
    ``Y_f = S_f * x`` broadcast over channels.
    """
    x = as_tensor(x)
    w_conv = as_tensor(w_conv)
    if w_conv.shape[1] != x.shape[1]:
        raise ShapeError(
            f"frequency attention weight has {w_conv.shape[1]} channels, input has {x.shape[1]}"
        )
    s = F.sigmoid(F.conv2d(x, w_conv, bias))
    return s, s * x


def channel_attention(x, w_fc):
    """Per-channel gate from the L1 norm of each channel through a bias-free FC layer.

    Returns ``(S_c, Y_c)`` with ``S_c`` of shape ``(B, C)``.
    """
    x = as_tensor(x)
    w_fc = as_tensor(w_fc)
    c = x.shape[1]
    if w_fc.shape != (c, c):
        raise ShapeError(f"channel attention weight must be ({c}, {c}), got {w_fc.shape}")
    s = F.sigmoid(F.linear(F.l1_per_channel(x), w_fc))
    return s, s.reshape(x.shape[0], c, 1, 1) * x


@dataclass
class AttentionBlockConfig:
    mode: str = "parallel"
    channels: int = 64
    layers: str = "both"

    def __post_init__(self):
        self.mode = MODE_ALIASES.get(self.mode, self.mode)
        if self.mode not in MODES:
            raise ValueError(f"attention mode must be one of {MODES}, got {self.mode!r}")
        if self.layers not in LAYERS:
            raise ValueError(f"attention layers must be one of {LAYERS}, got {self.layers!r}")


class FrequencyAttention(Module):
    def __init__(self, channels, rng):
        super().__init__()
        self.weight = Parameter(kaiming_uniform(rng, (1, channels, 1, 1), channels), "weight")
        self.bias = Parameter(np.zeros(1, np.float32), "bias")
        self.last_map = None

    def forward(self, x):
        s, y = frequency_attention(x, self.weight, self.bias)
        self.last_map = s.data[:, 0]
        return y


class ChannelAttention(Module):
    # Zero init: the L1 squeeze of a full feature map is in the thousands, so a
    # random FC layer would start every gate saturated at 0 or 1.
    def __init__(self, channels, rng):
        super().__init__()
        self.weight = Parameter(np.zeros((channels, channels), np.float32), "weight")
        self.last_map = None

    def forward(self, x):
        s, y = channel_attention(x, self.weight)
        self.last_map = s.data
        return y


class AttentionBlock(Module):
    """Channel and/or frequency attention, applied in parallel with a Max-out or in sequence."""

    def __init__(self, cfg, rng):
        super().__init__()
        self.cfg = cfg
        use_c = cfg.layers in ("both", "channel")
        use_f = cfg.layers in ("both", "frequency")
        self.channel = ChannelAttention(cfg.channels, rng) if use_c else None
        self.frequency = FrequencyAttention(cfg.channels, rng) if use_f else None

    def forward(self, x):
        if x.shape[1] != self.cfg.channels:
            raise ShapeError(
                f"attention block built for {self.cfg.channels} channels, got {x.shape[1]}"
            )
        if self.channel is None and self.frequency is None:
            return x
        if self.channel is None:
            return self.frequency(x)
        if self.frequency is None:
            return self.channel(x)
        if self.cfg.mode == "parallel":
            return F.maximum(self.channel(x), self.frequency(x))
        if self.cfg.mode == "channel_then_frequency":
            return self.frequency(self.channel(x))
        return self.channel(self.frequency(x))


def attention_block(x, cfg, rng=None):
    """Apply a freshly initialised :class:`AttentionBlock` to ``x``."""
    return AttentionBlock(cfg, rng or np.random.default_rng(0))(x)
