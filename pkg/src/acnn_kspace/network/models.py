"""Residual encoder-decoder networks: ACNN-k-Space and the two U-Net baselines."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import functional as F
from ..autodiff.nn import BatchNorm2d, Conv2d, ConvTranspose2d, Module, ReLU, Sequential
from ..autodiff.tensor import Parameter, Tensor
from ..validation import ShapeError
from .attention import LAYERS, AttentionBlock, AttentionBlockConfig

KINDS = ("acnn", "kspace_unet", "image_unet")


@dataclass
class ModelConfig:
    """Architecture description; everything needed to rebuild a network.

    ``n_slices`` is the neighborhood size ``2s + 1``.
    """

    kind: str = "acnn"
    n_slices: int = 1
    n_coils: int = 1
    encoder_widths: tuple = (64, 128, 256, 512)
    bottleneck_width: int = 1024
    final_hidden_width: int = 32
    attention_mode: str = "parallel"
    attention_layers: str | None = None
    input_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_slices < 1 or self.n_slices % 2 == 0:
            raise ValueError(f"n_slices must be a positive odd number (2s+1), got {self.n_slices}")
        if self.kind == "image_unet" and self.n_slices != 1:
            raise ValueError("the image-domain baseline takes a single input slice")
        if self.attention_layers is None:
            self.attention_layers = "both" if self.kind == "acnn" else "none"
        if self.attention_layers not in LAYERS:
            raise ValueError(f"attention_layers must be one of {LAYERS}")
        if self.kind != "acnn" and self.attention_layers != "none":
            raise ValueError(f"attention blocks are only available for kind='acnn', not {self.kind!r}")
        self.encoder_widths = tuple(int(w) for w in self.encoder_widths)
        AttentionBlockConfig(self.attention_mode)  # validates the mode name

    @classmethod
    def toy(cls, **overrides):
        """Same topology at desk scale: 64x64 input, widths 16-32-64, bottleneck 128."""
        base = dict(
            encoder_widths=(16, 32, 64), bottleneck_width=128, final_hidden_width=8, input_size=64
        )
        base.update(overrides)
        return cls(**base)

    @property
    def s(self):
        return (self.n_slices - 1) // 2

    @property
    def in_channels(self):
        if self.kind == "image_unet":
            return 2 * self.n_coils
        return 2 * self.n_slices * self.n_coils

    @property
    def out_channels(self):
        return 2 * self.n_coils

    @property
    def n_levels(self):
        return len(self.encoder_widths)

    def to_json(self):
        d = asdict(self)
        d["encoder_widths"] = list(self.encoder_widths)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def conv_stage(in_ch, out_ch, rng):
    """Two 3x3 convolutions, each followed by ReLU then batch norm."""
    return Sequential(
        Conv2d(in_ch, out_ch, 3, rng=rng), ReLU(), BatchNorm2d(out_ch),
        Conv2d(out_ch, out_ch, 3, rng=rng), ReLU(), BatchNorm2d(out_ch),
    )


class ReconNet(Module):
    """U-Net backbone with optional attention before every pool/unpool and a residual output.

    The residual adds the network output to the centre slice's ``2n`` input
    channels (for the image-domain baseline, to its ``2n`` input channels).
    """

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        widths = list(cfg.encoder_widths)
        att = cfg.kind == "acnn" and cfg.attention_layers != "none"

        def block(c):
            if not att:
                return None
            return AttentionBlock(AttentionBlockConfig(cfg.attention_mode, c, cfg.attention_layers), rng)

        self.encoders, self.enc_att = [], []
        prev = cfg.in_channels
        for w in widths:
            self.encoders.append(conv_stage(prev, w, rng))
            self.enc_att.append(block(w))
            prev = w
        self.bottleneck = conv_stage(prev, cfg.bottleneck_width, rng)
        self.ups, self.up_att, self.decoders = [], [], []
        prev = cfg.bottleneck_width
        for w in reversed(widths):
            self.up_att.append(block(prev))
            self.ups.append(ConvTranspose2d(prev, w, 3, rng=rng))
            self.decoders.append(conv_stage(2 * w, w, rng))
            prev = w
        self.final_hidden = Sequential(
            Conv2d(prev, cfg.final_hidden_width, 3, rng=rng), ReLU(), BatchNorm2d(cfg.final_hidden_width)
        )
        self.output = Conv2d(cfg.final_hidden_width, cfg.out_channels, 1, bias=False, rng=rng)
        # start from the zero-filled solution: the residual branch is silent at init
        self.output.weight.data[...] = 0

    def attention_blocks(self):
        return [b for b in self.enc_att + self.up_att if b is not None]

    def _check_input(self, x):
        cfg = self.cfg
        if x.ndim != 4:
            raise ShapeError(f"network input must be (batch, channels, H, W), got {x.shape}")
        if x.shape[1] != cfg.in_channels:
            raise ShapeError(
                f"network expects {cfg.in_channels} input channels "
                f"(kind={cfg.kind}, slices={cfg.n_slices}, coils={cfg.n_coils}), got {x.shape[1]}"
            )
        div = 2**cfg.n_levels
        h, w = x.shape[-2:]
        if h % div or w % div:
            raise ShapeError(
                f"input size {h}x{w} is not divisible by {div} ({cfg.n_levels} pooling levels)"
            )

    def forward(self, x):
        x = x if isinstance(x, Tensor) else Tensor(x)
        self._check_input(x)
        skips = []
        h = x
        for i, (enc, att) in enumerate(zip(self.encoders, self.enc_att)):
            h = _stage(f"encoder.{i}", enc, h)
            if att is not None:
                h = _stage(f"encoder_attention.{i}", att, h)
            skips.append(h)
            h = F.maxpool2d(h)
        h = _stage("bottleneck", self.bottleneck, h)
        for i, (att, up, dec) in enumerate(zip(self.up_att, self.ups, self.decoders)):
            if att is not None:
                h = _stage(f"decoder_attention.{i}", att, h)
            h = _stage(f"unpool.{i}", up, h)
            h = F.concat([h, skips[-1 - i]], axis=1)
            h = _stage(f"decoder.{i}", dec, h)
        h = _stage("final_hidden", self.final_hidden, h)
        out = _stage("output", self.output, h)
        n2 = self.cfg.out_channels
        start = self.cfg.s * n2 if self.cfg.kind != "image_unet" else 0
        return out + x[:, start : start + n2]


def _stage(name, module, x):
    try:
        return module(x)
    except ShapeError as exc:
        raise ShapeError(f"at {name}: {exc}") from exc


def build_model(cfg):
    if cfg.input_size % (2**cfg.n_levels):
        raise ValueError(
            f"input_size {cfg.input_size} must be divisible by 2**{cfg.n_levels} = {2**cfg.n_levels}"
        )
    return ReconNet(cfg)


def count_params(model):
    return int(sum(p.data.size for p in model.parameters()))


def attention_param_count(model):
    return int(sum(p.data.size for b in model.attention_blocks() for p in b.parameters()))
