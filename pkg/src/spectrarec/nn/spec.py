"""Layer and model descriptions, and parameter bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import SpecError

LAYER_KINDS = ("dense", "conv3", "conv1", "relu", "spectral_attention")
RGB_CHANNELS = 3
HIDDEN_WIDTHS = (8, 16, 32)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int
    out_channels: int
    heads: int = 1

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise SpecError(f"unknown layer kind {self.kind!r}")
        if self.in_channels < 1 or self.out_channels < 1 or self.heads < 1:
            raise SpecError("channel and head counts must be >= 1")
        if self.kind in ("relu", "spectral_attention") and self.in_channels != self.out_channels:
            raise SpecError(f"{self.kind} must preserve the channel count")

    def param_shapes(self):
        """Ordered (name, shape) pairs of this layer's parameters."""
        i, o = self.in_channels, self.out_channels
        if self.kind in ("dense", "conv1"):
            return (("weight", (i, o)), ("bias", (o,)))
        if self.kind == "conv3":
            return (("weight", (3, 3, i, o)), ("bias", (o,)))
        if self.kind == "spectral_attention":
            return (("query", (i, i)), ("key", (i, i)), ("value", (i, i)))
        return ()

    def param_count(self):
        total = 0
        for _, shape in self.param_shapes():
            n = 1
            for s in shape:
                n *= s
            total += n
        return total


@dataclass(frozen=True)
class ModelSpec:
    name: str
    layers: tuple
    output_channels: int

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise SpecError("a model needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_channels != nxt.in_channels:
                raise SpecError(f"channel mismatch between {prev} and {nxt}")
        if layers[-1].out_channels != self.output_channels:
            raise SpecError("last layer does not produce output_channels")
        object.__setattr__(self, "layers", layers)

    @property
    def input_channels(self):
        return self.layers[0].in_channels


def param_count(spec):
    return sum(layer.param_count() for layer in spec.layers)


def _ladder(kind, head_kind, channels):
    widths = (RGB_CHANNELS,) + HIDDEN_WIDTHS
    layers = []
    for a, b in zip(widths, widths[1:]):
        layers += [LayerSpec(kind, a, b), LayerSpec("relu", b, b)]
    layers.append(LayerSpec(head_kind, widths[-1], channels))
    return layers


def pixel_feature_net(channels):
    """Four per-pixel dense layers, 3 -> 8 -> 16 -> 32 -> C, ReLU between."""
    return ModelSpec("pixel_feature_net", _ladder("dense", "dense", channels), channels)


def local_feature_net(channels):
    """Three 3x3 convolutions 3 -> 8 -> 16 -> 32 and a 1x1 head to C."""
    return ModelSpec("local_feature_net", _ladder("conv3", "conv1", channels), channels)


def spectral_attention_net(channels, width=16, heads=2):
    """3x3 stem, one spectral-wise self-attention block, 1x1 head."""
    layers = [
        LayerSpec("conv3", RGB_CHANNELS, width),
        LayerSpec("relu", width, width),
        LayerSpec("spectral_attention", width, width, heads),
        LayerSpec("conv1", width, channels),
    ]
    return ModelSpec("spectral_attention_net", layers, channels)


MODELS = {
    "pixel_feature_net": pixel_feature_net,
    "local_feature_net": local_feature_net,
    "spectral_attention_net": spectral_attention_net,
}


def build_model(name, channels):
    try:
        return MODELS[name](channels)
    except KeyError:
        raise SpecError(f"unknown model {name!r}; choose from {', '.join(MODELS)}") from None
