"""Whole-network forward and backward passes."""
import numpy as np

from ..cube import Hypercube, RgbImage
from ..errors import ShapeError
from . import layers as L
from .weights import check_weights


def _as_input(spec, weights, rgb):
    x = rgb.data if isinstance(rgb, RgbImage) else np.asarray(rgb)
    if x.ndim != 3 or x.shape[2] != spec.input_channels:
        raise ShapeError(f"input must be H x W x {spec.input_channels}, got {x.shape}")
    return np.ascontiguousarray(x, dtype=weights.dtype)


def _layer_forward(layer, p, x):
    kind = layer.kind
    if kind in ("dense", "conv1"):
        return L.pointwise_forward(x, p["weight"], p["bias"])
    if kind == "conv3":
        return L.conv3_forward(x, p["weight"], p["bias"])
    if kind == "relu":
        return L.relu_forward(x)
    return L.spectral_attention_forward(x, p["query"], p["key"], p["value"], layer.heads)


def _layer_backward(layer, p, x, g):
    kind = layer.kind
    if kind in ("dense", "conv1"):
        return L.pointwise_backward(x, p["weight"], g)
    if kind == "conv3":
        return L.conv3_backward(x, p["weight"], g)
    if kind == "relu":
        return L.relu_backward(x, g)
    return L.spectral_attention_backward(x, p["query"], p["key"], p["value"], layer.heads, g)


def forward_cached(spec, weights, rgb):
    """Return the output array and the list of per-layer inputs."""
    check_weights(spec, weights)
    x = _as_input(spec, weights, rgb)
    inputs = []
    for i, layer in enumerate(spec.layers):
        inputs.append(x)
        x = _layer_forward(layer, weights.layer(i), x)
    return x, inputs


def forward(spec, weights, rgb):
    """Predict an (H, W, C) array from an (H, W, 3) image."""
    return forward_cached(spec, weights, rgb)[0]


def predict_cube(spec, weights, rgb, wavelengths):
    return Hypercube(forward(spec, weights, rgb), wavelengths)


def backward_cached(spec, weights, inputs, grad_out):
    grad_w = np.zeros_like(weights.params)
    g = np.asarray(grad_out, dtype=weights.dtype)
    for i in range(len(spec.layers) - 1, -1, -1):
        g, pg = _layer_backward(spec.layers[i], weights.layer(i), inputs[i], g)
        views = weights.layer(i, grad_w)
        for name, val in pg.items():
            views[name][...] = val
    return grad_w, g


def backward(spec, weights, rgb, grad_out):
    """Gradients of ``<grad_out, forward(spec, weights, rgb)>``.

    Returns ``(grad_weights, grad_input)``; ``grad_weights`` has the flat
    layout of ``weights.params``.
    """
    out, inputs = forward_cached(spec, weights, rgb)
    grad_out = np.asarray(grad_out)
    if grad_out.shape != out.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} != output shape {out.shape}")
    return backward_cached(spec, weights, inputs, grad_out)
