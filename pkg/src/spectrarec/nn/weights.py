"""Flat parameter storage, initialisation and head replacement."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError, SpecError
from .spec import LayerSpec, ModelSpec, param_count


def layer_index(spec):
    """Per layer, a tuple of (name, offset, shape) into the flat vector."""
    index, offset = [], 0
    for layer in spec.layers:
        entries = []
        for name, shape in layer.param_shapes():
            entries.append((name, offset, shape))
            offset += int(np.prod(shape))
        index.append(tuple(entries))
    return tuple(index)


@dataclass(eq=False)
class Weights:
    params: np.ndarray
    index: tuple

    @classmethod
    def for_spec(cls, spec, params):
        params = np.asarray(params)
        if params.ndim != 1 or params.size != param_count(spec):
            raise ShapeError(f"{params.size} parameters for a spec needing {param_count(spec)}")
        return cls(params, layer_index(spec))

    def __len__(self):
        return self.params.size

    @property
    def dtype(self):
        return self.params.dtype

    def layer(self, i, params=None):
        """Views of layer ``i``'s tensors in ``params`` (default: own vector)."""
        flat = self.params if params is None else params
        return {name: flat[off:off + int(np.prod(shape))].reshape(shape) for name, off, shape in self.index[i]}

    def copy(self):
        return Weights(self.params.copy(), self.index)

    def astype(self, dtype):
        return Weights(self.params.astype(dtype), self.index)


def check_weights(spec, weights):
    if len(weights) != param_count(spec):
        raise ShapeError(f"weights hold {len(weights)} parameters, spec needs {param_count(spec)}")


def _init_layer(layer, rng, dtype):
    out = []
    for name, shape in layer.param_shapes():
        if name == "bias":
            out.append(np.zeros(shape, dtype=dtype))
            continue
        if layer.kind == "conv3":
            fan_in, fan_out = 9 * layer.in_channels, 9 * layer.out_channels
        else:
            fan_in, fan_out = layer.in_channels, layer.out_channels
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        out.append(rng.uniform(-bound, bound, size=shape).astype(dtype))
    return [a.ravel() for a in out]


def init_weights(spec, seed, dtype=np.float64):
    """Uniform(-b, b) weights with b = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for layer in spec.layers:
        parts.extend(_init_layer(layer, rng, dtype))
    flat = np.concatenate(parts) if parts else np.zeros(0, dtype=dtype)
    return Weights.for_spec(spec, flat.astype(dtype, copy=False))


def head_size(spec):
    return spec.layers[-1].param_count()


def replace_head(spec, weights, new_output_channels, seed):
    """Swap the final dense/1x1 layer for a freshly initialised one with a new width.

    Every body parameter is copied bit for bit.
    """
    last = spec.layers[-1]
    if last.kind not in ("dense", "conv1"):
        raise SpecError(f"cannot replace a {last.kind} head")
    check_weights(spec, weights)
    new_last = LayerSpec(last.kind, last.in_channels, new_output_channels)
    new_spec = ModelSpec(spec.name, spec.layers[:-1] + (new_last,), new_output_channels)
    body = weights.params[: len(weights) - head_size(spec)]
    head = _init_layer(new_last, np.random.default_rng(seed), weights.dtype)
    params = np.concatenate([body.copy()] + head).astype(weights.dtype, copy=False)
    return new_spec, Weights.for_spec(new_spec, params)
