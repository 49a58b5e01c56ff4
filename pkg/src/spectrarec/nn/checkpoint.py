"""HSW1 weight checkpoints.

Layout (little-endian): magic ``HSW1``; version u8; name length u16 and UTF-8
name; output channels u32; layer count u32; per layer kind code u8,
in_channels u32, out_channels u32, heads u32; parameter count u32; then the
parameters as float32.
"""
import struct

import numpy as np

from .._io import atomic_write
from ..errors import FormatError, IoError, SpecError, TruncationError
from .spec import LAYER_KINDS, LayerSpec, ModelSpec, param_count
from .weights import Weights

MAGIC = b"HSW1"
VERSION = 1
_LAYER = struct.Struct("<BIII")


def encode_checkpoint(spec, weights):
    name = spec.name.encode("utf-8")
    parts = [MAGIC, struct.pack("<BH", VERSION, len(name)), name,
             struct.pack("<II", spec.output_channels, len(spec.layers))]
    for layer in spec.layers:
        parts.append(_LAYER.pack(LAYER_KINDS.index(layer.kind), layer.in_channels,
                                 layer.out_channels, layer.heads))
    parts.append(struct.pack("<I", len(weights)))
    parts.append(np.ascontiguousarray(weights.params, dtype="<f4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise TruncationError("checkpoint truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))


def decode_checkpoint(buf):
    if buf[:4] != MAGIC:
        raise FormatError("not an HSW1 checkpoint")
    r = _Reader(buf)
    r.take(4)
    version, name_len = r.unpack("<BH")
    if version != VERSION:
        raise FormatError(f"unsupported HSW1 version {version}")
    name = r.take(name_len).decode("utf-8")
    channels, n_layers = r.unpack("<II")
    layers = []
    for _ in range(n_layers):
        code, cin, cout, heads = r.unpack(_LAYER.format)
        if code >= len(LAYER_KINDS):
            raise FormatError(f"unknown layer code {code}")
        layers.append(LayerSpec(LAYER_KINDS[code], cin, cout, heads))
    try:
        spec = ModelSpec(name, tuple(layers), channels)
    except SpecError as exc:
        raise FormatError(f"inconsistent model description: {exc}") from exc
    (count,) = r.unpack("<I")
    if count != param_count(spec):
        raise FormatError(f"{count} parameters stored, spec needs {param_count(spec)}")
    params = np.frombuffer(r.take(4 * count), dtype="<f4").astype(np.float32)
    if r.pos != len(buf):
        raise FormatError("trailing bytes after parameters")
    return spec, Weights.for_spec(spec, params)


def save_checkpoint(spec, weights, path):
    payload = encode_checkpoint(spec, weights)
    try:
        with atomic_write(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        if isinstance(exc, IoError):
            raise
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
