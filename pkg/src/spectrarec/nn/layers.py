"""Forward and backward passes of the individual layer kinds.

All activations are single images in channel-last layout, ``(H, W, C)``.
Each ``*_backward`` returns ``(grad_input, {param_name: grad})``.
"""
import numpy as np

from .. import kernels
from ..errors import ShapeError


def pointwise_forward(x, weight, bias):
    return x @ weight + bias


def pointwise_backward(x, weight, gout):
    h, w, ci = x.shape
    g2 = gout.reshape(h * w, -1)
    gw = x.reshape(h * w, ci).T @ g2
    gb = g2.sum(axis=0)
    return gout @ weight.T, {"weight": gw, "bias": gb}


def conv3_forward(x, weight, bias):
    return kernels.conv3x3_forward(x, weight, bias)


def conv3_backward(x, weight, gout):
    gx, gw, gb = kernels.conv3x3_backward(x, weight, gout)
    return gx, {"weight": gw, "bias": gb}


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, gout):
    return gout * (x > 0), {}


def _softmax_rows(s):
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)


def attention_maps(x, query, key, heads):
    """Row-stochastic channel-to-channel attention matrices, one per head.

    Tokens are the channel maps of ``x`` flattened over H*W. Entry ``[j, i]``
    of a head's matrix is the weight query channel ``j`` gives key channel
    ``i``; the logits are scaled by ``1 / sqrt(H * W)``.
    """
    h, w, d = x.shape
    if d % heads:
        raise ShapeError(f"{d} channels not divisible by {heads} heads")
    p = x.reshape(h * w, d)
    q = p @ query
    k = p @ key
    scale = 1.0 / np.sqrt(h * w)
    size = d // heads
    maps = []
    for hd in range(heads):
        s = slice(hd * size, (hd + 1) * size)
        maps.append(_softmax_rows(scale * (q[:, s].T @ k[:, s])))
    return maps


def spectral_attention_forward(x, query, key, value, heads):
    """Residual spectral-wise self-attention: ``x + concat_h(V_h A_h^T)``."""
    h, w, d = x.shape
    p = x.reshape(h * w, d)
    v = p @ value
    out = p.copy()
    size = d // heads
    for hd, a in enumerate(attention_maps(x, query, key, heads)):
        s = slice(hd * size, (hd + 1) * size)
        out[:, s] += v[:, s] @ a.T
    return out.reshape(h, w, d)


def spectral_attention_backward(x, query, key, value, heads, gout):
    h, w, d = x.shape
    p = x.reshape(h * w, d)
    g = gout.reshape(h * w, d)
    q, k, v = p @ query, p @ key, p @ value
    scale = 1.0 / np.sqrt(h * w)
    size = d // heads
    dq, dk, dv = np.zeros_like(q), np.zeros_like(k), np.zeros_like(v)
    for hd, a in enumerate(attention_maps(x, query, key, heads)):
        s = slice(hd * size, (hd + 1) * size)
        go = g[:, s]
        dv[:, s] = go @ a
        da = go.T @ v[:, s]
        ds = a * (da - (da * a).sum(axis=1, keepdims=True))
        dq[:, s] = scale * (k[:, s] @ ds.T)
        dk[:, s] = scale * (q[:, s] @ ds)
    gx = g + dq @ query.T + dk @ key.T + dv @ value.T
    grads = {"query": p.T @ dq, "key": p.T @ dk, "value": p.T @ dv}
    return gx.reshape(h, w, d), grads
