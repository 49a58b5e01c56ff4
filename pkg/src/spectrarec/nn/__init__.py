"""Minimal numpy network engine with exact gradients."""
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import attention_maps, spectral_attention_backward, spectral_attention_forward
from .model import backward, forward, predict_cube
from .spec import (
    MODELS,
    LayerSpec,
    ModelSpec,
    build_model,
    local_feature_net,
    param_count,
    pixel_feature_net,
    spectral_attention_net,
)
from .weights import Weights, head_size, init_weights, replace_head

__all__ = [
    "MODELS", "LayerSpec", "ModelSpec", "Weights", "attention_maps", "backward", "build_model",
    "forward", "head_size", "init_weights", "load_checkpoint", "local_feature_net", "param_count",
    "pixel_feature_net", "predict_cube", "replace_head", "save_checkpoint",
    "spectral_attention_backward", "spectral_attention_forward", "spectral_attention_net",
]
