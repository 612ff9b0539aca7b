"""Network building blocks: parameter modules, GCD and GTE."""
from app.nn.gcd import DisentangledFeatures, GcdParams, context_vector, context_weights, disentangle, layer_norm, transform
from app.nn.gte import (
    DeformAttnParams,
    DenseAttnParams,
    EncoderBlockParams,
    GteParams,
    attend,
    deformable_attention,
    dense_attention,
    encoder_block,
    gte_forward,
)
from app.nn.module import Module

__all__ = [
    "DeformAttnParams",
    "DenseAttnParams",
    "DisentangledFeatures",
    "EncoderBlockParams",
    "GcdParams",
    "GteParams",
    "Module",
    "attend",
    "context_vector",
    "context_weights",
    "deformable_attention",
    "dense_attention",
    "disentangle",
    "encoder_block",
    "gte_forward",
    "layer_norm",
    "transform",
]
