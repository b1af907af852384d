"""Cross-attention from signal patches onto the semantic anchors."""

from __future__ import annotations

import torch
from torch import nn

from ..nncore.attention import MultiHeadAttention


class Reprogrammer(nn.Module):
    """Queries from patch embeddings, keys and values from the anchors ``E'``."""

    def __init__(self, d_model: int, heads: int, d_anchor: int = None, d_out: int = None):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, heads, d_kv=d_anchor or d_model, d_out=d_out or d_model)

    def forward(self, x_s: torch.Tensor, anchors: torch.Tensor, return_weights: bool = False):
        return self.attn(x_s, anchors, return_weights=return_weights)


def reprogram(x_s, anchors, params: Reprogrammer):
    seq = x_s.x_s if hasattr(x_s, "x_s") else x_s
    return params(seq, anchors)
