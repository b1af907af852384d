"""Multi-head scaled dot-product attention."""

from __future__ import annotations

import math
from typing import Optional

import torch
from torch import nn

from ..exceptions import InvalidArgument, ShapeMismatch


def causal_mask(n: int, device=None) -> torch.Tensor:
    """Boolean ``(n, n)`` mask, True where key ``j`` lies strictly after query ``i``."""
    return torch.ones(n, n, dtype=torch.bool, device=device).triu(1)


class MultiHeadAttention(nn.Module):
    """Queries from one token set, keys and values from another (or the same).

    Per head ``softmax(Q_h K_h^T / sqrt(d_k)) V_h`` with ``d_k = d_model / heads``;
    heads are concatenated and passed through ``o_proj``. ``value_bias=False``
    drops the bias on both the value and output projections, so an all-zero
    key/value source yields an all-zero output. The key projection carries no
    bias: it would add a per-query constant to every score, which softmax
    cancels, so its gradient is identically zero.
    """

    def __init__(
        self,
        d_model: int,
        heads: int,
        d_kv: Optional[int] = None,
        d_out: Optional[int] = None,
        value_bias: bool = True,
    ):
        super().__init__()
        if heads < 1 or d_model % heads != 0:
            raise InvalidArgument(f"d_model {d_model} is not divisible by {heads} heads")
        d_kv = d_kv or d_model
        self.d_model = d_model
        self.heads = heads
        self.d_k = d_model // heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_kv, d_model, bias=False)
        self.v_proj = nn.Linear(d_kv, d_model, bias=value_bias)
        self.o_proj = nn.Linear(d_model, d_out or d_model, bias=value_bias)
        self.last_weights = None

    def _split(self, t: torch.Tensor) -> torch.Tensor:
        b, n, _ = t.shape
        return t.view(b, n, self.heads, self.d_k).transpose(1, 2)

    def forward(
        self,
        query: torch.Tensor,
        kv: Optional[torch.Tensor] = None,
        causal: bool = False,
        key_padding_mask: Optional[torch.Tensor] = None,
        return_weights: bool = False,
    ):
        """``query`` is ``(B, Nq, D)``; ``kv`` is ``(B, Nk, D_kv)`` or a shared ``(Nk, D_kv)``."""
        self_attn = kv is None or kv is query
        if causal and not self_attn:
            raise InvalidArgument("causal masking applies to self-attention only")
        kv = query if kv is None else kv
        squeeze = query.dim() == 2
        if squeeze:
            query = query.unsqueeze(0)
            kv = kv.unsqueeze(0) if kv.dim() == 2 else kv
        if query.dim() != 3:
            raise ShapeMismatch(f"query must be (B, N, D), got {tuple(query.shape)}")
        if query.shape[-1] != self.q_proj.in_features:
            raise ShapeMismatch(f"query dim {query.shape[-1]} != {self.q_proj.in_features}")
        if kv.shape[-1] != self.k_proj.in_features:
            raise ShapeMismatch(f"key/value dim {kv.shape[-1]} != {self.k_proj.in_features}")
        b = query.shape[0]
        if kv.dim() == 2:
            k = self.k_proj(kv).expand(b, -1, -1)
            v = self.v_proj(kv).expand(b, -1, -1)
        else:
            if kv.shape[0] != b:
                raise ShapeMismatch("query and key/value batch sizes differ")
            k = self.k_proj(kv)
            v = self.v_proj(kv)
        q = self._split(self.q_proj(query))
        k = self._split(k)
        v = self._split(v)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_k)
        if causal:
            scores = scores.masked_fill(causal_mask(scores.shape[-1], scores.device), float("-inf"))
        if key_padding_mask is not None:
            scores = scores.masked_fill(key_padding_mask[:, None, None, :], float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(b, query.shape[1], self.d_model)
        out = self.o_proj(out)
        if squeeze:
            out = out.squeeze(0)
        self.last_weights = weights.detach()
        if return_weights:
            return out, weights
        return out


def multi_head_attention(q_src, kv_src, heads: int, causal: bool = False, params: MultiHeadAttention = None):
    """Functional entry point; builds a fresh module when ``params`` is omitted."""
    if params is None:
        params = MultiHeadAttention(q_src.shape[-1], heads, d_kv=kv_src.shape[-1]).to(q_src.dtype)
    elif params.heads != heads:
        raise InvalidArgument("heads disagrees with the supplied attention parameters")
    return params(q_src, kv_src, causal=causal)
