"""Vocabulary embeddings, derived semantic anchors and top-K hybrid prompt selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from ..exceptions import InvalidArgument, ShapeMismatch
from ..nncore.ops import embedding_lookup
from . import tokenizer


class AnchorTable(nn.Module):
    """Trainable embedding table ``E`` (V x D) and mixing weights ``M`` (V' x V).

    Anchors are always derived as ``E' = M @ E`` on request; they are never
    stored, so they cannot go stale after a parameter update.
    """

    def __init__(self, vocab_size: int, n_anchors: int, d_model: int):
        super().__init__()
        if not 1 <= n_anchors < vocab_size:
            raise InvalidArgument(f"need 1 <= n_anchors < vocab_size, got {n_anchors} vs {vocab_size}")
        self.embeddings = nn.Parameter(torch.randn(vocab_size, d_model) * d_model ** -0.5)
        self.mixing = nn.Parameter(torch.randn(n_anchors, vocab_size) * vocab_size ** -0.5)

    @property
    def vocab_size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def n_anchors(self) -> int:
        return self.mixing.shape[0]

    def anchors(self) -> torch.Tensor:
        return self.mixing @ self.embeddings

    def embed(self, ids) -> torch.Tensor:
        return embedding_lookup(self.embeddings, ids)


def derive_anchors(table: AnchorTable) -> torch.Tensor:
    return table.anchors()


@dataclass
class PromptEmbedding:
    tokens: list
    p_t: torch.Tensor

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise InvalidArgument("a prompt needs at least one token")


def tokenize_and_embed(text: str, table: AnchorTable) -> PromptEmbedding:
    if not text:
        raise InvalidArgument("prompt text must be non-empty")
    ids = tokenizer.encode(text)
    return PromptEmbedding(ids, table.embed(ids))


def cosine_similarity(p_t: torch.Tensor, anchors: torch.Tensor) -> torch.Tensor:
    """``gamma[..., i, j]`` = cosine of prompt row ``i`` and anchor row ``j``; zero-norm rows give 0."""
    if p_t.shape[-1] != anchors.shape[-1]:
        raise ShapeMismatch("prompt and anchor embedding widths differ")
    pn = p_t.norm(dim=-1, keepdim=True)
    an = anchors.norm(dim=-1, keepdim=True)
    pu = torch.where(pn > 0, p_t / pn.clamp_min(torch.finfo(p_t.dtype).tiny), torch.zeros_like(p_t))
    au = torch.where(an > 0, anchors / an.clamp_min(torch.finfo(anchors.dtype).tiny),
                     torch.zeros_like(anchors))
    return pu @ au.transpose(-2, -1)


@dataclass
class HybridPrompt:
    """Selected anchor rows (``K x D`` or ``B x K x D``) with indices and non-increasing scores."""

    p_prime: torch.Tensor
    indices: torch.Tensor
    scores: torch.Tensor

    @property
    def k(self) -> int:
        return self.indices.shape[-1]


def anchor_scores(p_t: torch.Tensor, anchors: torch.Tensor, mask: Optional[torch.Tensor] = None):
    """Per anchor, the maximum cosine similarity over all (unmasked) prompt tokens."""
    gamma = cosine_similarity(p_t, anchors)
    if mask is not None:
        gamma = gamma.masked_fill(~mask[..., :, None], float("-inf"))
    return gamma.max(dim=-2).values


def select_hybrid_prompt(
    p_t: torch.Tensor, anchors: torch.Tensor, k: int, mask: Optional[torch.Tensor] = None
) -> HybridPrompt:
    """Top-``k`` anchors ranked by their best similarity to any prompt token.

    Ties resolve to the lower anchor index. The gather from ``anchors`` stays
    differentiable; the ranking itself is not.
    """
    n_anchors = anchors.shape[-2]
    if not 1 <= k <= n_anchors:
        raise InvalidArgument(f"K must lie in [1, {n_anchors}], got {k}")
    with torch.no_grad():
        scores = anchor_scores(p_t.detach(), anchors.detach(), mask)
        sorted_scores, order = torch.sort(scores, dim=-1, descending=True, stable=True)
    idx = order[..., :k]
    if anchors.dim() == 2:
        rows = anchors[idx]
    else:
        rows = torch.gather(anchors, -2, idx[..., None].expand(*idx.shape, anchors.shape[-1]))
    return HybridPrompt(rows, idx, sorted_scores[..., :k])

