"""Map backbone signal-token outputs back to ``(2, L)`` IQ frames."""

from __future__ import annotations

import torch
from torch import nn

from ..exceptions import ShapeMismatch
from ..sigio.frames import IQFrame
from .backbone import Block


def check_geometry(n_patches: int, patch_len: int, length: int):
    if n_patches * patch_len != length:
        raise ShapeMismatch(
            f"{n_patches} patches of {patch_len} samples cover {n_patches * patch_len}, not {length}"
        )


def blocks_to_frames(blocks: torch.Tensor, patch_len: int) -> torch.Tensor:
    """``(B, P, 2 * patch_len)`` -> ``(B, 2, P * patch_len)``; each block is its I half then Q half."""
    b, p, _ = blocks.shape
    return blocks.reshape(b, p, 2, patch_len).permute(0, 2, 1, 3).reshape(b, 2, p * patch_len)


class LinearDecoder(nn.Module):
    def __init__(self, d_model: int, patch_len: int, n_patches: int, length: int):
        super().__init__()
        check_geometry(n_patches, patch_len, length)
        self.patch_len = patch_len
        self.n_patches = n_patches
        self.proj = nn.Linear(d_model, 2 * patch_len)

    def forward(self, f_llm: torch.Tensor) -> torch.Tensor:
        if f_llm.shape[-2] != self.n_patches:
            raise ShapeMismatch(f"decoder expects {self.n_patches} tokens, got {f_llm.shape[-2]}")
        return blocks_to_frames(self.proj(f_llm), self.patch_len)


class TransformerDecoder(nn.Module):
    """Non-causal self-attention blocks over the ``P`` tokens, then the linear block map."""

    def __init__(self, d_model: int, heads: int, patch_len: int, n_patches: int, length: int,
                 layers: int = 1, ff_mult: int = 4):
        super().__init__()
        self.position = nn.Parameter(torch.randn(n_patches, d_model) * 0.02)
        self.blocks = nn.ModuleList(Block(d_model, heads, ff_mult, causal=False) for _ in range(layers))
        self.head = LinearDecoder(d_model, patch_len, n_patches, length)

    def forward(self, f_llm: torch.Tensor) -> torch.Tensor:
        if f_llm.shape[-2] != self.head.n_patches:
            raise ShapeMismatch(f"decoder expects {self.head.n_patches} tokens, got {f_llm.shape[-2]}")
        h = f_llm + self.position
        for block in self.blocks:
            h = block(h)
        return self.head(h)

    def zero_positions_(self):
        """Test hook: without positions the decoder is permutation-equivariant over tokens."""
        with torch.no_grad():
            self.position.zero_()
        return self


def _decode(decoder, f_llm: torch.Tensor):
    squeeze = f_llm.dim() == 2
    out = decoder(f_llm.unsqueeze(0) if squeeze else f_llm)
    return out[0] if squeeze else out


def decode_linear(f_llm: torch.Tensor, params: LinearDecoder) -> torch.Tensor:
    """``(P, D)`` -> ``(2, L)`` (or batched ``(B, P, D)`` -> ``(B, 2, L)``)."""
    return _decode(params, f_llm)


def decode_transformer(f_llm: torch.Tensor, params: TransformerDecoder) -> torch.Tensor:
    return _decode(params, f_llm)


def to_frame(out: torch.Tensor, **meta) -> IQFrame:
    return IQFrame.from_array(out.detach().cpu().numpy(), **meta)
