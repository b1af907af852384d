"""Patch extraction and signal embedding."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..exceptions import InvalidArgument, ShapeMismatch


def n_patches(length: int, patch_len: int, stride: int) -> int:
    if stride < 1:
        raise InvalidArgument("stride must be >= 1")
    if patch_len > length:
        raise InvalidArgument(f"patch_len {patch_len} exceeds frame length {length}")
    return (length - patch_len) // stride + 1


def unfold_patches(x: torch.Tensor, patch_len: int, stride: int) -> torch.Tensor:
    """``(B, 2, L)`` -> ``(B, P, 2 * patch_len)``; each row is the I window then the Q window."""
    if x.dim() != 3 or x.shape[1] != 2:
        raise ShapeMismatch(f"expected (B, 2, L) frames, got {tuple(x.shape)}")
    n_patches(x.shape[-1], patch_len, stride)
    w = x.unfold(-1, patch_len, stride)
    return w.permute(0, 2, 1, 3).reshape(x.shape[0], w.shape[2], 2 * patch_len)


@dataclass
class PatchSequence:
    x_s: torch.Tensor
    patch_len: int
    stride: int
    source_len: int

    @property
    def n_patches(self) -> int:
        return self.x_s.shape[-2]


class PatchEmbedding(nn.Module):
    """Linear projection of flattened patches plus a learned per-patch position vector."""

    def __init__(self, length: int, patch_len: int, stride: int, d_model: int):
        super().__init__()
        self.length = length
        self.patch_len = patch_len
        self.stride = stride
        self.n_patches = n_patches(length, patch_len, stride)
        self.proj = nn.Linear(2 * patch_len, d_model)
        self.position = nn.Parameter(torch.randn(self.n_patches, d_model) * 0.02)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.length:
            raise ShapeMismatch(f"frames have {x.shape[-1]} samples, embedding expects {self.length}")
        return self.proj(unfold_patches(x, self.patch_len, self.stride)) + self.position


def patchify_and_embed(frame, patch_len: int, stride: int, proj: PatchEmbedding) -> PatchSequence:
    """Embed one frame (``IQFrame`` or ``(2, L)`` tensor) as a ``(P, d_model)`` sequence."""
    x = frame if isinstance(frame, torch.Tensor) else torch.as_tensor(frame.as_array())
    x = x.to(proj.proj.weight.dtype)
    if x.dim() == 2:
        x = x.unsqueeze(0)
    if patch_len > x.shape[-1]:
        raise InvalidArgument(f"patch_len {patch_len} exceeds frame length {x.shape[-1]}")
    if (patch_len, stride) != (proj.patch_len, proj.stride):
        raise ShapeMismatch("patch geometry disagrees with the embedding module")
    return PatchSequence(proj(x)[0], patch_len, stride, x.shape[-1])
