"""High-frequency feature extraction and fusion with the reprogrammed signal tokens."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import torch
from torch import nn

from .exceptions import InvalidArgument, ShapeMismatch
from .nncore.attention import MultiHeadAttention
from .nncore.ops import conv1d, max_pool1d, relu


@dataclass
class HFELayer:
    out_channels: Optional[int]
    kernel_size: int
    pool_width: int
    pool_stride: int


def default_layers():
    return [HFELayer(16, 7, 2, 2), HFELayer(32, 5, 2, 2), HFELayer(None, 3, 4, 4)]


@dataclass
class HFEConfig:
    """Three conv -> ReLU -> max-pool stages; ``None`` channels mean ``d_model``.

    With ``high_pass`` the first-stage kernels have their tap mean removed, so
    that stage has zero DC gain and responds only to local variation.
    """

    layers: list = field(default_factory=default_layers)
    high_pass: bool = True

    def __post_init__(self):
        self.layers = [l if isinstance(l, HFELayer) else HFELayer(**l) for l in self.layers]
        if len(self.layers) != 3:
            raise InvalidArgument(f"the extractor has exactly three layers, got {len(self.layers)}")
        for l in self.layers:
            if l.kernel_size < 1 or l.kernel_size % 2 != 1:
                raise InvalidArgument("HFE kernel sizes must be odd")
            if l.pool_width < 1 or l.pool_stride < 1:
                raise InvalidArgument("HFE pool width and stride must be >= 1")

    def output_length(self, length: int) -> int:
        n = length
        for l in self.layers:
            if n < l.pool_width:
                raise ShapeMismatch(f"pool width {l.pool_width} exceeds feature length {n}")
            n = (n - l.pool_width) // l.pool_stride + 1
        return n

    @classmethod
    def for_geometry(cls, length: int, n_patches: int, high_pass: bool = True):
        """Default kernels/channels with pool sizes chosen so ``length`` lands on ``n_patches``."""
        if length % n_patches:
            raise ShapeMismatch(f"cannot pool {length} samples onto {n_patches} positions evenly")
        factor = length // n_patches
        pools = []
        for _ in range(2):
            p = 2 if factor % 2 == 0 and factor > 1 else 1
            pools.append(p)
            factor //= p
        pools.append(factor)
        layers = [HFELayer(l.out_channels, l.kernel_size, p, p) for l, p in zip(default_layers(), pools)]
        return cls(layers, high_pass)


class HighFreqExtractor(nn.Module):
    """Maps a ``(B, 2, L)`` frame batch to ``(B, P, D)`` feature tokens."""

    def __init__(self, cfg: HFEConfig, length: int, n_patches: int, d_model: int):
        super().__init__()
        self.cfg = cfg
        out_len = cfg.output_length(length)
        if out_len != n_patches:
            raise ShapeMismatch(
                f"HFE downsampling maps {length} samples to {out_len} positions, expected {n_patches}"
            )
        self.convs = nn.ModuleList()
        c_in = 2
        for l in cfg.layers:
            c_out = l.out_channels or d_model
            self.convs.append(nn.Conv1d(c_in, c_out, l.kernel_size, padding=l.kernel_size // 2))
            c_in = c_out
        self.proj = nn.Linear(c_in, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = x
        for k, (conv, l) in enumerate(zip(self.convs, self.cfg.layers)):
            w = conv.weight
            if k == 0 and self.cfg.high_pass:
                w = w - w.mean(dim=-1, keepdim=True)
            h = conv1d(h, w, conv.bias, padding=l.kernel_size // 2)
            h = max_pool1d(relu(h), l.pool_width, l.pool_stride)
        return self.proj(h.transpose(1, 2))


class Fusion(nn.Module):
    """``F'_s = MHA(query=F_s, key/value=F_h) + F_s + F_h`` with a bias-free value path."""

    def __init__(self, d_model: int, heads: int):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, heads, value_bias=False)

    def forward(self, f_s: torch.Tensor, f_h: torch.Tensor) -> torch.Tensor:
        if f_s.shape != f_h.shape:
            raise ShapeMismatch(f"F_s {tuple(f_s.shape)} and F_h {tuple(f_h.shape)} differ")
        return self.attn(f_s, f_h) + f_s + f_h


class FrequencyAttunedFusion(nn.Module):
    def __init__(self, cfg: HFEConfig, length: int, n_patches: int, d_model: int, heads: int):
        super().__init__()
        self.extractor = HighFreqExtractor(cfg, length, n_patches, d_model)
        self.fusion = Fusion(d_model, heads)

    def forward(self, x: torch.Tensor, f_s: torch.Tensor) -> torch.Tensor:
        return self.fusion(f_s, self.extractor(x))


def extract_high_freq(frame, cfg: HFEConfig, params: HighFreqExtractor) -> torch.Tensor:
    """``(P, D)`` high-frequency tokens for one ``IQFrame`` or ``(2, L)`` tensor."""
    x = frame if isinstance(frame, torch.Tensor) else torch.as_tensor(frame.as_array())
    x = x.to(params.proj.weight.dtype)
    if x.dim() == 2:
        x = x.unsqueeze(0)
    return params(x)[0]


def fuse(f_s: torch.Tensor, f_h: torch.Tensor, params: Fusion) -> torch.Tensor:
    return params(f_s, f_h)
