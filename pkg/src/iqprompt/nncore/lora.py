"""Low-rank adapters on frozen linear maps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from ..exceptions import InvalidArgument, ShapeMismatch


class LoRALinear(nn.Module):
    """``W x + b + (alpha / r) B (A x)`` with ``W, b`` frozen and ``B`` zero-initialized."""

    def __init__(self, base: nn.Linear, rank: int, alpha: Optional[float] = None):
        super().__init__()
        if rank < 1:
            raise InvalidArgument(f"adapter rank must be >= 1, got {rank}")
        self.weight = nn.Parameter(base.weight.detach().clone(), requires_grad=False)
        self.bias = (
            None if base.bias is None
            else nn.Parameter(base.bias.detach().clone(), requires_grad=False)
        )
        self.rank = rank
        self.alpha = float(2 * rank if alpha is None else alpha)
        d_out, d_in = self.weight.shape
        self.lora_a = nn.Parameter(torch.empty(rank, d_in, dtype=self.weight.dtype))
        self.lora_b = nn.Parameter(torch.zeros(d_out, rank, dtype=self.weight.dtype))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.enabled = True

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def delta_weight(self) -> torch.Tensor:
        return self.scale * (self.lora_b @ self.lora_a)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.in_features:
            raise ShapeMismatch(f"adapter expects {self.in_features} inputs, got {x.shape[-1]}")
        out = nn.functional.linear(x, self.weight, self.bias)
        if self.enabled:
            out = out + self.scale * nn.functional.linear(nn.functional.linear(x, self.lora_a), self.lora_b)
        return out

    def extra_repr(self) -> str:
        return f"in={self.in_features}, out={self.out_features}, rank={self.rank}, alpha={self.alpha}"


@dataclass
class LowRankAdapter:
    """Standalone adapter on a frozen ``(d_out, d_in)`` matrix."""

    weight: torch.Tensor
    a: torch.Tensor
    b: torch.Tensor
    alpha: float

    @classmethod
    def create(cls, weight: torch.Tensor, rank: int, alpha: Optional[float] = None, generator=None):
        if rank < 1:
            raise InvalidArgument(f"adapter rank must be >= 1, got {rank}")
        d_out, d_in = weight.shape
        bound = 1.0 / math.sqrt(d_in)
        a = (torch.rand(rank, d_in, dtype=weight.dtype, generator=generator) * 2 - 1) * bound
        return cls(
            weight.detach().clone().requires_grad_(False),
            a.requires_grad_(True),
            torch.zeros(d_out, rank, dtype=weight.dtype, requires_grad=True),
            float(2 * rank if alpha is None else alpha),
        )

    @property
    def rank(self) -> int:
        return self.a.shape[0]


def lora_apply(adapter: LowRankAdapter, x: torch.Tensor) -> torch.Tensor:
    """Apply ``W x + (alpha / r) B (A x)`` to row vectors ``x`` of shape ``(..., d_in)``."""
    if adapter.rank < 1:
        raise InvalidArgument("adapter rank must be >= 1")
    if x.shape[-1] != adapter.weight.shape[1]:
        raise ShapeMismatch(f"adapter expects {adapter.weight.shape[1]} inputs, got {x.shape[-1]}")
    scale = adapter.alpha / adapter.rank
    return x @ adapter.weight.T + scale * ((x @ adapter.a.T) @ adapter.b.T)


def wrap_lora(module: nn.Module, names, rank: int, alpha: Optional[float] = None) -> list:
    """Replace the ``nn.Linear`` children named in ``names`` by adapters; returns them."""
    wrapped = []
    for name in names:
        child = getattr(module, name)
        if not isinstance(child, nn.Linear):
            raise InvalidArgument(f"{name!r} is not a linear layer")
        adapter = LoRALinear(child, rank, alpha)
        setattr(module, name, adapter)
        wrapped.append(adapter)
    return wrapped
