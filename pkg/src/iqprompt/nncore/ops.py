"""Shape-checked differentiable primitives.

Thin wrappers over ``torch`` functionals; every op is differentiable with
respect to any input that requires grad. Frozen tensors are simply tensors
with ``requires_grad=False``.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..exceptions import ShapeMismatch

LN_EPS = 1e-5


def _require(cond: bool, msg: str):
    if not cond:
        raise ShapeMismatch(msg)


def linear(x: torch.Tensor, weight: torch.Tensor, bias=None) -> torch.Tensor:
    """``x @ weight.T + bias`` with ``weight`` shaped ``(d_out, d_in)``."""
    _require(weight.dim() == 2, f"weight must be 2-D, got {tuple(weight.shape)}")
    _require(x.shape[-1] == weight.shape[1], f"input dim {x.shape[-1]} != weight d_in {weight.shape[1]}")
    if bias is not None:
        _require(bias.shape == (weight.shape[0],), "bias must have d_out entries")
    return F.linear(x, weight, bias)


def conv1d(x, kernel, bias=None, stride: int = 1, padding: int = 0) -> torch.Tensor:
    """Cross-correlation of ``(B, C_in, L)`` input with a ``(C_out, C_in, k)`` kernel."""
    _require(x.dim() == 3 and kernel.dim() == 3, "conv1d expects (B, C, L) input and 3-D kernel")
    _require(x.shape[1] == kernel.shape[1], f"channels {x.shape[1]} != kernel C_in {kernel.shape[1]}")
    _require(x.shape[2] + 2 * padding >= kernel.shape[2], "kernel longer than padded input")
    return F.conv1d(x, kernel, bias, stride=stride, padding=padding)


def max_pool1d(x, width: int, stride: int = None) -> torch.Tensor:
    _require(x.dim() == 3 and x.shape[2] >= width, "max_pool1d window exceeds input length")
    return F.max_pool1d(x, width, stride or width)


def avg_pool1d(x, width: int, stride: int = None) -> torch.Tensor:
    _require(x.dim() == 3 and x.shape[2] >= width, "avg_pool1d window exceeds input length")
    return F.avg_pool1d(x, width, stride or width)


def relu(x):
    return torch.relu(x)


def gelu(x):
    return F.gelu(x)


def softmax(x, axis: int = -1):
    return torch.softmax(x, dim=axis)


def layer_norm(x, gain=None, bias=None, eps: float = LN_EPS):
    d = x.shape[-1]
    for name, t in (("gain", gain), ("bias", bias)):
        if t is not None:
            _require(t.shape == (d,), f"layer_norm {name} must have {d} entries")
    return F.layer_norm(x, (d,), gain, bias, eps)


def embedding_lookup(table, indices):
    _require(table.dim() == 2, "embedding table must be (V, D)")
    idx = torch.as_tensor(indices, dtype=torch.long)
    if idx.numel():
        _require(int(idx.min()) >= 0 and int(idx.max()) < table.shape[0], "token index out of range")
    return table[idx]


def mean_pool(x, axis: int = -2):
    return x.mean(dim=axis)
