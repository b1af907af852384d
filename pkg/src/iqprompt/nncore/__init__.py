"""Differentiable-array substrate: ops, attention, adapters, optimizer and schedules."""

from .attention import MultiHeadAttention, causal_mask, multi_head_attention
from .gradcheck import GradCheckReport, grad_check, module_closure
from .lora import LoRALinear, LowRankAdapter, lora_apply, wrap_lora
from .ops import (
    avg_pool1d,
    conv1d,
    embedding_lookup,
    gelu,
    layer_norm,
    linear,
    max_pool1d,
    mean_pool,
    relu,
    softmax,
)
from .optim import AdamW, adamw_step
from .schedule import LRSchedule, plateau_halvings, schedule_lr, should_stop
from .seeding import path_seed, seeded

__all__ = [
    "AdamW", "GradCheckReport", "LRSchedule", "LoRALinear", "LowRankAdapter", "MultiHeadAttention",
    "adamw_step", "avg_pool1d", "causal_mask", "conv1d", "embedding_lookup", "gelu", "grad_check",
    "layer_norm", "linear", "lora_apply", "module_closure", "max_pool1d", "mean_pool", "multi_head_attention",
    "path_seed", "plateau_halvings", "relu", "schedule_lr", "seeded", "should_stop", "softmax",
    "wrap_lora",
]
