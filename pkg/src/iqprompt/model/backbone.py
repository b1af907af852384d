"""Frozen causal transformer with low-rank adapters on the attention projections."""

from __future__ import annotations

import torch
from torch import nn

from ..config import BackboneConfig
from ..exceptions import SequenceTooLong, ShapeMismatch
from ..nncore.attention import MultiHeadAttention
from ..nncore.lora import LoRALinear, wrap_lora
from ..nncore.seeding import seeded

_PROJ_NAMES = {"q": "q_proj", "k": "k_proj", "v": "v_proj", "o": "o_proj"}


class Block(nn.Module):
    """Pre-norm block: ``x + attn(LN(x))`` then ``x + MLP(LN(x))``."""

    def __init__(self, d_model: int, heads: int, ff_mult: int, dropout: float = 0.0, causal: bool = True):
        super().__init__()
        self.causal = causal
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, heads)
        self.ln2 = nn.LayerNorm(d_model)
        self.fc = nn.Linear(d_model, ff_mult * d_model)
        self.proj = nn.Linear(ff_mult * d_model, d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.drop(self.attn(self.ln1(x), causal=self.causal))
        return x + self.drop(self.proj(nn.functional.gelu(self.fc(self.ln2(x)))))


class Backbone(nn.Module):
    """Stack of causal blocks over ``[prefix; signal tokens]`` with a frozen base.

    Positions run ``0..K+P-1`` contiguously over the concatenated sequence.
    After construction (and the optional warm phase) every base tensor has
    ``requires_grad=False``; only the adapter factors remain trainable.
    """

    def __init__(self, cfg: BackboneConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_model
        with seeded(seed, "backbone", "base"):
            self.position = nn.Parameter(torch.randn(cfg.max_tokens, d) * 0.02)
            self.blocks = nn.ModuleList(
                Block(d, cfg.heads, cfg.ff_mult, cfg.dropout) for _ in range(cfg.layers)
            )
            self.ln_f = nn.LayerNorm(d)
        if cfg.base_init == "warm":
            warm_up(self, cfg.warm_steps, seed)
        for p in self.parameters():
            p.requires_grad_(False)
        names = [_PROJ_NAMES[t] for t in cfg.lora_targets]
        for k, block in enumerate(self.blocks):
            with seeded(seed, "backbone", "lora", str(k)):
                wrap_lora(block.attn, names, cfg.lora_rank, cfg.lora_alpha)

    def adapters(self):
        return [m for m in self.modules() if isinstance(m, LoRALinear)]

    def set_adapters(self, enabled: bool):
        for a in self.adapters():
            a.enabled = enabled

    def run(self, h: torch.Tensor) -> torch.Tensor:
        n = h.shape[-2]
        if n > self.cfg.max_tokens:
            raise SequenceTooLong(f"{n} tokens exceed max_tokens={self.cfg.max_tokens}")
        h = h + self.position[:n]
        for block in self.blocks:
            h = block(h)
        return self.ln_f(h)

    def forward(self, prefix: torch.Tensor, tokens: torch.Tensor):
        """Returns ``(P_llm, F_llm)``: the output rows of the prefix and of the signal tokens."""
        if prefix.shape[-1] != tokens.shape[-1] or prefix.dim() != tokens.dim():
            raise ShapeMismatch(f"prefix {tuple(prefix.shape)} and tokens {tuple(tokens.shape)} do not align")
        k = prefix.shape[-2]
        out = self.run(torch.cat([prefix, tokens], dim=-2))
        return out[..., :k, :], out[..., k:, :]


def warm_up(backbone: Backbone, steps: int, seed: int, batch: int = 16, n_tokens: int = 16, lr: float = 1e-3):
    """Brief self-supervised phase before freezing: next-vector regression on smooth random walks."""
    if steps < 1:
        return
    d = backbone.cfg.d_model
    gen = torch.Generator().manual_seed(seed)
    opt = torch.optim.AdamW(list(backbone.parameters()), lr=lr, foreach=False)
    dtype = backbone.position.dtype
    for _ in range(steps):
        steps_ = torch.randn(batch, n_tokens + 1, d, generator=gen, dtype=dtype) * 0.3
        seq = torch.cumsum(steps_, dim=1) / (n_tokens ** 0.5)
        out = backbone.run(seq[:, :-1])
        loss = nn.functional.mse_loss(out, seq[:, 1:])
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
    backbone.zero_grad(set_to_none=True)


def forward_backbone(prefix, tokens: torch.Tensor, params: Backbone):
    """Unbatched or batched entry point; ``prefix`` may be a ``HybridPrompt``."""
    p = prefix.p_prime if hasattr(prefix, "p_prime") else prefix
    squeeze = tokens.dim() == 2
    if squeeze:
        p, tokens = p.unsqueeze(0), tokens.unsqueeze(0)
    p_llm, f_llm = params(p, tokens)
    if squeeze:
        return p_llm[0], f_llm[0]
    return p_llm, f_llm
