"""AdamW with decoupled weight decay over the non-frozen parameters."""

from __future__ import annotations

import torch

from ..exceptions import InvalidArgument, NonFiniteGradient, ShapeMismatch

BETAS = (0.9, 0.999)
EPS = 1e-8


class AdamW:
    """``torch.optim.AdamW`` restricted to trainable tensors, with a finite-gradient guard.

    Each step first shrinks every parameter by ``lr * weight_decay`` and then
    applies the bias-corrected moment update. Tensors with
    ``requires_grad=False`` are never registered, so they stay bit-identical.
    """

    def __init__(self, params, lr: float, weight_decay: float = 5e-3, betas=BETAS, eps: float = EPS):
        if lr <= 0:
            raise InvalidArgument(f"learning rate must be positive, got {lr}")
        self.params = [p for p in params if p.requires_grad]
        self._opt = torch.optim.AdamW(
            self.params, lr=lr, betas=betas, eps=eps, weight_decay=weight_decay, foreach=False
        )

    @property
    def lr(self) -> float:
        return self._opt.param_groups[0]["lr"]

    @lr.setter
    def lr(self, value: float):
        if value < 0:
            raise InvalidArgument(f"learning rate must be non-negative, got {value}")
        for g in self._opt.param_groups:
            g["lr"] = value

    @property
    def step_count(self) -> int:
        steps = [s.get("step", 0) for s in self._opt.state.values()]
        return int(max(steps)) if steps else 0

    def moments(self, p):
        st = self._opt.state.get(p, {})
        return st.get("exp_avg"), st.get("exp_avg_sq")

    def zero_grad(self):
        self._opt.zero_grad(set_to_none=True)

    def step(self):
        for p in self.params:
            if p.grad is not None and not torch.isfinite(p.grad).all():
                raise NonFiniteGradient("gradient contains NaN or infinite entries")
        if self.lr == 0:
            return
        self._opt.step()

    def state_dict(self):
        return self._opt.state_dict()

    def load_state_dict(self, state):
        self._opt.load_state_dict(state)


def adamw_step(params, grads, state: AdamW):
    """Install ``grads`` on ``params`` and take one optimizer step."""
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads):
        raise ShapeMismatch("params and grads differ in count")
    for p, g in zip(params, grads):
        if not p.requires_grad:
            continue
        if g is None:
            p.grad = None
            continue
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient shape {tuple(g.shape)} != parameter {tuple(p.shape)}")
        p.grad = g.detach().clone()
    state.step()
    return params, state
