"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..exceptions import InvalidArgument


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    skipped: list = field(default_factory=list)
    worst: tuple = None

    def __float__(self):
        return self.max_rel_error


def _scalarize(out, weights):
    if isinstance(out, (tuple, list)):
        out = torch.cat([o.reshape(-1) for o in out])
    return (out.reshape(-1) * weights).sum()


def grad_check(
    fn,
    inputs,
    eps: float = 1e-5,
    max_coords: int = None,
    seed: int = 0,
    kink_tol: float = 1e-3,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compare autograd against central differences on every (or a sample of) coordinate.

    ``fn(*inputs)`` may return any tensor (or tuple of tensors); it is reduced
    to a scalar by a fixed random projection. The relative error per
    coordinate is ``|a - n| / max(floor, |a| + |n|)``. Coordinates whose
    one-sided slopes disagree by more than ``kink_tol`` (relative) sit on a
    non-differentiable point and are skipped and listed in ``skipped``.
    """
    inputs = list(inputs)
    for t in inputs:
        if t.dtype != torch.float64:
            raise InvalidArgument("grad_check requires float64 inputs")
    leaves = [t.detach().clone().requires_grad_(True) for t in inputs]
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        probe = fn(*leaves)
        n_out = sum(o.numel() for o in probe) if isinstance(probe, (tuple, list)) else probe.numel()
    weights = torch.randn(n_out, generator=gen, dtype=torch.float64)

    value = _scalarize(fn(*leaves), weights)
    grads = torch.autograd.grad(value, leaves, allow_unused=True)
    analytic = [torch.zeros_like(t) if g is None else g for t, g in zip(leaves, grads)]

    def f():
        with torch.no_grad():
            return float(_scalarize(fn(*leaves), weights))

    f0 = f()
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_at = None
    checked = 0
    skipped = []
    for k, t in enumerate(leaves):
        flat = t.view(-1)
        coords = np.arange(flat.numel())
        if max_coords is not None and flat.numel() > max_coords:
            coords = np.sort(rng.choice(flat.numel(), size=max_coords, replace=False))
        a_flat = analytic[k].reshape(-1)
        for c in coords:
            c = int(c)
            orig = flat[c].item()
            with torch.no_grad():
                flat[c] = orig + eps
            fp = f()
            with torch.no_grad():
                flat[c] = orig - eps
            fm = f()
            with torch.no_grad():
                flat[c] = orig
            fwd = (fp - f0) / eps
            bwd = (f0 - fm) / eps
            if abs(fwd - bwd) > kink_tol * max(abs(fwd) + abs(bwd), 1e-6):
                skipped.append((k, c))
                continue
            num = (fp - fm) / (2 * eps)
            a = float(a_flat[c])
            rel = abs(a - num) / max(floor, abs(a) + abs(num))
            checked += 1
            if rel > worst:
                worst = rel
                worst_at = (k, c, a, num)
    return GradCheckReport(worst, checked, skipped, worst_at)



class _Call(torch.nn.Module):
    def __init__(self, inner, call):
        super().__init__()
        self.inner = inner
        self._call = call

    def forward(self):
        return self._call(self.inner)


def module_closure(module: torch.nn.Module, call, trainable_only: bool = True):
    """Expose ``module``'s parameters as explicit closure inputs.

    Returns ``(fn, tensors, names)``: ``fn(*tensors)`` evaluates
    ``call(module)`` with those tensors substituted for the parameters.
    """
    named = [(n, p) for n, p in module.named_parameters() if p.requires_grad or not trainable_only]
    names = [n for n, _ in named]
    tensors = [p.detach() for _, p in named]
    wrapper = _Call(module, call)

    def fn(*ps):
        return torch.func.functional_call(wrapper, {"inner." + n: p for n, p in zip(names, ps)}, ())

    return fn, tensors, names
