from __future__ import annotations

from ..exceptions import InvalidArgument


def derive_balancing_factors(datasets) -> list:
    """Inverse-size loss weights ``N_total / (n * N_i)``; their per-sample average is 1."""
    sizes = [len(d) if not isinstance(d, int) else d for d in datasets]
    if not sizes:
        raise InvalidArgument("need at least one dataset")
    if any(n < 1 for n in sizes):
        raise InvalidArgument("every dataset must hold at least one frame")
    total = sum(sizes)
    return [total / (len(sizes) * n) for n in sizes]
