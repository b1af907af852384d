"""Per-submodule deterministic parameter initialization."""

from __future__ import annotations

import contextlib
import zlib

import torch

from ..sigio.benchmark import derive_seed


def path_seed(seed: int, *path: str) -> int:
    words = [zlib.crc32(p.encode()) for p in path]
    return derive_seed(seed, *words)


@contextlib.contextmanager
def seeded(seed: int, *path: str):
    """Run the block with torch's global RNG seeded from ``(seed, path)``.

    Modules built inside get weights that depend only on their own path, so
    adding or removing a sibling module never shifts another's initialization.
    The caller's RNG state is restored afterwards.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(path_seed(seed, *path))
        yield
