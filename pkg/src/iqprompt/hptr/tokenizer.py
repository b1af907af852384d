"""Byte-level tokenizer: ids 0..255 are raw UTF-8 bytes, then four specials."""

from __future__ import annotations

import numpy as np

PAD = 256
BOS = 257
EOS = 258
SEP = 259
VOCAB_SIZE = 260


def encode(text: str) -> list:
    return list(text.encode("utf-8"))


def decode(ids) -> str:
    return bytes(int(t) for t in ids if int(t) < 256).decode("utf-8", errors="replace")


def pad_batch(sequences, max_len: int = None):
    """Right-pad id lists with ``PAD``; returns ``(ids, valid_mask)`` arrays.

    ``max_len`` truncates longer sequences and fixes the padded width.
    """
    if max_len is not None:
        sequences = [s[:max_len] for s in sequences]
    width = max_len if max_len is not None else max((len(s) for s in sequences), default=0)
    ids = np.full((len(sequences), width), PAD, dtype=np.int64)
    mask = np.zeros((len(sequences), width), dtype=bool)
    for k, s in enumerate(sequences):
        ids[k, : len(s)] = s
        mask[k, : len(s)] = True
    return ids, mask
