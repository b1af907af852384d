"""Versioned binary checkpoints holding only the non-frozen parameters.

Layout: ``MAGIC`` (8 bytes), little-endian ``uint64`` header length, UTF-8
JSON header, then raw little-endian tensor blobs at the offsets the header
lists. The frozen base is not stored; it is regenerated from the config and
seed on load and checked against the recorded digest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..exceptions import CorruptCheckpoint, IncompatibleCheckpoint
from .network import NetworkConfig, SignalLanguageModel

MAGIC = b"IQPCKPT\x00"
FORMAT_VERSION = 1

_DTYPES = {
    torch.float32: "<f4", torch.float64: "<f8", torch.float16: "<f2",
    torch.int64: "<i8", torch.int32: "<i4", torch.uint8: "|u1", torch.bool: "|b1",
}
_TORCH = {v: k for k, v in _DTYPES.items()}


@dataclass
class Checkpoint:
    config: NetworkConfig
    tensors: dict
    epoch: int = 0
    base_digest: Optional[str] = None
    optimizer: Optional[dict] = None
    rng: Optional[dict] = None
    extra: dict = field(default_factory=dict)
    header: dict = field(default_factory=dict)


class _BlobWriter:
    def __init__(self):
        self.chunks = []
        self.offset = 0

    def add(self, t: torch.Tensor) -> dict:
        t = t.detach().cpu().contiguous()
        if t.dtype not in _DTYPES:
            raise TypeError(f"cannot serialize tensors of dtype {t.dtype}")
        raw = t.numpy().astype(_DTYPES[t.dtype], copy=False).tobytes()
        entry = {"dtype": _DTYPES[t.dtype], "shape": list(t.shape), "offset": self.offset, "nbytes": len(raw)}
        self.chunks.append(raw)
        self.offset += len(raw)
        return entry


def _optimizer_header(optimizer, names, blobs: _BlobWriter) -> dict:
    sd = optimizer.state_dict()
    groups = [{k: (list(v) if isinstance(v, tuple) else v) for k, v in g.items()} for g in sd["param_groups"]]
    state = {}
    for idx, st in sd["state"].items():
        entry = {}
        for k, v in st.items():
            if isinstance(v, torch.Tensor) and v.dim() > 0:
                entry[k] = blobs.add(v)
            else:
                entry[k] = {"scalar": float(v)}
        state[str(idx)] = entry
    return {"param_names": list(names), "param_groups": groups, "state": state}


def save_checkpoint(
    model: SignalLanguageModel,
    path,
    *,
    optimizer=None,
    optimizer_param_names=None,
    epoch: int = 0,
    rng: Optional[dict] = None,
    extra: Optional[dict] = None,
) -> int:
    """Write ``model``'s non-frozen state to ``path``; returns the file size in bytes.

    ``optimizer`` may be an ``nncore.AdamW`` or a ``torch.optim`` optimizer;
    ``optimizer_param_names`` lists the model parameter name of each
    optimizer slot in order.
    """
    blobs = _BlobWriter()
    tensors = {name: blobs.add(p) for name, p in model.trainable_parameters()}
    header = {
        "format_version": FORMAT_VERSION,
        "config": model.cfg.to_dict(),
        "config_hash": model.cfg.hash(),
        "geometry_hash": model.cfg.geometry_hash(),
        "base_digest": model.frozen_digest(),
        "epoch": int(epoch),
        "tensors": tensors,
        "rng": None,
        "optimizer": None,
        "extra": extra or {},
    }
    if optimizer is not None:
        if optimizer_param_names is None:
            raise ValueError("optimizer_param_names is required with an optimizer")
        header["optimizer"] = _optimizer_header(optimizer, optimizer_param_names, blobs)
    if rng is not None:
        header["rng"] = {
            "numpy": rng.get("numpy"),
            "torch": blobs.add(rng["torch"]) if rng.get("torch") is not None else None,
        }
    header["data_nbytes"] = blobs.offset
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    data = MAGIC + struct.pack("<Q", len(head)) + head + b"".join(blobs.chunks)
    Path(path).write_bytes(data)
    return len(data)


def _read_tensor(data: memoryview, base: int, entry: dict) -> torch.Tensor:
    start = base + entry["offset"]
    raw = data[start: start + entry["nbytes"]]
    if len(raw) != entry["nbytes"]:
        raise CorruptCheckpoint("tensor blob extends past the end of the file")
    arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
    return torch.from_numpy(arr.astype(arr.dtype.newbyteorder("="), copy=True))


def read_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8:
        raise CorruptCheckpoint(f"{path}: file too short for a checkpoint header")
    if data[: len(MAGIC)] != MAGIC:
        raise IncompatibleCheckpoint(f"{path}: not a checkpoint file (bad magic bytes)")
    (n_head,) = struct.unpack("<Q", data[len(MAGIC): len(MAGIC) + 8])
    start = len(MAGIC) + 8
    if start + n_head > len(data):
        raise CorruptCheckpoint(f"{path}: header truncated")
    try:
        header = json.loads(data[start: start + n_head].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise IncompatibleCheckpoint(
            f"{path}: format version {header.get('format_version')} is not {FORMAT_VERSION}"
        )
    base = start + n_head
    if len(data) - base != header["data_nbytes"]:
        raise CorruptCheckpoint(f"{path}: expected {header['data_nbytes']} data bytes, found {len(data) - base}")
    view = memoryview(data)
    tensors = {name: _read_tensor(view, base, e) for name, e in header["tensors"].items()}
    opt = None
    if header.get("optimizer"):
        oh = header["optimizer"]
        state = {}
        for idx, entry in oh["state"].items():
            state[int(idx)] = {
                k: torch.tensor(v["scalar"]) if "scalar" in v else _read_tensor(view, base, v)
                for k, v in entry.items()
            }
        groups = [{k: (tuple(v) if k == "betas" else v) for k, v in g.items()} for g in oh["param_groups"]]
        opt = {"param_names": oh["param_names"], "state_dict": {"state": state, "param_groups": groups}}
    rng = None
    if header.get("rng"):
        r = header["rng"]
        rng = {"numpy": r.get("numpy"),
               "torch": _read_tensor(view, base, r["torch"]) if r.get("torch") else None}
    try:
        cfg = NetworkConfig.from_dict(header["config"])
    except (TypeError, KeyError) as exc:
        raise IncompatibleCheckpoint(f"{path}: config snapshot does not match this version") from exc
    return Checkpoint(cfg, tensors, header["epoch"], header["base_digest"], opt, rng,
                      header.get("extra", {}), header)


def load_checkpoint(path, expected: Optional[NetworkConfig] = None) -> SignalLanguageModel:
    """Rebuild the model from the stored config, verify the frozen base, load the rest.

    With ``expected``, the checkpoint must agree on every geometry key.
    The loaded ``Checkpoint`` is attached as ``model.checkpoint``.
    """
    ck = read_checkpoint(path)
    if expected is not None:
        mine, theirs = expected.geometry(), ck.config.geometry()
        diff = sorted(k for k in mine if mine[k] != theirs.get(k))
        if diff:
            raise IncompatibleCheckpoint(f"checkpoint geometry disagrees on {', '.join(diff)}")
    model = SignalLanguageModel(ck.config)
    names = dict(model.trainable_parameters())
    dtypes = {t.dtype for t in ck.tensors.values()}
    if dtypes == {torch.float64}:
        model.double()
        names = dict(model.trainable_parameters())
    if model.frozen_digest() != ck.base_digest:
        raise IncompatibleCheckpoint("frozen base regenerated from the config does not match the checkpoint")
    if set(names) != set(ck.tensors):
        missing = sorted(set(names) ^ set(ck.tensors))
        raise IncompatibleCheckpoint(f"parameter set differs from the model: {missing[:5]}")
    with torch.no_grad():
        for n, t in ck.tensors.items():
            p = names[n]
            if tuple(p.shape) != tuple(t.shape):
                raise IncompatibleCheckpoint(f"{n}: stored shape {tuple(t.shape)} != {tuple(p.shape)}")
            p.copy_(t)
    model.checkpoint = ck
    return model


def restore_optimizer(optimizer, ck: Checkpoint, param_names) -> None:
    if ck.optimizer is None:
        raise IncompatibleCheckpoint("checkpoint carries no optimizer state")
    if list(param_names) != ck.optimizer["param_names"]:
        raise IncompatibleCheckpoint("optimizer parameter order differs from the checkpoint")
    optimizer.load_state_dict(ck.optimizer["state_dict"])


def capture_rng(np_rng: Optional[np.random.Generator] = None) -> dict:
    return {
        "numpy": np_rng.bit_generator.state if np_rng is not None else None,
        "torch": torch.get_rng_state(),
    }


def frozen_bytes(model: SignalLanguageModel) -> int:
    return sum(p.numel() * p.element_size() for _, p in model.frozen_parameters())
