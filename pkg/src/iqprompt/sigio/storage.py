"""Native dataset file format.

A dataset at ``path`` is two files: ``path`` holds the raw records, one per
frame, each ``L`` little-endian float32 pairs ``I0 Q0 I1 Q1 ...``;
``path + ".json"`` holds the manifest with class names, length, per-record
labels/SNRs and ``format_version``.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from ..exceptions import CorruptDataset, UnsupportedFormat
from .benchmark import FORMAT_VERSION
from .frames import NOISELESS, IQFrame, SignalDataset

_RECORD_DTYPE = np.dtype("<f4")


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _snr_to_json(snr):
    if snr is None:
        return None
    return "noiseless" if snr == NOISELESS else float(snr)


def _snr_from_json(v):
    if v is None:
        return None
    return NOISELESS if v == "noiseless" else float(v)


def save_dataset(ds: SignalDataset, path) -> None:
    path = Path(path)
    n = len(ds)
    length = ds.length or 0
    records = np.empty((n, length, 2), dtype=_RECORD_DTYPE)
    for k, f in enumerate(ds.frames):
        records[k, :, 0] = f.i
        records[k, :, 1] = f.q
    manifest = {
        "format_version": FORMAT_VERSION,
        "class_names": list(ds.class_names),
        "length": int(length),
        "num_records": n,
        "split": ds.split_tag,
        "labels": [None if f.label is None else int(f.label) for f in ds.frames],
        "snrs_db": [_snr_to_json(f.snr_db) for f in ds.frames],
        "schemes": [f.scheme for f in ds.frames],
        "provenance": ds.manifest,
    }
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(records.tobytes())
    os.replace(tmp, path)
    with open(manifest_path(path), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "noiseless"
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def load_dataset(path) -> SignalDataset:
    path = Path(path)
    try:
        with open(manifest_path(path)) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptDataset(f"manifest for {path} is not valid JSON: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedFormat(f"dataset format version {version!r} is not supported")
    try:
        n = int(manifest["num_records"])
        length = int(manifest["length"])
        class_names = list(manifest["class_names"])
        labels = manifest["labels"]
        snrs = manifest["snrs_db"]
        schemes = manifest.get("schemes") or [None] * n
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDataset(f"manifest for {path} is missing fields: {exc}") from exc
    if len(labels) != n or len(snrs) != n or len(schemes) != n:
        raise CorruptDataset("manifest per-record lists disagree with num_records")
    for lab in labels:
        if lab is not None and not 0 <= lab < len(class_names):
            raise CorruptDataset(f"label {lab} does not index {len(class_names)} class names")
    raw = path.read_bytes()
    expected = n * length * 2 * _RECORD_DTYPE.itemsize
    if len(raw) != expected:
        raise CorruptDataset(f"{path} holds {len(raw)} bytes, manifest implies {expected}")
    records = np.frombuffer(raw, dtype=_RECORD_DTYPE).reshape(n, length, 2)
    frames = [
        IQFrame(
            records[k, :, 0].astype(np.float32),
            records[k, :, 1].astype(np.float32),
            label=labels[k], snr_db=_snr_from_json(snrs[k]), scheme=schemes[k],
        )
        for k in range(n)
    ]
    provenance = manifest.get("provenance") or {}
    provenance.setdefault("length", length)
    return SignalDataset(frames, class_names, manifest.get("split", "train"), provenance)
