"""Core signal containers: IQ frames, channel descriptions and datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..exceptions import InvalidArgument, ShapeMismatch

#: SNR sentinel meaning "no additive noise".
NOISELESS = math.inf

SPLITS = ("train", "val", "test")


def is_noiseless(snr_db) -> bool:
    return snr_db is None or snr_db == NOISELESS or snr_db == "noiseless"


@dataclass(frozen=True, eq=False)
class IQFrame:
    """One received or transmitted radio signal as paired I/Q sample vectors."""

    i: np.ndarray
    q: np.ndarray
    label: Optional[int] = None
    snr_db: Optional[float] = None
    scheme: Optional[str] = None

    def __post_init__(self):
        i = np.asarray(self.i)
        q = np.asarray(self.q)
        if not np.issubdtype(i.dtype, np.floating):
            i = i.astype(np.float64)
        if not np.issubdtype(q.dtype, np.floating):
            q = q.astype(np.float64)
        if i.ndim != 1 or q.ndim != 1:
            raise ShapeMismatch("i and q must be 1-D sample vectors")
        if i.shape != q.shape:
            raise ShapeMismatch(f"i has {i.shape[0]} samples but q has {q.shape[0]}")
        if i.shape[0] < 1:
            raise InvalidArgument("a frame needs at least one sample")
        if not (np.all(np.isfinite(i)) and np.all(np.isfinite(q))):
            raise InvalidArgument("frame samples must be finite")
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_complex(cls, z, **meta) -> "IQFrame":
        z = np.asarray(z, dtype=np.complex128)
        return cls(z.real.copy(), z.imag.copy(), **meta)

    @classmethod
    def from_array(cls, arr, **meta) -> "IQFrame":
        """Build from a ``(2, L)`` array whose rows are I and Q."""
        arr = np.asarray(arr)
        if arr.ndim != 2 or arr.shape[0] != 2:
            raise ShapeMismatch(f"expected a (2, L) array, got {arr.shape}")
        return cls(arr[0].copy(), arr[1].copy(), **meta)

    def __len__(self) -> int:
        return self.i.shape[0]

    @property
    def length(self) -> int:
        return self.i.shape[0]

    def as_complex(self) -> np.ndarray:
        return self.i.astype(np.float64) + 1j * self.q.astype(np.float64)

    def as_array(self, dtype=None) -> np.ndarray:
        out = np.stack([self.i, self.q])
        return out if dtype is None else out.astype(dtype)

    def mean_power(self) -> float:
        i = self.i.astype(np.float64)
        q = self.q.astype(np.float64)
        return float(np.mean(i * i + q * q))

    def with_samples(self, i, q) -> "IQFrame":
        """Copy carrying the same metadata but new samples."""
        return replace(self, i=np.asarray(i), q=np.asarray(q))

    def equals(self, other: "IQFrame") -> bool:
        """Bit-exact comparison of samples and metadata."""
        return (
            self.i.dtype == other.i.dtype
            and np.array_equal(self.i, other.i)
            and np.array_equal(self.q, other.q)
            and self.label == other.label
            and self.scheme == other.scheme
            and (self.snr_db == other.snr_db)
        )


@dataclass(frozen=True)
class ChannelSpec:
    """Linear channel ``h * s`` plus AWGN at ``snr_db``; ``NOISELESS`` disables noise."""

    taps: tuple = (1.0 + 0.0j,)
    snr_db: float = NOISELESS
    seed: int = 0

    def __post_init__(self):
        taps = tuple(complex(t) for t in np.atleast_1d(np.asarray(self.taps, dtype=np.complex128)))
        if len(taps) == 0:
            raise InvalidArgument("channel needs at least one tap")
        if not all(math.isfinite(t.real) and math.isfinite(t.imag) for t in taps):
            raise InvalidArgument("channel taps must be finite")
        if all(t == 0 for t in taps):
            raise InvalidArgument("at least one channel tap must be nonzero")
        snr = NOISELESS if is_noiseless(self.snr_db) else float(self.snr_db)
        if not (snr == NOISELESS or math.isfinite(snr)):
            raise InvalidArgument(f"snr_db must be finite or noiseless, got {self.snr_db!r}")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "snr_db", snr)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def noiseless(self) -> bool:
        return self.snr_db == NOISELESS


@dataclass
class SignalDataset:
    frames: list
    class_names: list
    split_tag: str = "train"
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.split_tag not in SPLITS:
            raise InvalidArgument(f"split_tag must be one of {SPLITS}, got {self.split_tag!r}")
        self.frames = list(self.frames)
        self.class_names = list(self.class_names)
        lengths = {len(f) for f in self.frames}
        if len(lengths) > 1:
            raise ShapeMismatch(f"frames in one dataset must share a length, found {sorted(lengths)}")
        for f in self.frames:
            if f.label is not None and not 0 <= f.label < len(self.class_names):
                raise InvalidArgument(
                    f"label {f.label} does not index {len(self.class_names)} class names"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def length(self) -> Optional[int]:
        return len(self.frames[0]) if self.frames else self.manifest.get("length")

    @property
    def labeled(self) -> bool:
        return all(f.label is not None for f in self.frames)

    def as_array(self, dtype=np.float32) -> np.ndarray:
        """Stack frames into an ``(N, 2, L)`` array."""
        if not self.frames:
            return np.zeros((0, 2, self.length or 0), dtype=dtype)
        return np.stack([f.as_array() for f in self.frames]).astype(dtype, copy=False)

    def labels(self) -> np.ndarray:
        return np.array([-1 if f.label is None else f.label for f in self.frames], dtype=np.int64)

    def snrs(self) -> np.ndarray:
        return np.array(
            [NOISELESS if f.snr_db is None else f.snr_db for f in self.frames], dtype=np.float64
        )

    def subset(self, indices: Sequence[int], split_tag: Optional[str] = None) -> "SignalDataset":
        return SignalDataset(
            [self.frames[k] for k in indices],
            self.class_names,
            split_tag or self.split_tag,
            dict(self.manifest),
        )

    def equals(self, other: "SignalDataset") -> bool:
        return (
            self.class_names == other.class_names
            and self.split_tag == other.split_tag
            and len(self) == len(other)
            and all(a.equals(b) for a, b in zip(self.frames, other.frames))
        )
