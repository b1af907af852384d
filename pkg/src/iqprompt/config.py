"""Structured run configuration with strict parsing.

A config document (YAML or JSON) has the sections ``data``, ``model``,
``hptr``, ``faf``, ``train``, ``eval`` and ``io``; every key maps to a field
below. Unknown sections or keys are rejected, naming the offending path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .exceptions import ConfigError, InvalidArgument
from .sigio.benchmark import GeneratorConfig
from .sigio.modulation import SCHEMES


@dataclass
class BackboneConfig:
    """``model`` section: the frozen causal transformer, its adapters and decoders."""

    d_model: int = 64
    layers: int = 2
    heads: int = 4
    ff_mult: int = 4
    lora_rank: int = 4
    lora_alpha: Optional[float] = None  # None -> 2 * lora_rank
    lora_targets: list = field(default_factory=lambda: ["q", "k", "v", "o"])
    dropout: float = 0.0
    max_tokens: int = 512
    base_init: str = "random"  # "random" or "warm"
    warm_steps: int = 100
    decoder: str = "transformer"  # "transformer" or "linear"
    decoder_layers: int = 1
    classifier_source: str = "backbone"  # "backbone" (pool LLM output) or "fused" (pool F'_s)

    def validate(self):
        if self.d_model % self.heads:
            raise ConfigError("model.d_model must be divisible by model.heads", "model.d_model")
        if self.layers < 1 or self.lora_rank < 1 or self.ff_mult < 1:
            raise ConfigError("model.layers, lora_rank and ff_mult must be >= 1", "model.layers")
        bad = set(self.lora_targets) - {"q", "k", "v", "o"}
        if bad:
            raise ConfigError(f"unknown lora target(s) {sorted(bad)}", "model.lora_targets")
        _choice("model.base_init", self.base_init, ("random", "warm"))
        _choice("model.decoder", self.decoder, ("transformer", "linear"))
        _choice("model.classifier_source", self.classifier_source, ("backbone", "fused"))
        if self.decoder_layers not in (1, 2):
            raise ConfigError("model.decoder_layers must be 1 or 2", "model.decoder_layers")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("model.dropout must lie in [0, 1)", "model.dropout")


@dataclass
class HPTRConfig:
    enabled: bool = True
    n_anchors: int = 64
    top_k: int = 7
    prefix: str = "hybrid"  # "hybrid" (top-K anchors) or "hardware" (full prompt embedding)
    prompt_max_tokens: Optional[int] = None
    patch_len: int = 16
    stride: int = 16
    heads: Optional[int] = None  # None -> model.heads
    dataset_description: Optional[str] = None  # None -> data.description

    def validate(self):
        _choice("hptr.prefix", self.prefix, ("hybrid", "hardware"))
        if not 1 <= self.top_k <= self.n_anchors:
            raise ConfigError("hptr.top_k must lie in [1, n_anchors]", "hptr.top_k")
        if self.patch_len < 1 or self.stride < 1:
            raise ConfigError("hptr.patch_len and hptr.stride must be >= 1", "hptr.patch_len")
        if self.prompt_max_tokens is not None and self.prompt_max_tokens < 1:
            raise ConfigError("hptr.prompt_max_tokens must be >= 1", "hptr.prompt_max_tokens")


@dataclass
class FAFConfig:
    enabled: bool = True
    layers: Optional[list] = None  # None -> defaults sized to the patch geometry
    high_pass: bool = True  # zero-DC first-stage kernels

    def validate(self):
        if self.layers is not None and len(self.layers) != 3:
            raise ConfigError("faf.layers must list exactly three layers", "faf.layers")


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 5e-5
    weight_decay: float = 5e-3
    warmup_fraction: float = 0.1
    patience_halve: int = 5
    patience_stop: int = 20
    denoise_weight: float = 0.5
    mask_weight: float = 0.5
    mask_ratio: float = 0.25
    masked_only_loss: bool = False
    pretrain_snr_grid_db: list = field(default_factory=lambda: [0.0, 2.0, 4.0, 6.0, 8.0, 10.0])
    balancing: Optional[list] = None  # None -> inverse-size factors
    finetune_epochs: int = 20
    finetune_lr: float = 5e-5
    finetune_lr_floor: float = 0.0
    finetune_scope: str = "head+adapters"  # "head", "head+adapters" or "all"
    shots: int = 100
    seed: int = 0

    def validate(self):
        if self.epochs < 1 or self.finetune_epochs < 1:
            raise ConfigError("train.epochs and train.finetune_epochs must be >= 1", "train.epochs")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1", "train.batch_size")
        if self.lr <= 0 or self.finetune_lr <= 0:
            raise ConfigError("learning rates must be positive", "train.lr")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("train.warmup_fraction must lie in [0, 1)", "train.warmup_fraction")
        if self.patience_halve < 1 or self.patience_stop < 1:
            raise ConfigError("patience values must be >= 1", "train.patience_halve")
        if self.denoise_weight < 0 or self.mask_weight < 0:
            raise ConfigError("task weights must be non-negative", "train.denoise_weight")
        if not math.isclose(self.denoise_weight + self.mask_weight, 1.0, abs_tol=1e-9):
            raise ConfigError("train.denoise_weight + train.mask_weight must sum to 1",
                              "train.denoise_weight")
        if not 0.0 < self.mask_ratio < 1.0:
            raise ConfigError("train.mask_ratio must lie in (0, 1)", "train.mask_ratio")
        if self.balancing is not None and any(b <= 0 for b in self.balancing):
            raise ConfigError("balancing factors must be positive", "train.balancing")
        _choice("train.finetune_scope", self.finetune_scope, ("head", "head+adapters", "all"))
        if self.shots < 1:
            raise ConfigError("train.shots must be >= 1", "train.shots")


@dataclass
class EvalConfig:
    batch_size: int = 128
    snr_grid_db: list = field(default_factory=lambda: [0.0, 2.0, 4.0, 6.0, 8.0, 10.0])
    ssim_window: int = 11
    k1: float = 0.01
    k2: float = 0.03
    sg_window: int = 5
    sg_polyorder: int = 2
    bench_batches: int = 100
    bench_batch_size: int = 32
    seed: int = 1234

    def validate(self):
        if self.ssim_window < 1 or self.ssim_window % 2 != 1:
            raise ConfigError("eval.ssim_window must be odd", "eval.ssim_window")
        if self.bench_batches < 1 or self.batch_size < 1:
            raise ConfigError("eval batch counts must be >= 1", "eval.bench_batches")


@dataclass
class IOConfig:
    out_dir: str = "runs"
    threads: int = 1


@dataclass
class RunConfig:
    data: GeneratorConfig = field(default_factory=GeneratorConfig)
    model: BackboneConfig = field(default_factory=BackboneConfig)
    hptr: HPTRConfig = field(default_factory=HPTRConfig)
    faf: FAFConfig = field(default_factory=FAFConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    io: IOConfig = field(default_factory=IOConfig)

    def validate(self) -> "RunConfig":
        for s in self.data.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"data.schemes: unknown modulation scheme {s!r}", "data.schemes")
        try:
            self.data.validate()
        except InvalidArgument as exc:
            raise ConfigError(f"data: {exc}", "data") from exc
        self.model.validate()
        self.hptr.validate()
        self.faf.validate()
        self.train.validate()
        self.eval.validate()
        if self.hptr.patch_len > self.data.length:
            raise ConfigError("hptr.patch_len exceeds data.length", "hptr.patch_len")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Digest of every section except ``io``, which only says where and how fast to run."""
        doc = self.to_dict()
        del doc["io"]
        return config_hash(doc)

    @classmethod
    def from_dict(cls, doc: Optional[dict]) -> "RunConfig":
        return _build(cls, doc or {}, "").validate()


def config_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _choice(key, value, allowed):
    if value not in allowed:
        raise ConfigError(f"{key} must be one of {allowed}, got {value!r}", key)


def _build(cls, doc, prefix):
    if not isinstance(doc, dict):
        raise ConfigError(f"{prefix or 'config'} must be a mapping", prefix or None)
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in doc:
        if key not in names:
            path = f"{prefix}.{key}" if prefix else key
            raise ConfigError(f"unknown config key {path!r}", path)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in doc:
            continue
        path = f"{prefix}.{f.name}" if prefix else f.name
        hint = hints[f.name]
        value = doc[f.name]
        if dataclasses.is_dataclass(hint):
            kwargs[f.name] = _build(hint, value, path)
        else:
            kwargs[f.name] = _coerce(hint, value, path)
    return cls(**kwargs)


def _coerce(hint, value, path):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        if value is None:
            return None
        hint = next(a for a in args if a is not type(None))
        origin = typing.get_origin(hint)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be true or false", path)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer", path)
        return value
    if hint is float:
        if isinstance(value, str):
            # YAML 1.1 reads exponent forms without a dot (1e-3) as strings
            try:
                parsed = float(value)
            except ValueError:
                parsed = math.nan
            if math.isfinite(parsed):
                return parsed
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number", path)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string", path)
        return value
    if hint is list or origin is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path} must be a list", path)
        return list(value)
    return value


def load_config(path=None, overrides=()) -> RunConfig:
    """Read ``path`` (YAML/JSON) and apply ``section.key=value`` overrides."""
    doc = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError:
            raise
        try:
            doc = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not section.key=value", item)
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {key!r} must be section.key", key)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw!r}", key) from exc
        doc.setdefault(parts[0], {})
        if not isinstance(doc[parts[0]], dict):
            raise ConfigError(f"section {parts[0]!r} must be a mapping", parts[0])
        doc[parts[0]][parts[1]] = value
    return RunConfig.from_dict(doc)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
