"""End-to-end signal language model: patches, prompts, fusion, backbone, decoders, head."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
from torch import nn

from ..config import BackboneConfig, FAFConfig, HPTRConfig, RunConfig, config_hash
from ..exceptions import InvalidArgument, SequenceTooLong, ShapeMismatch
from ..faf import FrequencyAttunedFusion, HFEConfig
from ..hptr import tokenizer
from ..hptr.anchors import AnchorTable, HybridPrompt, select_hybrid_prompt
from ..hptr.patching import PatchEmbedding
from ..hptr.prompt import build_prompt_text, task_description
from ..hptr.reprogram import Reprogrammer
from ..nncore.seeding import seeded
from ..sigio.frames import IQFrame
from .backbone import Backbone
from .decoders import LinearDecoder, TransformerDecoder

DEFAULT_DESCRIPTION = "Baseband IQ recordings of digitally modulated radio signals."

# Keys that fix tensor shapes; a checkpoint only loads into a model agreeing on all of them.
GEOMETRY_KEYS = (
    ("length",),
    ("n_classes",),
    ("backbone", "d_model"), ("backbone", "layers"), ("backbone", "heads"),
    ("backbone", "ff_mult"), ("backbone", "lora_rank"), ("backbone", "lora_targets"),
    ("backbone", "max_tokens"), ("backbone", "decoder"), ("backbone", "decoder_layers"),
    ("hptr", "n_anchors"), ("hptr", "patch_len"), ("hptr", "stride"), ("hptr", "heads"),
    ("faf", "layers"),
)


@dataclass
class NetworkConfig:
    length: int = 128
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    hptr: HPTRConfig = field(default_factory=HPTRConfig)
    faf: FAFConfig = field(default_factory=FAFConfig)
    n_classes: int = 0
    seed: int = 0
    dataset_description: str = DEFAULT_DESCRIPTION

    @classmethod
    def from_run(cls, run: RunConfig, n_classes: Optional[int] = None, seed: Optional[int] = None):
        return cls(
            length=run.data.length,
            backbone=run.model,
            hptr=run.hptr,
            faf=run.faf,
            n_classes=len(run.data.schemes) if n_classes is None else n_classes,
            seed=run.train.seed if seed is None else seed,
            dataset_description=run.hptr.dataset_description or run.data.description,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        d["backbone"] = BackboneConfig(**d["backbone"])
        d["hptr"] = HPTRConfig(**d["hptr"])
        d["faf"] = FAFConfig(**d["faf"])
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def geometry(self) -> dict:
        d = self.to_dict()
        out = {}
        for path in GEOMETRY_KEYS:
            v = d
            for k in path:
                v = v[k]
            out[".".join(path)] = v
        if out["hptr.heads"] is None:
            out["hptr.heads"] = out["backbone.heads"]
        return out

    def geometry_hash(self) -> str:
        return config_hash(self.geometry())

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def hfe(self) -> HFEConfig:
        n_p = (self.length - self.hptr.patch_len) // self.hptr.stride + 1
        if self.faf.layers is None:
            return HFEConfig.for_geometry(self.length, n_p, self.faf.high_pass)
        return HFEConfig(self.faf.layers, self.faf.high_pass)


@dataclass
class Encoded:
    x_s: torch.Tensor
    f_s: torch.Tensor
    fused: torch.Tensor
    prefix: torch.Tensor
    hybrid: Optional[HybridPrompt]
    p_llm: Optional[torch.Tensor]
    f_llm: Optional[torch.Tensor]


class SignalLanguageModel(nn.Module):
    """Patch embedding, prompt prefix, reprogramming, frequency fusion and a frozen backbone.

    Every submodule is initialized from a seed derived from ``(cfg.seed,
    name)``, so the frozen base can be regenerated from the config alone and
    omitting the fusion branch (``build_faf=False``) leaves all other weights
    unchanged.
    """

    def __init__(self, cfg: NetworkConfig, build_faf: bool = True):
        super().__init__()
        self.cfg = cfg
        b, h = cfg.backbone, cfg.hptr
        d = b.d_model
        self.heads_hptr = h.heads or b.heads
        with seeded(cfg.seed, "patch"):
            self.patch = PatchEmbedding(cfg.length, h.patch_len, h.stride, d)
        self.n_patches = self.patch.n_patches
        if h.top_k + self.n_patches > b.max_tokens:
            raise SequenceTooLong(f"K + P = {h.top_k + self.n_patches} exceeds max_tokens={b.max_tokens}")
        with seeded(cfg.seed, "anchors"):
            self.anchors = AnchorTable(tokenizer.VOCAB_SIZE, h.n_anchors, d)
        with seeded(cfg.seed, "reprogram"):
            self.reprogram = Reprogrammer(d, self.heads_hptr)
        self.faf = None
        if build_faf:
            with seeded(cfg.seed, "faf"):
                self.faf = FrequencyAttunedFusion(cfg.hfe(), cfg.length, self.n_patches, d, b.heads)
        self.backbone = Backbone(b, cfg.seed)
        with seeded(cfg.seed, "decoder"):
            if b.decoder == "linear":
                self.decoder = LinearDecoder(d, h.patch_len, self.n_patches, cfg.length)
            else:
                self.decoder = TransformerDecoder(d, b.heads, h.patch_len, self.n_patches, cfg.length,
                                                  layers=b.decoder_layers, ff_mult=b.ff_mult)
        self.head = None
        if cfg.n_classes:
            self.attach_head(cfg.n_classes)

    # -- parameter bookkeeping -------------------------------------------------

    def attach_head(self, n_classes: int):
        if n_classes < 2:
            raise InvalidArgument(f"a classifier needs at least 2 classes, got {n_classes}")
        dtype = self.patch.proj.weight.dtype
        with seeded(self.cfg.seed, "head", str(n_classes)):
            self.head = nn.Linear(self.cfg.backbone.d_model, n_classes).to(dtype)
        self.cfg.n_classes = n_classes
        return self.head

    @staticmethod
    def is_frozen_name(name: str) -> bool:
        return name.startswith("backbone.") and ".lora_" not in name

    def frozen_parameters(self):
        return [(n, p) for n, p in self.named_parameters() if self.is_frozen_name(n)]

    def trainable_parameters(self):
        return [(n, p) for n, p in self.named_parameters() if not self.is_frozen_name(n)]

    def parameter_groups(self) -> dict:
        groups = {"frozen": [], "adapters": [], "head": [], "pipeline": []}
        for n, p in self.named_parameters():
            if self.is_frozen_name(n):
                groups["frozen"].append((n, p))
            elif ".lora_" in n:
                groups["adapters"].append((n, p))
            elif n.startswith("head."):
                groups["head"].append((n, p))
            else:
                groups["pipeline"].append((n, p))
        return groups

    def frozen_digest(self) -> str:
        h = hashlib.sha256()
        for n, p in sorted(self.frozen_parameters()):
            h.update(n.encode())
            h.update(p.detach().cpu().contiguous().numpy().tobytes())
        return h.hexdigest()

    @property
    def dtype(self):
        return self.patch.proj.weight.dtype

    # -- prompts ---------------------------------------------------------------

    def prompt_texts(self, x: np.ndarray, task: str, description: Optional[str] = None) -> list:
        desc = task_description(task)
        dataset = description or self.cfg.dataset_description
        return [build_prompt_text(dataset, desc, IQFrame(f[0], f[1])) for f in x]

    def prompts(self, x, task: str = "denoise", description: Optional[str] = None):
        """Tokenized hardware prompts ``(ids, mask)`` for a ``(B, 2, L)`` batch."""
        arr = x.detach().cpu().numpy() if isinstance(x, torch.Tensor) else np.asarray(x)
        seqs = [tokenizer.encode(t) for t in self.prompt_texts(arr, task, description)]
        ids, mask = tokenizer.pad_batch(seqs, self.cfg.hptr.prompt_max_tokens)
        return torch.from_numpy(ids), torch.from_numpy(mask)

    # -- forward ---------------------------------------------------------------

    def _as_input(self, x) -> torch.Tensor:
        x = torch.as_tensor(x)
        if x.dim() == 2:
            x = x.unsqueeze(0)
        if x.dim() != 3 or x.shape[1] != 2:
            raise ShapeMismatch(f"expected (B, 2, L) frames, got {tuple(x.shape)}")
        return x.to(self.dtype)

    def encode(self, x, ids=None, mask=None, task: str = "denoise", run_backbone: bool = True,
               description: Optional[str] = None) -> Encoded:
        x = self._as_input(x)
        if ids is None:
            ids, mask = self.prompts(x, task, description)
        h = self.cfg.hptr
        x_s = self.patch(x)
        p_t = self.anchors.embed(ids)
        hybrid = None
        if h.enabled:
            anchors = self.anchors.anchors()
            f_s = self.reprogram(x_s, anchors)
            if h.prefix == "hybrid":
                hybrid = select_hybrid_prompt(p_t, anchors, h.top_k, mask)
                prefix = hybrid.p_prime
            else:
                prefix = p_t
        else:
            f_s = x_s
            if p_t.shape[-2] < h.top_k:
                raise ShapeMismatch(f"prompt has {p_t.shape[-2]} tokens, fewer than K={h.top_k}")
            prefix = p_t[:, : h.top_k]
        fused = self.faf(x, f_s) if (self.cfg.faf.enabled and self.faf is not None) else f_s
        p_llm = f_llm = None
        if run_backbone:
            p_llm, f_llm = self.backbone(prefix, fused)
        return Encoded(x_s, f_s, fused, prefix, hybrid, p_llm, f_llm)

    def reconstruct(self, x, ids=None, mask=None, task: str = "denoise",
                    description: Optional[str] = None) -> torch.Tensor:
        """``(B, 2, L)`` reconstruction ``O_s``."""
        return self.decoder(self.encode(x, ids, mask, task, description=description).f_llm)

    forward = reconstruct

    def logits(self, x, ids=None, mask=None, description: Optional[str] = None) -> torch.Tensor:
        if self.head is None:
            raise InvalidArgument("model has no classification head; call attach_head first")
        use_fused = self.cfg.backbone.classifier_source == "fused"
        enc = self.encode(x, ids, mask, task="classify", run_backbone=not use_fused, description=description)
        feats = enc.fused if use_fused else enc.f_llm
        return classify(feats, self.head)

    # -- numpy conveniences ----------------------------------------------------

    def _batched(self, x, fn, batch_size: int):
        x = np.asarray(x)
        was_training = self.training
        self.eval()
        outs = []
        try:
            with torch.no_grad():
                for start in range(0, len(x), batch_size):
                    outs.append(fn(torch.as_tensor(x[start: start + batch_size])).cpu().numpy())
        finally:
            self.train(was_training)
        return np.concatenate(outs) if outs else np.zeros((0,))

    def predict_proba(self, x, batch_size: int = 128, description: Optional[str] = None) -> np.ndarray:
        fn = lambda b: torch.softmax(self.logits(b, description=description), dim=-1)  # noqa: E731
        return self._batched(x, fn, batch_size)

    def predict_labels(self, x, batch_size: int = 128, description: Optional[str] = None) -> np.ndarray:
        return self.predict_proba(x, batch_size, description).argmax(axis=-1)

    def denoise(self, x, batch_size: int = 128, task: str = "denoise",
                description: Optional[str] = None) -> np.ndarray:
        fn = lambda b: self.reconstruct(b, task=task, description=description)  # noqa: E731
        return self._batched(x, fn, batch_size).astype(np.asarray(x).dtype)


def classify(f_llm: torch.Tensor, head: nn.Linear) -> torch.Tensor:
    """Mean-pool the signal-token rows, then the linear head: ``(..., P, D)`` -> ``(..., C)``."""
    return head(f_llm.mean(dim=-2))


def build_model(cfg: NetworkConfig, build_faf: bool = True) -> SignalLanguageModel:
    return SignalLanguageModel(cfg, build_faf=build_faf)
