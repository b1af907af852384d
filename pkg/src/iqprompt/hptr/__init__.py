"""Hybrid prompting and token reprogramming."""

from . import tokenizer
from .anchors import (
    AnchorTable,
    HybridPrompt,
    PromptEmbedding,
    anchor_scores,
    cosine_similarity,
    derive_anchors,
    select_hybrid_prompt,
    tokenize_and_embed,
)
from .patching import PatchEmbedding, PatchSequence, n_patches, patchify_and_embed, unfold_patches
from .prompt import (
    DATASET_TAG,
    DELIMITERS,
    STATS_TAG,
    TASK_DESCRIPTIONS,
    TASK_TAG,
    autocorrelation,
    build_prompt_text,
    frame_statistics,
    task_description,
    top_lags,
)
from .reprogram import Reprogrammer, reprogram

__all__ = [
    "AnchorTable", "DATASET_TAG", "DELIMITERS", "HybridPrompt", "PatchEmbedding", "PatchSequence",
    "PromptEmbedding", "Reprogrammer", "STATS_TAG", "TASK_DESCRIPTIONS", "TASK_TAG", "anchor_scores",
    "autocorrelation", "build_prompt_text", "cosine_similarity", "derive_anchors", "frame_statistics",
    "n_patches", "patchify_and_embed", "reprogram", "select_hybrid_prompt", "task_description",
    "tokenize_and_embed", "tokenizer", "top_lags", "unfold_patches",
]
