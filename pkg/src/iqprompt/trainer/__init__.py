"""Pretraining, few-shot fine-tuning and denoising evaluation."""

from .balancing import derive_balancing_factors
from .corrupt import corrupt_awgn, corrupt_mask, mask_span
from .evaluate import denoise_eval
from .finetune import SCOPES, finetune_classifier, sample_shots
from .log import EpochRecord, TrainLog
from .pretrain import batch_mse, plan_epoch, pretrain

__all__ = [
    "EpochRecord", "SCOPES", "TrainLog", "batch_mse", "corrupt_awgn", "corrupt_mask",
    "denoise_eval", "derive_balancing_factors", "finetune_classifier", "mask_span", "plan_epoch",
    "pretrain", "sample_shots",
]
