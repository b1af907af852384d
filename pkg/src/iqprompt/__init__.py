"""Prompted language-model pipeline for radio IQ signals."""

from . import faf, hptr, metrics, model, nncore, sigio, trainer
from .config import RunConfig, load_config
from .estimators import IQAugmenter, IQPromptClassifier, IQPromptDenoiser, SGFilterDenoiser
from .exceptions import IQPromptError
from .model import NetworkConfig, SignalLanguageModel, load_checkpoint, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "IQAugmenter", "IQPromptClassifier", "IQPromptDenoiser", "IQPromptError", "NetworkConfig",
    "RunConfig", "SGFilterDenoiser", "SignalLanguageModel", "faf", "hptr", "load_checkpoint",
    "load_config", "metrics", "model", "nncore", "save_checkpoint", "sigio", "trainer",
]
