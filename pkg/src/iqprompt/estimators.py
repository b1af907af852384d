"""scikit-learn estimators wrapping the signal language model."""

from __future__ import annotations

import copy
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_is_fitted

from .config import RunConfig
from .model.network import NetworkConfig, SignalLanguageModel
from .sigio.augment import augment_phase_rotate, augment_reverse, augment_time_warp, random_warp_knots
from .sigio.frames import IQFrame
from .sigio.sgfilter import sg_filter
from .trainer import finetune_classifier, pretrain
from .validation import check_iq_array, check_labels, to_dataset


def _run_config(est, length: int) -> RunConfig:
    run = RunConfig.from_dict(copy.deepcopy(est.config) if est.config else None)
    run.data.length = length
    run.model.d_model = est.d_model
    run.model.layers = est.n_layers
    run.model.heads = est.n_heads
    run.model.lora_rank = est.lora_rank
    run.model.decoder = est.decoder
    run.hptr.enabled = est.use_prompt
    run.hptr.patch_len = run.hptr.stride = est.patch_len
    run.hptr.top_k = est.top_k
    run.faf.enabled = est.use_fusion
    run.train.seed = est.random_state
    run.train.batch_size = est.batch_size
    return run.validate()


def _split_val(X, rng_seed: int, fraction: float = 0.1):
    n = len(X)
    n_val = max(1, int(round(fraction * n))) if n > 1 else 0
    order = np.random.default_rng(rng_seed).permutation(n)
    return order[n_val:], order[:n_val]


class IQPromptDenoiser(TransformerMixin, BaseEstimator):
    """Pretrains the model to reconstruct clean frames; ``transform`` denoises.

    ``fit(X)`` treats ``X`` as clean frames and corrupts them on the fly
    with the pretext tasks (AWGN and patch masking).
    """

    def __init__(self, d_model=64, n_layers=2, n_heads=4, lora_rank=4, patch_len=16, top_k=7,
                 decoder="transformer", use_prompt=True, use_fusion=True, epochs=20, lr=1e-3,
                 batch_size=32, denoise_weight=0.5, snr_grid_db=(0.0, 2.0, 4.0, 6.0, 8.0, 10.0),
                 description=None, config=None, random_state=0):
        self.d_model = d_model
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.lora_rank = lora_rank
        self.patch_len = patch_len
        self.top_k = top_k
        self.decoder = decoder
        self.use_prompt = use_prompt
        self.use_fusion = use_fusion
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.denoise_weight = denoise_weight
        self.snr_grid_db = snr_grid_db
        self.description = description
        self.config = config
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_iq_array(X)
        run = _run_config(self, X.shape[2])
        run.train.epochs = self.epochs
        run.train.lr = self.lr
        run.train.denoise_weight = self.denoise_weight
        run.train.mask_weight = 1.0 - self.denoise_weight
        run.train.pretrain_snr_grid_db = [float(s) for s in self.snr_grid_db]
        run.validate()
        tr, va = _split_val(X, self.random_state)
        net = NetworkConfig.from_run(run, n_classes=0)
        if self.description:
            net.dataset_description = self.description
        self.model_ = SignalLanguageModel(net)
        train = to_dataset(X[tr], description=self.description)
        val = to_dataset(X[va] if len(va) else X[tr], split_tag="val", description=self.description)
        self.model_, self.train_log_ = pretrain(self.model_, [train], run.train, [val])
        self.n_features_in_ = X.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_iq_array(X, self.n_features_in_)
        return self.model_.denoise(X, description=self.description)


class IQPromptClassifier(ClassifierMixin, BaseEstimator):
    """Few-shot modulation classifier; optionally pretrains on ``X`` first.

    ``shots=None`` uses every training frame of the smallest class for each
    class. ``scope`` chooses which parameters fine-tuning updates.
    """

    def __init__(self, d_model=64, n_layers=2, n_heads=4, lora_rank=4, patch_len=16, top_k=7,
                 decoder="transformer", use_prompt=True, use_fusion=True, epochs=20, lr=1e-3,
                 batch_size=32, shots=None, scope="all", pretrain_epochs=0, description=None,
                 config=None, random_state=0):
        self.d_model = d_model
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.lora_rank = lora_rank
        self.patch_len = patch_len
        self.top_k = top_k
        self.decoder = decoder
        self.use_prompt = use_prompt
        self.use_fusion = use_fusion
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.shots = shots
        self.scope = scope
        self.pretrain_epochs = pretrain_epochs
        self.description = description
        self.config = config
        self.random_state = random_state

    def fit(self, X, y):
        X = check_iq_array(X)
        y = check_labels(y, len(X))
        self.classes_ = unique_labels(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        codes = np.searchsorted(self.classes_, y)
        run = _run_config(self, X.shape[2])
        run.train.finetune_epochs = self.epochs
        run.train.finetune_lr = self.lr
        run.train.finetune_scope = self.scope
        shots = self.shots or int(np.bincount(codes).min())
        run.train.shots = shots
        run.validate()
        net = NetworkConfig.from_run(run, n_classes=len(self.classes_))
        if self.description:
            net.dataset_description = self.description
        names = [str(c) for c in self.classes_]
        model = SignalLanguageModel(net)
        train = to_dataset(X, codes, names, description=self.description)
        if self.pretrain_epochs:
            run.train.epochs = self.pretrain_epochs
            tr, va = _split_val(X, self.random_state)
            val = to_dataset(X[va] if len(va) else X, split_tag="val", description=self.description)
            model, self.pretrain_log_ = pretrain(model, [to_dataset(X[tr], description=self.description)],
                                                 run.train, [val])
        self.model_, self.train_report_, self.train_log_ = finetune_classifier(model, train, train, run.train)
        self.n_features_in_ = X.shape[2]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_iq_array(X, self.n_features_in_)
        return self.model_.predict_proba(X, description=self.description)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]


class SGFilterDenoiser(TransformerMixin, BaseEstimator):
    """Savitzky-Golay smoothing of both channels; stateless."""

    def __init__(self, window=5, polyorder=2, mode="interp"):
        self.window = window
        self.polyorder = polyorder
        self.mode = mode

    def fit(self, X, y=None):
        X = check_iq_array(X)
        self.n_features_in_ = X.shape[2]
        return self

    def transform(self, X):
        X = check_iq_array(X, getattr(self, "n_features_in_", None), dtype=np.float64)
        out = [sg_filter(IQFrame(x[0], x[1]), self.window, self.polyorder, self.mode).as_array() for x in X]
        return np.stack(out)


class IQAugmenter(TransformerMixin, BaseEstimator):
    """Random phase rotation, time reversal and smooth time warping per frame."""

    def __init__(self, rotate=True, reverse=False, warp=False, warp_strength=0.2, random_state=0):
        self.rotate = rotate
        self.reverse = reverse
        self.warp = warp
        self.warp_strength = warp_strength
        self.random_state = random_state

    def fit(self, X, y=None):
        check_iq_array(X)
        return self

    def transform(self, X):
        X = check_iq_array(X, dtype=np.float64)
        rng = np.random.default_rng(self.random_state)
        out = []
        for x in X:
            f = IQFrame(x[0], x[1])
            if self.rotate:
                f = augment_phase_rotate(f, float(rng.uniform(0, 2 * np.pi)))
            if self.reverse and rng.random() < 0.5:
                f = augment_reverse(f)
            if self.warp:
                f = augment_time_warp(f, random_warp_knots(len(f), rng, strength=self.warp_strength))
            out.append(f.as_array())
        return np.stack(out)
