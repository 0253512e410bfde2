"""Estimator-style wrappers: STFT feature extraction and the pooled regressor.

FramePoolRegressor follows the scikit-learn fit/predict convention but
takes a *sequence* of 2-D frame matrices (one per utterance, row counts
may differ) rather than a flat sample-by-feature matrix, since pooling
over an utterance's frames is the point of the model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .audio import StftConfig, WaveBuffer, stft_magnitude
from .errors import SqaLabError
from .features import check_feature_matrices
from .ioutil import atomic_write_text
from .model import (
    Adam,
    batch_gradient,
    forward,
    init_params,
    mean_objective,
    pooled_scores,
)


class StftFeaturizer(TransformerMixin, BaseEstimator):
    """Turns waveforms into magnitude-spectrogram frame matrices."""

    def __init__(self, window_length: int = 512, hop_length: int = 256):
        self.window_length = window_length
        self.hop_length = hop_length

    def fit(self, X=None, y=None):
        cfg = StftConfig(window_length=self.window_length, hop_length=self.hop_length)
        self.n_bins_ = cfg.n_bins
        return self

    def transform(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "n_bins_")
        cfg = StftConfig(window_length=self.window_length, hop_length=self.hop_length)
        out = []
        for wave in X:
            samples = wave.samples if isinstance(wave, WaveBuffer) else np.asarray(wave)
            out.append(stft_magnitude(samples, cfg))
        return out


class EarlyStopping:
    """Tracks the best validation loss; a tie keeps the earlier epoch."""

    def __init__(self, patience: int):
        if patience < 1:
            raise SqaLabError("patience must be >= 1", code="train_config")
        self.patience = patience
        self.best_loss: float | None = None
        self.best_epoch: int | None = None
        self.epochs_since_best = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record one epoch's loss; True when it sets a new best."""
        if self.best_loss is None or loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.epochs_since_best = 0
            return True
        self.epochs_since_best += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.epochs_since_best >= self.patience


@dataclass(frozen=True)
class HistoryEntry:
    epoch: int
    train_loss: float
    val_loss: float


def render_history_tsv(history: Sequence[HistoryEntry]) -> str:
    lines = ["epoch\ttrain_loss\tval_loss"]
    for h in history:
        lines.append(f"{h.epoch}\t{h.train_loss:.6f}\t{h.val_loss:.6f}")
    return "\n".join(lines) + "\n"


def write_history_tsv(path, history: Sequence[HistoryEntry]) -> None:
    atomic_write_text(path, render_history_tsv(history))


def _as_matrix_list(X) -> list[np.ndarray]:
    mats = check_feature_matrices(X)
    return [np.asarray(m, dtype=np.float64) for m in mats]


class FramePoolRegressor(RegressorMixin, BaseEstimator):
    """Frame-score regressor trained with the pooled + per-frame loss.

    Parameters mirror the training protocol: Adam with the given learning
    rate, mini-batches reshuffled each epoch, early stopping on validation
    loss with the given patience, parameters restored from the best epoch.
    All randomness (init, splits, shuffles, dropout) comes from one
    generator seeded with random_state, so a fit is reproducible.
    """

    def __init__(
        self,
        hidden_width: int = 0,
        alpha: float = 1.0,
        learning_rate: float = 1e-4,
        batch_size: int = 32,
        patience: int = 5,
        max_epochs: int = 200,
        dropout_rate: float = 0.0,
        validation_fraction: float = 0.2,
        random_state: int = 0,
    ):
        self.hidden_width = hidden_width
        self.alpha = alpha
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.patience = patience
        self.max_epochs = max_epochs
        self.dropout_rate = dropout_rate
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _check_config(self) -> None:
        if self.hidden_width < 0:
            raise SqaLabError("hidden_width must be >= 0", code="train_config")
        if self.alpha < 0:
            raise SqaLabError("alpha must be >= 0", code="train_config")
        if self.learning_rate <= 0:
            raise SqaLabError("learning_rate must be positive", code="train_config")
        if self.batch_size < 1:
            raise SqaLabError("batch_size must be >= 1", code="train_config")
        if self.patience < 1:
            raise SqaLabError("patience must be >= 1", code="train_config")
        if self.max_epochs < 1:
            raise SqaLabError("max_epochs must be >= 1", code="train_config")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise SqaLabError("dropout_rate must be in [0, 1)", code="train_config")
        if self.dropout_rate > 0 and self.hidden_width == 0:
            raise SqaLabError("dropout requires a hidden layer", code="train_config")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise SqaLabError("validation_fraction must be in [0, 1)",
                              code="train_config")

    def fit(self, X, y, *, X_val=None, y_val=None):
        """Train on (X, y); X is a sequence of per-utterance frame matrices.

        A validation set is required for early stopping: pass X_val/y_val
        explicitly, or leave them None to have validation_fraction of the
        training samples split off by the seeded shuffle.
        """
        self._check_config()
        mats = _as_matrix_list(X)
        targets = np.asarray(y, dtype=np.float64)
        if targets.ndim != 1 or targets.shape[0] != len(mats):
            raise SqaLabError("y must be 1-D with one target per sample",
                              code="dim_mismatch")
        if not np.all(np.isfinite(targets)):
            raise SqaLabError("targets must be finite", code="dim_mismatch")
        if (X_val is None) != (y_val is None):
            raise SqaLabError("pass X_val and y_val together", code="train_config")

        rng = np.random.default_rng(self.random_state)
        if X_val is not None:
            train_mats, train_y = mats, targets
            val_mats = _as_matrix_list(X_val)
            val_y = np.asarray(y_val, dtype=np.float64)
            if val_y.ndim != 1 or val_y.shape[0] != len(val_mats):
                raise SqaLabError("y_val must be 1-D with one target per sample",
                                  code="dim_mismatch")
            if val_mats and val_mats[0].shape[1] != mats[0].shape[1]:
                raise SqaLabError("validation feature width differs from training",
                                  code="dim_mismatch")
        else:
            n_val = int(len(mats) * self.validation_fraction + 1e-9)
            if n_val < 1 or len(mats) - n_val < 1:
                raise SqaLabError(
                    "not enough samples to split off a validation set; "
                    "pass X_val/y_val or adjust validation_fraction",
                    code="train_config",
                )
            perm = rng.permutation(len(mats))
            val_idx = perm[:n_val]
            train_idx = perm[n_val:]
            train_mats = [mats[i] for i in train_idx]
            train_y = targets[train_idx]
            val_mats = [mats[i] for i in val_idx]
            val_y = targets[val_idx]
        if len(val_mats) < 1:
            raise SqaLabError("validation set is empty", code="train_config")

        d = mats[0].shape[1]
        params = init_params(d, self.hidden_width, rng)
        adam = Adam(self.learning_rate)
        stopper = EarlyStopping(self.patience)
        best = params.copy()
        history: list[HistoryEntry] = []
        n_train = len(train_mats)
        for epoch in range(1, self.max_epochs + 1):
            order = rng.permutation(n_train)
            loss_sum = 0.0
            for start in range(0, n_train, self.batch_size):
                idx = order[start:start + self.batch_size]
                grads, batch_loss = batch_gradient(
                    params,
                    [train_mats[i] for i in idx],
                    train_y[idx],
                    self.alpha,
                    dropout_rate=self.dropout_rate,
                    rng=rng,
                )
                adam.step(params, grads)
                loss_sum += batch_loss * len(idx)
            train_loss = loss_sum / n_train
            val_loss = self._mean_loss(params, val_mats, val_y)
            history.append(HistoryEntry(epoch, train_loss, val_loss))
            if stopper.update(epoch, val_loss):
                best = params.copy()
            if stopper.should_stop:
                break

        self.params_ = best
        self.history_ = tuple(history)
        self.best_epoch_ = stopper.best_epoch
        self.best_val_loss_ = stopper.best_loss
        self.n_iter_ = history[-1].epoch
        self.n_features_in_ = d
        return self

    def _mean_loss(self, params, mats, targets) -> float:
        return mean_objective(params, mats, targets, self.alpha)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        mats = _as_matrix_list(X)
        return pooled_scores(self.params_, mats)

    def frame_scores(self, frames) -> np.ndarray:
        """Per-frame scores for one utterance, before pooling."""
        check_is_fitted(self, "params_")
        return forward(self.params_, np.asarray(frames, dtype=np.float64))[0]

    def validation_loss(self, X, y) -> float:
        """Mean training-objective loss of the fitted model on (X, y)."""
        check_is_fitted(self, "params_")
        mats = _as_matrix_list(X)
        targets = np.asarray(y, dtype=np.float64)
        if targets.shape[0] != len(mats):
            raise SqaLabError("y must have one target per sample", code="dim_mismatch")
        return self._mean_loss(self.params_, mats, targets)
