"""Mini-batch Adam training with non-recurrent dropout and early stopping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .io import atomic_write_text
from .labeling import DirectionDataset, Windows
from .lstm import LstmModel, bce_from_logits, forward_sequence, loss_and_grads


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    dropout_p: float = 0.3
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ValueError("learning_rate and adam_eps must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")
        if not 0 <= self.patience <= self.max_epochs:
            raise ValueError("patience must lie in [0, max_epochs]")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_update(params: dict, grads: dict, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam step, applied in place. Returns ``(params, state)``."""
    if params.keys() != grads.keys():
        raise ValueError("params and grads have different keys")
    b1, b2 = config.adam_beta1, config.adam_beta2
    state.t += 1
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {k} has shape {g.shape}, expected {p.shape}")
        m, v = state.m[k], state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.adam_eps)
    return params, state


def sample_dropout_masks(hidden_sizes, dropout_p: float, rng: np.random.Generator, batch: int | None = None):
    """Inverted-dropout masks, one per layer output: 0 w.p. ``dropout_p`` else ``1/(1-p)``."""
    if not 0 <= dropout_p < 1:
        raise ValueError("dropout_p must lie in [0, 1)")
    keep = 1.0 - dropout_p
    masks = []
    for h in hidden_sizes:
        shape = (h,) if batch is None else (batch, h)
        if dropout_p == 0:
            masks.append(np.ones(shape))
        else:
            masks.append((rng.random(shape) >= dropout_p) / keep)
    return masks


def bce_loss(p, y):
    """Binary cross entropy for probabilities strictly inside (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probability must lie strictly in (0, 1)")
    y = np.asarray(y, dtype=float)
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def mean_loss(model: LstmModel, windows: Windows, batch: int = 4096) -> float:
    """Dropout-free mean BCE of ``model`` on a partition."""
    X, y = windows.features(), windows.targets.astype(float)
    total = 0.0
    for s in range(0, len(y), batch):
        _, tape = forward_sequence(model, X[s:s + batch])
        total += float(bce_from_logits(tape.logit, y[s:s + batch]).sum())
    return total / len(y)


@dataclass
class TrainReport:
    epochs_run: int = 0
    best_epoch: int = 0
    train_loss_curve: list[float] = field(default_factory=list)
    val_loss_curve: list[float] = field(default_factory=list)
    stopped_early: bool = False
    best_val_loss: float = math.inf

    def to_csv_text(self) -> str:
        rows = ["epoch,train_loss,val_loss"]
        rows += [f"{e},{tl!r},{vl!r}" for e, (tl, vl) in
                 enumerate(zip(self.train_loss_curve, self.val_loss_curve), start=1)]
        return "\n".join(rows) + "\n"

    def to_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv_text())


def train(model: LstmModel, data: DirectionDataset, config: TrainConfig = TrainConfig(), log=None):
    """Fit a copy of ``model``; returns ``(best_model, report)``.

    An epoch improves only when its validation loss is strictly below the best
    so far. Training stops once ``patience`` consecutive epochs (at least one)
    fail to improve, or at ``max_epochs``; the best epoch's weights are
    returned.
    """
    if len(data.train) == 0 or len(data.validation) == 0:
        raise TrainingError("training and validation partitions must be non-empty")
    rng = np.random.default_rng(config.seed)
    work = model.copy()
    best = work.copy()
    state = AdamState.zeros_like(work.params)
    X, y = data.train.features(), data.train.targets.astype(float)
    n = len(y)
    report = TrainReport()
    bad_epochs = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            masks = None
            if config.dropout_p > 0:
                masks = sample_dropout_masks(work.hidden_sizes, config.dropout_p, rng, batch=len(idx))
            loss, grads = loss_and_grads(work, X[idx], y[idx], masks)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}, batch starting {s}")
            loss_sum += loss * len(idx)
            adam_update(work.params, grads, state, config)

        val = mean_loss(work, data.validation)
        if not math.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        report.train_loss_curve.append(loss_sum / n)
        report.val_loss_curve.append(val)
        report.epochs_run = epoch
        if val < report.best_val_loss:
            report.best_val_loss = val
            report.best_epoch = epoch
            best = work.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
        if log is not None:
            log(epoch, report.train_loss_curve[-1], val)
        if bad_epochs and bad_epochs >= config.patience:
            report.stopped_early = True
            break
    return best, report
