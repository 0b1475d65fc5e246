"""Minibatch SGD-with-momentum training on last-frame cross-entropy.

The loss of a minibatch is the SUM of the per-word cross-entropies (not
the mean), so the learn rate interacts with the batch size: doubling the
batch roughly doubles the gradient magnitude.  The defaults (learn rate
0.001, momentum 0.5, batch 64, dropout 0.5) are tuned for that convention.

Training is a pure function of (dataset, config): epoch shuffles come from
a generator keyed by (seed, epoch), per-item dropout masks from a stream
keyed by (seed, epoch, item index), and per-item gradients are reduced in
batch order, so identical seeds give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tape, Tensor, softmax_cross_entropy
from .dataset import Dataset
from .model import Model, clone_model, forward_last_frame, parameters, predict

__all__ = [
    "TrainConfig",
    "DivergenceError",
    "sgd_momentum_step",
    "train",
    "evaluate",
    "save_history",
    "load_history",
]


class DivergenceError(RuntimeError):
    """Raised when the training loss becomes NaN or infinite."""


@dataclass(frozen=True)
class TrainConfig:
    learn_rate: float = 0.001
    momentum: float = 0.5
    batch_size: int = 64
    dropout_p: float = 0.5
    max_epochs: int = 50
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learn_rate <= 0:
            raise ValueError(f"learn_rate must be positive, got {self.learn_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.max_epochs < 0 or self.patience < 0:
            raise ValueError("max_epochs and patience must be nonnegative")


def sgd_momentum_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray,
                      learn_rate: float, momentum: float):
    """One momentum update: v' = mu*v - lr*g, p' = p + v'.  Pure."""
    if param.shape != grad.shape or param.shape != velocity.shape:
        raise ValueError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, "
            f"velocity {velocity.shape}"
        )
    new_velocity = momentum * velocity - learn_rate * grad
    return param + new_velocity, new_velocity


def _item_loss_and_grads(model, item, refs, mode_rng, dropout_p):
    with Tape() as tape:
        logits = forward_last_frame(model, item.audio, item.video,
                                    mode="train", rng=mode_rng,
                                    dropout_p=dropout_p)
        loss = softmax_cross_entropy(logits, item.label)
    tape.backward(loss)
    grads = [tape.grad(ref.value) for ref in refs]
    return loss.item(), grads


def train(model: Model, train_set: Dataset, val_set: Dataset,
          cfg: TrainConfig) -> tuple[Model, list[tuple[float, float]]]:
    """Train in place and return (best model by validation accuracy, history).

    One optimizer step is taken per minibatch, including the final partial
    batch.  After every epoch the validation accuracy is measured and the
    best-so-far parameters are kept; training stops at ``max_epochs`` or
    after ``patience`` epochs without improvement.  History holds one
    (mean train loss per item, validation accuracy) pair per epoch.
    """
    if not train_set.items:
        raise ValueError("training set is empty")
    refs = parameters(model)
    velocities = [np.zeros_like(ref.value.data) for ref in refs]
    history: list[tuple[float, float]] = []
    best_acc = -1.0
    best_model = clone_model(model)
    epochs_since_best = 0
    n = len(train_set.items)

    for epoch in range(cfg.max_epochs):
        order = np.random.default_rng([cfg.seed, 0, epoch]).permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            batch_loss = 0.0
            grad_sums = [np.zeros_like(ref.value.data) for ref in refs]
            for idx in batch:
                item = train_set.items[int(idx)]
                item_rng = np.random.default_rng([cfg.seed, 1, epoch, int(idx)])
                loss, grads = _item_loss_and_grads(model, item, refs,
                                                   item_rng, cfg.dropout_p)
                batch_loss += loss
                for acc, g in zip(grad_sums, grads):
                    acc += g
            if not np.isfinite(batch_loss):
                raise DivergenceError(
                    f"loss became non-finite in epoch {epoch}"
                )
            for ref, vel, g in zip(refs, velocities, grad_sums):
                new_p, new_v = sgd_momentum_step(ref.value.data, g, vel,
                                                 cfg.learn_rate, cfg.momentum)
                ref.assign(Tensor(new_p))
                vel[...] = new_v
            epoch_loss += batch_loss

        val_acc = evaluate(model, val_set)
        history.append((epoch_loss / n, val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_model = clone_model(model)
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > cfg.patience:
                break
    return best_model, history


def evaluate(model: Model, dataset: Dataset) -> float:
    """Fraction of items whose predicted class equals the label."""
    if not dataset.items:
        raise ValueError("evaluation set is empty")
    hits = sum(1 for item in dataset.items
               if predict(model, item.audio, item.video) == item.label)
    return hits / len(dataset.items)


def save_history(path, history) -> None:
    """One line per epoch: epoch index, train loss, validation accuracy."""
    lines = [f"{i} {loss!r} {acc!r}" for i, (loss, acc) in enumerate(history)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_history(path) -> list[tuple[float, float]]:
    out = []
    for line in Path(path).read_text().splitlines():
        _, loss, acc = line.split(" ")
        out.append((float(loss), float(acc)))
    return out
