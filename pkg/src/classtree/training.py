"""Desk-scale training of a linear classification head with optional tree
supervision and mid-training hierarchy reconstruction.

Plain minibatch SGD with momentum and weight decay on the K x D weight matrix;
nothing else is learned. Fully deterministic for a fixed seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cluster import induce_hierarchy
from .errors import InvalidConfigError, TrainingFailureError
from .hierarchy import ClassWeights, Hierarchy
from .losses import LossConfig, TreeIndex, combined_loss, schedule_weights


@dataclass
class HierarchyUpdate:
    """Re-induce the hierarchy from the current weights every `period` epochs
    while start_epoch <= epoch <= end_epoch."""

    start_epoch: int
    end_epoch: int
    period: int

    def __post_init__(self):
        if self.period < 1:
            raise InvalidConfigError("hierarchy update period must be >= 1")
        if not 0 <= self.start_epoch <= self.end_epoch:
            raise InvalidConfigError("need 0 <= start_epoch <= end_epoch")

    def due(self, epoch: int) -> bool:
        if not self.start_epoch <= epoch <= self.end_epoch:
            return False
        return (epoch - self.start_epoch) % self.period == 0


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_drop_points: tuple[float, ...] = (3.0 / 7.0, 5.0 / 7.0)
    lr_drop_factor: float = 0.1
    seed: int = 0
    hierarchy_update: HierarchyUpdate | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidConfigError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfigError("epochs and batch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise InvalidConfigError("weight_decay must be >= 0")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidConfigError("seed must be a 64-bit unsigned value")
        if self.hierarchy_update is not None and self.hierarchy_update.end_epoch > self.epochs:
            raise InvalidConfigError("hierarchy update window exceeds the epoch count")

    def lr_at(self, epoch: int) -> float:
        """Epoch is 1-based; the rate drops once (epoch-1)/epochs passes each point."""
        lr = self.learning_rate
        for point in self.lr_drop_points:
            if (epoch - 1) >= point * self.epochs:
                lr *= self.lr_drop_factor
        return lr


def _accuracy(pred: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(pred == labels))


def train_linear_head(features, labels, train_cfg: TrainConfig, loss_cfg: LossConfig,
                      initial_tree: Hierarchy | None = None,
                      class_ids=None):
    """Train the weight rows; returns (ClassWeights, final hierarchy or None,
    per-epoch history).

    With a tree-supervision mode and no initial tree, a hierarchy_update
    schedule must be present; the tree term is inactive until the first
    reconstruction. History records, one dict per epoch: epoch, lr, beta,
    omega, loss_total, loss_original, loss_tree, acc_plain, acc_nbdt_soft,
    acc_nbdt_hard (the tree accuracies are None while no tree exists).
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise InvalidConfigError("features and labels are inconsistent")
    k = int(y.max()) + 1
    if sorted(set(y.tolist())) != list(range(k)):
        raise InvalidConfigError("labels must cover classes 0..K-1")
    if class_ids is None:
        class_ids = tuple(str(i) for i in range(k))
    if loss_cfg.mode != "none" and initial_tree is None and train_cfg.hierarchy_update is None:
        raise InvalidConfigError(
            "tree-supervised training needs an initial hierarchy or an update schedule"
        )

    d = x.shape[1]
    m = x.shape[0]
    rng = np.random.default_rng(train_cfg.seed)
    bound = 1.0 / np.sqrt(d)
    w = rng.uniform(-bound, bound, size=(k, d))
    velocity = np.zeros_like(w)

    tree = initial_tree
    index = TreeIndex(tree) if tree is not None else None
    history: list[dict] = []

    for epoch in range(1, train_cfg.epochs + 1):
        update = train_cfg.hierarchy_update
        if update is not None and update.due(epoch):
            tree = induce_hierarchy(ClassWeights(rows=w.copy(), class_ids=class_ids))
            index = TreeIndex(tree)

        lr = train_cfg.lr_at(epoch)
        beta, omega = schedule_weights(epoch, loss_cfg)
        perm = rng.permutation(m)
        sum_total = sum_orig = sum_tree = 0.0
        for start in range(0, m, train_cfg.batch_size):
            idx = perm[start:start + train_cfg.batch_size]
            value = combined_loss(index, w, x[idx], y[idx], epoch, loss_cfg)
            if not np.isfinite(value.total):
                raise TrainingFailureError(
                    f"training diverged at epoch {epoch}: non-finite loss", epoch
                )
            grad = value.gradient + train_cfg.weight_decay * w
            velocity = train_cfg.momentum * velocity + grad
            w = w - lr * velocity
            frac = len(idx) / m
            sum_total += value.total * frac
            sum_orig += value.original_term * frac
            sum_tree += value.tree_term * frac

        logits = x @ w.T
        record = {
            "epoch": epoch,
            "lr": lr,
            "beta": beta,
            "omega": omega,
            "loss_total": sum_total,
            "loss_original": sum_orig,
            "loss_tree": sum_tree,
            "acc_plain": _accuracy(np.argmax(logits, axis=1), y),
            "acc_nbdt_soft": None,
            "acc_nbdt_hard": None,
        }
        if index is not None:
            soft_pred = np.argmax(index.soft_class_log_probs(logits), axis=1)
            record["acc_nbdt_soft"] = _accuracy(soft_pred, y)
            record["acc_nbdt_hard"] = _accuracy(index.hard_predictions(logits), y)
        history.append(record)

    weights = ClassWeights(rows=w, class_ids=class_ids)
    return weights, tree, history


def history_to_jsonl(history) -> str:
    """One JSON record per epoch, newline-terminated."""
    return "".join(json.dumps(rec) + "\n" for rec in history)
