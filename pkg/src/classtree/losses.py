"""Tree-supervision losses over a linear head, with analytic gradients.

Both losses re-derive inner-node scores from the current weight matrix on
every call (a node's score is the mean of its subtree's leaf logits), so the
gradient flows through the inner-node averaging.

Per-sample, with q(i) the predicted child distribution at inner node i and
c(i) the child containing the label:
  soft loss = -log(path probability of label) = sum over on-path i of -log q_c(i)
  hard loss = the same per-node cross entropies averaged over the label path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .hierarchy import Hierarchy
from .inference import LOG_FLOOR, FeatureBatch

LOSS_MODES = ("soft", "hard", "none")

# Default end-of-schedule tree-loss weights. The hard variant is weighted
# 10x its soft counterpart.
DEFAULT_OMEGA_END_SOFT = 0.5
HARD_OVER_SOFT_WEIGHT = 10.0


@dataclass
class LossConfig:
    """Loss mode plus the linear schedules for the term weights.

    omega (tree term) ramps omega_start -> omega_end over `horizon` epochs;
    beta (original cross entropy) decays beta_start -> beta_end.
    """

    mode: str = "soft"
    omega_start: float = 0.0
    omega_end: float = DEFAULT_OMEGA_END_SOFT
    beta_start: float = 1.0
    beta_end: float = 0.0
    horizon: int = 1

    def __post_init__(self):
        if self.mode not in LOSS_MODES:
            raise InvalidConfigError(f"loss mode must be one of {LOSS_MODES}, got {self.mode!r}")
        if self.omega_start < 0 or self.omega_end < 0:
            raise InvalidConfigError("omega endpoints must be >= 0")
        for b in (self.beta_start, self.beta_end):
            if not 0.0 <= b <= 1.0:
                raise InvalidConfigError("beta endpoints must lie in [0, 1]")
        if self.horizon < 1:
            raise InvalidConfigError("horizon must be >= 1 epoch")

    @classmethod
    def for_mode(cls, mode: str, horizon: int) -> "LossConfig":
        """Defaults per mode; hard mode weights its tree term 10x the soft one."""
        if mode == "hard":
            return cls(mode=mode, omega_end=DEFAULT_OMEGA_END_SOFT * HARD_OVER_SOFT_WEIGHT,
                       horizon=horizon)
        if mode == "none":
            return cls(mode=mode, omega_start=0.0, omega_end=0.0, horizon=horizon)
        return cls(mode=mode, horizon=horizon)


@dataclass
class LossValue:
    total: float
    original_term: float
    tree_term: float
    gradient: np.ndarray | None = None


def schedule_weights(t: int, cfg: LossConfig) -> tuple[float, float]:
    """Linear interpolation of (beta_t, omega_t) at epoch t; t > horizon clamps."""
    if t < 0:
        raise InvalidInputError(f"epoch must be >= 0, got {t}")
    frac = min(float(t), float(cfg.horizon)) / float(cfg.horizon)
    beta = cfg.beta_start + (cfg.beta_end - cfg.beta_start) * frac
    omega = cfg.omega_start + (cfg.omega_end - cfg.omega_start) * frac
    return beta, omega


class TreeIndex:
    """Precomputed structure tables for vectorized loss and batch evaluation."""

    def __init__(self, tree: Hierarchy):
        self.tree = tree
        self.num_classes = tree.num_classes
        k = self.num_classes
        self.inner_ids = tuple(sorted(tree.inner_ids()))
        # Per inner node: child leaf sets, and for each class the child slot
        # whose subtree contains it (-1 when the class is outside the node).
        self.children: dict[int, tuple[int, ...]] = {}
        self.child_leaf_sets: dict[int, list[np.ndarray]] = {}
        self.class_slot: dict[int, np.ndarray] = {}
        path_len = np.zeros(k, dtype=np.int64)
        for nid in self.inner_ids:
            node = tree.node(nid)
            self.children[nid] = node.children
            leaf_sets = [np.array(tree.leaf_classes(c), dtype=np.intp) for c in node.children]
            self.child_leaf_sets[nid] = leaf_sets
            slots = np.full(k, -1, dtype=np.int64)
            for j, leaves in enumerate(leaf_sets):
                slots[leaves] = j
            self.class_slot[nid] = slots
            path_len[slots >= 0] += 1
        self.path_len = path_len

    def node_scores(self, logits: np.ndarray, node_ids) -> dict[int, np.ndarray]:
        """Mean of subtree leaf logits for each requested node, per sample."""
        out = {}
        for nid in node_ids:
            leaves = self.tree.leaf_classes(nid)
            out[nid] = logits[:, list(leaves)].mean(axis=1)
        return out

    def soft_class_log_probs(self, logits: np.ndarray) -> np.ndarray:
        """(M, K) log path probabilities computed from raw logits."""
        m = logits.shape[0]
        acc = np.zeros((m, self.num_classes))
        for nid in self.inner_ids:
            logq = self._log_child_probs(logits, nid)
            for j, leaves in enumerate(self.child_leaf_sets[nid]):
                acc[:, leaves] += logq[:, j][:, None]
        return acc

    def hard_predictions(self, logits: np.ndarray) -> np.ndarray:
        """Greedy-descent class predictions for every row of `logits`."""
        m = logits.shape[0]
        current = np.full(m, self.tree.root_id, dtype=np.int64)
        leaf_class = {n.id: n.class_index for n in self.tree.nodes if n.is_leaf}
        scores = self.node_scores(logits, [n.id for n in self.tree.nodes])
        pending = True
        while pending:
            pending = False
            for nid in self.inner_ids:
                mask = current == nid
                if not np.any(mask):
                    continue
                pending = True
                children = self.children[nid]
                stacked = np.stack([scores[c][mask] for c in children], axis=1)
                pick = np.argmax(stacked, axis=1)
                current[mask] = np.asarray(children, dtype=np.int64)[pick]
        return np.array([leaf_class[c] for c in current], dtype=np.int64)

    def _log_child_probs(self, logits: np.ndarray, nid: int) -> np.ndarray:
        cols = [logits[:, leaves].mean(axis=1) for leaves in self.child_leaf_sets[nid]]
        s = np.stack(cols, axis=1)
        s = s - s.max(axis=1, keepdims=True)
        logq = s - np.log(np.exp(s).sum(axis=1, keepdims=True))
        return np.maximum(logq, LOG_FLOOR)


def _as_matrix(batch) -> np.ndarray:
    if isinstance(batch, FeatureBatch):
        return batch.samples
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise InvalidInputError("batch must be a non-empty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("batch contains non-finite values")
    return arr


def _as_rows(weights) -> np.ndarray:
    rows = getattr(weights, "rows", weights)
    return np.asarray(rows, dtype=np.float64)


def _check_labels(labels, k: int, m: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != m:
        raise InvalidInputError(f"{labels.shape[0]} labels for {m} samples")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise InvalidInputError(f"labels must lie in [0, {k}), got range "
                                f"[{labels.min()}, {labels.max()}]")
    return labels


def _tree_loss(tree, weights, batch, labels, per_path_average: bool,
               with_gradient: bool):
    w = _as_rows(weights)
    x = _as_matrix(batch)
    index = tree if isinstance(tree, TreeIndex) else TreeIndex(tree)
    k = index.num_classes
    if w.shape[0] != k:
        raise InvalidInputError(f"weights have {w.shape[0]} rows for {k} classes")
    if x.shape[1] != w.shape[1]:
        raise InvalidInputError(f"feature dim {x.shape[1]} != weight dim {w.shape[1]}")
    m = x.shape[0]
    y = _check_labels(labels, k, m)

    logits = x @ w.T
    per_sample = np.zeros(m)
    coeff = np.zeros((m, k)) if with_gradient else None
    # Per-sample scale: 1 for the soft loss, 1/path-length for the hard loss.
    scale = (1.0 / index.path_len[y]) if per_path_average else np.ones(m)
    for nid in index.inner_ids:
        slots = index.class_slot[nid][y]
        mask = slots >= 0
        if not np.any(mask):
            continue
        logq = index._log_child_probs(logits, nid)
        rows = np.flatnonzero(mask)
        per_sample[rows] -= scale[rows] * logq[rows, slots[rows]]
        if with_gradient:
            g = np.exp(logq[rows])
            g[np.arange(len(rows)), slots[rows]] -= 1.0
            g *= scale[rows][:, None]
            for j, leaves in enumerate(index.child_leaf_sets[nid]):
                # Leaf sets of distinct children are disjoint, so plain fancy
                # indexing accumulates without collisions.
                coeff[rows[:, None], leaves[None, :]] += (g[:, j] / len(leaves))[:, None]
    loss = float(per_sample.mean())
    grad = (coeff.T @ x) / m if with_gradient else None
    return loss, grad


def soft_tree_loss(tree, weights, batch, labels, with_gradient: bool = True) -> LossValue:
    """Cross entropy between the path-probability class distribution and the
    labels, averaged over the batch. Gradient is with respect to the weight
    rows and includes the inner-node averaging."""
    loss, grad = _tree_loss(tree, weights, batch, labels,
                            per_path_average=False, with_gradient=with_gradient)
    return LossValue(total=loss, original_term=0.0, tree_term=loss, gradient=grad)


def hard_tree_loss(tree, weights, batch, labels, with_gradient: bool = True) -> LossValue:
    """Per-node child cross entropies along each label's root path, averaged
    over that path's nodes (off-path nodes contribute nothing), then over the
    batch."""
    loss, grad = _tree_loss(tree, weights, batch, labels,
                            per_path_average=True, with_gradient=with_gradient)
    return LossValue(total=loss, original_term=0.0, tree_term=loss, gradient=grad)


def _original_loss(w, x, y, with_gradient: bool):
    logits = x @ w.T
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = np.maximum(logp, LOG_FLOOR)
    m = x.shape[0]
    loss = float(-logp[np.arange(m), y].mean())
    grad = None
    if with_gradient:
        p = np.exp(logp)
        p[np.arange(m), y] -= 1.0
        grad = (p.T @ x) / m
    return loss, grad


def combined_loss(tree, weights, batch, labels, t: int, cfg: LossConfig,
                  with_gradient: bool = True) -> LossValue:
    """beta_t * (plain softmax cross entropy) + omega_t * (tree term).

    With mode "none" (or no tree), the tree term is zero and `tree` may be
    None. The reported terms are unweighted; `total` applies the schedule.
    """
    w = _as_rows(weights)
    x = _as_matrix(batch)
    y = _check_labels(labels, w.shape[0], x.shape[0])
    beta, omega = schedule_weights(t, cfg)
    orig, orig_grad = _original_loss(w, x, y, with_gradient)
    if cfg.mode == "none" or tree is None:
        tree_term, tree_grad = 0.0, None
    else:
        tree_term, tree_grad = _tree_loss(tree, w, x, y,
                                          per_path_average=(cfg.mode == "hard"),
                                          with_gradient=with_gradient)
    total = beta * orig + omega * tree_term
    grad = None
    if with_gradient:
        grad = beta * orig_grad
        if tree_grad is not None:
            grad = grad + omega * tree_grad
    return LossValue(total=float(total), original_term=orig, tree_term=tree_term,
                     gradient=grad)
