"""Linear-probe transfer protocol and evaluation metrics.

Transfer never fine-tunes: the encoder is frozen, pooled projections are
extracted once, and a single linear layer is trained on top with Adam
(lr 1e-4, no weight decay, 100 epochs, batch 256). Metrics are reported in
percent: accuracy for multiclass tasks, rank-based AUROC for binary tasks,
Pearson and Spearman correlations (times 100) for regression tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import rng as rngmod
from .model import DomainModel
from .nn import log_softmax
from .optim import adam

TASK_KINDS = ("multiclass", "binary", "regression")


@dataclass(frozen=True)
class ProbeTask:
    """What the probe predicts and how it is scored."""

    name: str
    kind: str
    num_classes: int = 2

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"kind must be one of {TASK_KINDS}, got '{self.kind}'")
        if self.kind == "multiclass" and self.num_classes < 2:
            raise ValueError("multiclass tasks need num_classes >= 2")

    @property
    def output_dim(self) -> int:
        return self.num_classes if self.kind == "multiclass" else 1


@dataclass(frozen=True)
class ProbeConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass
class ProbeResult:
    task: ProbeTask
    weights: np.ndarray
    bias: np.ndarray
    train_losses: list[float] = field(default_factory=list)
    metrics: dict[str, float] = field(default_factory=dict)


# ----------------------------------------------------------------------
# Metrics
# ----------------------------------------------------------------------

def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of exact matches, in percent."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have matching shapes")
    if predictions.size == 0:
        raise ValueError("cannot score an empty set")
    return float((predictions == labels).mean() * 100.0)


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve in percent, computed from average ranks.

    Ties are shared between classes at half weight, which matches the
    pairwise-count definition exactly (average ranks are half-integers, so
    the arithmetic below is exact in float64).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have matching shapes")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be binary (0 or 1)")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    rank_sum = ranks[labels == 1].sum()
    area = (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
    return float(area * 100.0)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Product-moment correlation in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("inputs must have matching shapes")
    if a.size < 2:
        raise ValueError("correlation needs at least 2 points")
    ac = a - a.mean()
    bc = b - b.mean()
    denom = np.sqrt((ac ** 2).sum() * (bc ** 2).sum())
    if denom == 0:
        raise ValueError("correlation undefined for a constant input")
    return float((ac * bc).sum() / denom)


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Rank correlation: Pearson on average ranks, ties shared."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("inputs must have matching shapes")
    return pearson(rankdata(a, method="average"), rankdata(b, method="average"))


# ----------------------------------------------------------------------
# Feature extraction
# ----------------------------------------------------------------------

def extract_features(model: DomainModel, params: dict[str, np.ndarray],
                     split, batch_size: int = 64) -> np.ndarray:
    """Pooled projections for every example of a split, encoder frozen.

    `split` must expose `.n` and `.batch(indices) -> payload dict`.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    chunks = []
    for start in range(0, split.n, batch_size):
        idx = np.arange(start, min(start + batch_size, split.n))
        pooled, _ = model.forward_pooled(params, split.batch(idx), train=False)
        chunks.append(pooled)
    return np.concatenate(chunks, axis=0)


# ----------------------------------------------------------------------
# Probe losses
# ----------------------------------------------------------------------

def _probe_loss_grad(logits: np.ndarray, labels: np.ndarray, kind: str):
    """Mean loss and dloss/dlogits for one probe batch."""
    n = logits.shape[0]
    if kind == "multiclass":
        logp = log_softmax(logits)
        loss = -logp[np.arange(n), labels].mean()
        dlogits = np.exp(logp)
        dlogits[np.arange(n), labels] -= 1.0
        return loss, dlogits / n
    if kind == "binary":
        x = logits[:, 0]
        y = labels.astype(np.float64)
        loss = (np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))).mean()
        dlogits = ((1.0 / (1.0 + np.exp(-x)) - y) / n)[:, None]
        return loss, dlogits
    if kind == "regression":
        x = logits[:, 0]
        y = labels.astype(np.float64)
        diff = x - y
        loss = (diff ** 2).mean()
        return loss, (2.0 * diff / n)[:, None]
    raise ValueError(f"unknown task kind '{kind}'")


def train_linear_probe(features: np.ndarray, labels: np.ndarray,
                       task: ProbeTask,
                       config: ProbeConfig | None = None) -> ProbeResult:
    """Fit the probe from zero init with Adam; returns weights and loss curve."""
    cfg = config or ProbeConfig()
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2:
        raise ValueError("features must be 2-d (examples, dims)")
    if labels.shape[0] != x.shape[0]:
        raise ValueError("labels must align with features")
    if task.kind == "multiclass" and labels.max() >= task.num_classes:
        raise ValueError("label out of range for the task's class count")

    params = {
        "probe.w": np.zeros((x.shape[1], task.output_dim), dtype=np.float64),
        "probe.b": np.zeros(task.output_dim, dtype=np.float64),
    }
    opt = adam(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    result = ProbeResult(task=task, weights=params["probe.w"], bias=params["probe.b"])
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rngmod.stream(cfg.seed, rngmod.PROBE, epoch).permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = x[idx], labels[idx]
            logits = xb @ params["probe.w"] + params["probe.b"]
            loss, dlogits = _probe_loss_grad(logits, yb, task.kind)
            grads = {
                "probe.w": xb.T @ dlogits,
                "probe.b": dlogits.sum(axis=0),
            }
            opt.step(params, grads)
            epoch_loss += loss
            batches += 1
        result.train_losses.append(epoch_loss / batches)
    return result


def evaluate_probe(result: ProbeResult, features: np.ndarray,
                   labels: np.ndarray) -> dict[str, float]:
    """Score the fitted probe; all values in percent."""
    x = np.asarray(features, dtype=np.float64)
    logits = x @ result.weights + result.bias
    task = result.task
    if task.kind == "multiclass":
        metrics = {"accuracy": accuracy(logits.argmax(axis=1), labels)}
    elif task.kind == "binary":
        metrics = {"auroc": auroc(logits[:, 0], labels)}
    else:
        metrics = {
            "pearson": pearson(logits[:, 0], labels) * 100.0,
            "spearman": spearman(logits[:, 0], labels) * 100.0,
        }
    result.metrics = metrics
    return metrics


def linear_probe_transfer(model: DomainModel, params: dict[str, np.ndarray],
                          train_split, val_split, task: ProbeTask,
                          config: ProbeConfig | None = None,
                          batch_size: int = 64) -> ProbeResult:
    """Extract frozen features from both splits, fit the probe, and score it."""
    feats_train = extract_features(model, params, train_split, batch_size)
    feats_val = extract_features(model, params, val_split, batch_size)
    result = train_linear_probe(feats_train, train_split.labels, task, config)
    evaluate_probe(result, feats_val, val_split.labels)
    return result
