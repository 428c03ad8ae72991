"""The two domain-agnostic pretraining objectives.

Both operate purely on embedding sequences, never on raw inputs:

* Embedding mixup contrast: each example is mixed with a partner drawn by a
  fixed-point-free permutation, and a contrastive head must assign each clean
  example to its mixtures in proportion to the mixing coefficients.
* Shuffle detection: a small set of positions is cyclically deranged at the
  content-embedding level and a per-position binary head must spot them.

Loss functions return the scalar plus analytic gradients for every input
branch; they are pure given (features, plan, config).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .nn import log_softmax


@dataclass(frozen=True)
class ObjectiveConfig:
    temperature: float = 0.2
    shuffle_rate: float = 0.15
    label_mode: str = "literal"

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if not 0.0 < self.shuffle_rate < 1.0:
            raise ValueError("shuffle_rate must lie in (0, 1)")
        if self.label_mode not in ("literal", "consistent"):
            raise ValueError("label_mode must be 'literal' or 'consistent'")


@dataclass(frozen=True)
class MixPlan:
    """Permutation pi (no fixed points) and per-example coefficients lam."""

    pi: np.ndarray    # (N,) int, bijection without fixed points
    lam: np.ndarray   # (N,) float in [0.5, 1]

    @property
    def n(self) -> int:
        return self.pi.shape[0]


@dataclass(frozen=True)
class VirtualLabels:
    """Row-stochastic target matrix for the mixup contrast."""

    v: np.ndarray     # (N, N)


@dataclass(frozen=True)
class ShufflePlan:
    """Cyclic derangement over k selected positions plus per-position labels.

    selected is sorted ascending; the cycle itself runs over the positions in
    their sampled order (recorded in `order`), so mapping[dst] = src means
    new[dst] <- old[src]. labels has length L with ones exactly on selected.
    """

    selected: np.ndarray          # (k,) int, strictly increasing
    order: np.ndarray             # (k,) int, cycle order as sampled
    mapping: dict[int, int]       # dst -> src over selected
    labels: np.ndarray            # (L,) int8

    @property
    def k(self) -> int:
        return self.selected.shape[0]


def sample_mix_plan(n: int, rng: np.random.Generator) -> MixPlan:
    """Uniform fixed-point-free permutation plus lam_i ~ Uniform(0.5, 1).

    Rejection sampling over permutations is exact and accepts with
    probability about 1/e, so the expected number of draws is under 3.
    """
    if n < 2:
        raise ValueError("mix plan needs n >= 2")
    while True:
        pi = rng.permutation(n)
        if not (pi == np.arange(n)).any():
            break
    lam = rng.uniform(0.5, 1.0, size=n)
    return MixPlan(pi=pi, lam=lam)


def apply_mix(values: np.ndarray, plan: MixPlan) -> np.ndarray:
    """Convex mix of each row with its partner: lam_i * e_i + (1 - lam_i) * e_pi(i).

    Works on (N, L, d) embedding values or any (N, ...) array; the input is
    not modified.
    """
    if values.shape[0] != plan.n:
        raise ValueError(f"batch size {values.shape[0]} does not match plan size {plan.n}")
    lam = plan.lam.astype(values.dtype).reshape((plan.n,) + (1,) * (values.ndim - 1))
    return lam * values + (1.0 - lam) * values[plan.pi]


def apply_mix_backward(dmixed: np.ndarray, plan: MixPlan) -> np.ndarray:
    """Gradient of apply_mix: route each mixed row's grad to both sources."""
    lam = plan.lam.astype(dmixed.dtype).reshape((plan.n,) + (1,) * (dmixed.ndim - 1))
    dvalues = lam * dmixed
    np.add.at(dvalues, plan.pi, (1.0 - lam) * dmixed)
    return dvalues


def virtual_labels(plan: MixPlan, mode: str = "literal") -> VirtualLabels:
    """Target rows for the mixup contrast.

    literal: row i puts lam_i on column i and 1 - lam_i on column pi(i).
    consistent: the off-diagonal mass sits at column pi^-1(i) with weight
    1 - lam_{pi^-1(i)}, crediting the mixture that actually contains example
    i; rows are then normalized to sum to one. For involutions with a shared
    lam the two modes coincide exactly (the normalization is a no-op there).
    """
    n = plan.n
    v = np.zeros((n, n), dtype=np.float64)
    idx = np.arange(n)
    if mode == "literal":
        v[idx, idx] = plan.lam
        v[idx, plan.pi] = 1.0 - plan.lam
    elif mode == "consistent":
        inv = np.empty(n, dtype=np.int64)
        inv[plan.pi] = idx
        v[idx, idx] = plan.lam
        v[idx, inv] = 1.0 - plan.lam[inv]
        v /= v.sum(axis=1, keepdims=True)
    else:
        raise ValueError("mode must be 'literal' or 'consistent'")
    return VirtualLabels(v=v)


def emix_loss(anchor_feats: np.ndarray, mixed_feats: np.ndarray, labels: VirtualLabels,
              temperature: float = 0.2):
    """Softmax cross-entropy over cosine similarities against virtual labels.

    logits[i, n] = cos(anchor_i, mixed_n) / temperature; the loss is the mean
    over anchors of the cross-entropy against labels.v. Returns
    (loss, d_anchor, d_mixed); both branches receive gradients.
    """
    a, m = anchor_feats, mixed_feats
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nm = np.linalg.norm(m, axis=1, keepdims=True)
    if (na == 0).any() or (nm == 0).any():
        raise ValueError("emix_loss: zero-norm feature row")
    ahat = a / na
    mhat = m / nm
    logits = (ahat @ mhat.T) / a.dtype.type(temperature)
    if not np.isfinite(logits).all():
        raise FloatingPointError("emix_loss: non-finite logits")
    v = labels.v.astype(a.dtype)
    n = a.shape[0]
    logp = log_softmax(logits)
    loss = float(-(v * logp).sum() / n)

    p = np.exp(logp)
    dlogits = (p - v) / a.dtype.type(n)
    ds = dlogits / a.dtype.type(temperature)
    dahat = ds @ mhat
    dmhat = ds.T @ ahat
    da = (dahat - (dahat * ahat).sum(axis=1, keepdims=True) * ahat) / na
    dm = (dmhat - (dmhat * mhat).sum(axis=1, keepdims=True) * mhat) / nm
    return loss, da, dm


def sample_shuffle_plan(l_valid: int, cfg: ObjectiveConfig, rng: np.random.Generator, *,
                        valid_indices: np.ndarray | None = None,
                        total_length: int | None = None) -> ShufflePlan:
    """Choose k = max(2, round(rate * l_valid)) valid positions and derange them.

    The derangement is the cyclic successor map over the selected positions
    in their sampled order. valid_indices (default arange(l_valid)) gives the
    candidate pool; total_length (default l_valid) sizes the label vector.
    """
    if l_valid < 2:
        raise ValueError("shuffle plan needs at least 2 valid positions")
    if valid_indices is None:
        valid_indices = np.arange(l_valid)
    elif len(valid_indices) != l_valid:
        raise ValueError("valid_indices length disagrees with l_valid")
    total = l_valid if total_length is None else total_length
    k = max(2, round(cfg.shuffle_rate * l_valid))
    k = min(k, l_valid)
    order = rng.choice(valid_indices, size=k, replace=False)
    mapping = {int(order[i]): int(order[(i + 1) % k]) for i in range(k)}
    labels = np.zeros(total, dtype=np.int8)
    labels[order] = 1
    return ShufflePlan(selected=np.sort(order), order=order, mapping=mapping, labels=labels)


def apply_shuffle(values: np.ndarray, plan: ShufflePlan,
                  mask: np.ndarray | None = None) -> np.ndarray:
    """Move content embeddings per the plan: new[dst] = old[mapping[dst]].

    values is one example's (L, d) content (before position addition).
    Unselected positions are untouched. The input is not modified.
    """
    L = values.shape[0]
    dst = np.fromiter(plan.mapping.keys(), dtype=np.int64, count=plan.k)
    src = np.fromiter(plan.mapping.values(), dtype=np.int64, count=plan.k)
    if dst.max() >= L or src.max() >= L:
        raise IndexError("shuffle plan index out of range")
    if mask is not None and not (mask[dst].all() and mask[src].all()):
        raise IndexError("shuffle plan touches a masked position")
    out = values.copy()
    out[dst] = values[src]
    return out


def apply_shuffle_backward(dshuffled: np.ndarray, plan: ShufflePlan) -> np.ndarray:
    """Route gradients back through the content moves."""
    dst = np.fromiter(plan.mapping.keys(), dtype=np.int64, count=plan.k)
    src = np.fromiter(plan.mapping.values(), dtype=np.int64, count=plan.k)
    dvalues = dshuffled.copy()
    dvalues[dst] = 0.0
    np.add.at(dvalues, src, dshuffled[dst])
    return dvalues


def shed_loss(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray):
    """Mean binary cross-entropy over valid positions, unweighted.

    logits, labels, mask are (B, L); labels must be 0/1; masked positions are
    excluded from the mean. Returns (loss, d_logits).
    """
    if logits.shape != labels.shape or logits.shape != mask.shape:
        raise ValueError("logits, labels, mask shapes must agree")
    lab = np.asarray(labels)
    if not np.isin(lab, (0, 1)).all():
        raise ValueError("shed_loss labels must be binary")
    m = mask.astype(bool)
    n_valid = int(m.sum())
    if n_valid == 0:
        raise ValueError("shed_loss: no valid positions")
    x = logits
    y = lab.astype(x.dtype)
    # Stable BCE-with-logits: max(x, 0) - x*y + log1p(exp(-|x|)).
    per = np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))
    loss = float(per[m].sum() / n_valid)
    sig = expit(x)
    dlogits = (sig - y) * m.astype(x.dtype) / x.dtype.type(n_valid)
    return loss, dlogits
