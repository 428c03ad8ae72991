"""Walkthrough of the two pretraining objectives at the plan level.

Both objectives corrupt content embeddings before positions are added and
ask the encoder to undo the damage:

* mixup contrast (emix): each example is convexly mixed with a partner and
  the pooled features must identify which anchor dominates each mixture.
* shuffle detection (shed): a random 15% of positions are cyclically
  deranged and a per-position head must flag the moved ones.

This script exercises the plan samplers, label construction, and the loss
functions directly on small arrays, with no encoder involved.

Run from the repository root:

    python3 demos/objectives_walkthrough.py
"""

import numpy as np

from dapt import (MixPlan, ObjectiveConfig, VirtualLabels, apply_mix,
                  apply_shuffle, emix_loss, sample_mix_plan,
                  sample_shuffle_plan, shed_loss, virtual_labels)

rng = np.random.default_rng(7)

# ----------------------------------------------------------------------
# 1. Mix plans: fixed-point-free partners, lam in [0.5, 1)
# ----------------------------------------------------------------------

plan = sample_mix_plan(6, rng)
print(f"pi  = {plan.pi.tolist()}   (no example is its own partner)")
print(f"lam = {np.round(plan.lam, 3).tolist()}")
assert not (plan.pi == np.arange(6)).any()

# Mixing operates on any (N, ...) array; each row becomes
# lam_i * row_i + (1 - lam_i) * row_pi(i).
values = rng.normal(size=(6, 4))
mixed = apply_mix(values, plan)
i = 0
manual = plan.lam[i] * values[i] + (1 - plan.lam[i]) * values[plan.pi[i]]
assert np.allclose(mixed[i], manual)
print("row 0 of apply_mix matches the convex combination written by hand")

# ----------------------------------------------------------------------
# 2. Virtual labels: literal vs consistent
# ----------------------------------------------------------------------
#
# Literal labels put lam on the diagonal and 1-lam on the partner column.
# Consistent labels credit the mixture that actually contains example i and
# renormalize; the two agree when the permutation is an involution with a
# shared lam and differ otherwise.

small = MixPlan(pi=np.array([1, 2, 0]), lam=np.array([0.9, 0.6, 0.75]))
lit = virtual_labels(small, "literal")
con = virtual_labels(small, "consistent")
print("\nliteral rows:")
print(np.round(lit.v, 3))
print("consistent rows (3-cycle, so the off-diagonal mass moves):")
print(np.round(con.v, 3))
assert np.allclose(lit.v.sum(axis=1), 1.0) and np.allclose(con.v.sum(axis=1), 1.0)

# ----------------------------------------------------------------------
# 3. The lam -> 1 limit is plain contrastive cross-entropy
# ----------------------------------------------------------------------
#
# With lam_i = 1 every mixture IS its anchor, virtual labels become one-hot,
# and emix_loss reduces to softmax cross-entropy of anchors against
# themselves.

n, d, tau = 5, 16, 0.2
feats = rng.normal(size=(n, d))
degenerate = MixPlan(pi=np.roll(np.arange(n), 1), lam=np.ones(n))
labels = virtual_labels(degenerate, "literal")
loss, _, _ = emix_loss(feats, feats, labels, tau)

unit = feats / np.linalg.norm(feats, axis=1, keepdims=True)
logits = unit @ unit.T / tau
ce = -(logits[np.arange(n), np.arange(n)]
       - np.log(np.exp(logits).sum(axis=1))).mean()
print(f"\nlam=1 emix loss {loss:.6f} vs direct cross-entropy {ce:.6f}")
assert abs(loss - ce) < 1e-6

# ----------------------------------------------------------------------
# 4. Shuffle plans: 15% of positions, one k-cycle
# ----------------------------------------------------------------------

cfg = ObjectiveConfig()
plan = sample_shuffle_plan(64, cfg, rng)
print(f"\nL=64 at rate {cfg.shuffle_rate}: k = {plan.k} positions move")
print(f"selected = {plan.selected.tolist()}")

# The moved positions form a single k-cycle, so applying the shuffle k times
# walks every displaced row around the cycle and back home.
values = rng.normal(size=(64, 8))
out = values
for _ in range(plan.k):
    out = apply_shuffle(out, plan)
assert np.array_equal(out, values)
print(f"applying the shuffle {plan.k} times restores the sequence exactly")

# labels mark exactly the moved positions; that is what the detection head
# is trained against.
assert plan.labels.sum() == plan.k
assert np.array_equal(np.flatnonzero(plan.labels), plan.selected)

# ----------------------------------------------------------------------
# 5. Detection loss and the marginal floor
# ----------------------------------------------------------------------
#
# A head that ignores the input entirely can still predict the base rate
# k/L everywhere; binary cross-entropy then equals the label entropy. Any
# detector that actually reads the sequence must dip below this floor, which
# makes it a useful reference point when reading training curves.

L, k = 64, plan.k
p = k / L
mask = np.ones(L, dtype=bool)
base_logit = np.log(p / (1 - p))
floor, _ = shed_loss(np.full(L, base_logit), plan.labels, mask)
entropy = -(p * np.log(p) + (1 - p) * np.log(1 - p))
print(f"\nbase-rate prediction: loss {floor:.6f} = label entropy {entropy:.6f}")

oracle_logits = np.where(plan.labels == 1, 8.0, -8.0)
sharp, _ = shed_loss(oracle_logits, plan.labels, mask)
print(f"a perfect detector instead reaches {sharp:.6f}")
