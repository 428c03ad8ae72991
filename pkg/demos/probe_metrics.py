"""Transfer metrics against brute-force references.

Transfer quality is reported as accuracy, AUROC (percent), or rank
correlations depending on the task. Each metric here is recomputed from its
definition so the fast implementations can be checked by eye.

Run from the repository root:

    python3 demos/probe_metrics.py
"""

import numpy as np

from dapt import accuracy, auroc, pearson, spearman

rng = np.random.default_rng(3)

# ----------------------------------------------------------------------
# 1. AUROC is exactly the pairwise win rate
# ----------------------------------------------------------------------
#
# For every (positive, negative) pair the score order is a win, a loss, or
# a tie worth half. The rank-based implementation must match that count
# exactly, ties included.

scores = rng.integers(0, 6, size=200).astype(np.float64)   # heavy ties
labels = (rng.random(200) < 0.4).astype(np.int64)
pos, neg = scores[labels == 1], scores[labels == 0]
wins = (pos[:, None] > neg[None, :]).sum()
ties = (pos[:, None] == neg[None, :]).sum()
pairwise = 100.0 * (wins + 0.5 * ties) / (len(pos) * len(neg))
print(f"auroc {auroc(scores, labels):.10f} vs pairwise count {pairwise:.10f}")
assert abs(auroc(scores, labels) - pairwise) < 1e-10

# The textbook four-point example: scores 1,2,3,4 with labels 0,1,0,1
# has 3 wins and 1 loss out of 4 pairs.
print(f"four-point example: {auroc(np.arange(1.0, 5.0), np.array([0, 1, 0, 1]))}")

# ----------------------------------------------------------------------
# 2. Rank correlations
# ----------------------------------------------------------------------
#
# pearson matches np.corrcoef; spearman is pearson on average ranks, which
# handles ties the standard way.

a = rng.normal(size=100)
b = 0.6 * a + 0.4 * rng.normal(size=100)
print(f"\npearson  {pearson(a, b):+.6f} vs corrcoef {np.corrcoef(a, b)[0, 1]:+.6f}")

ranks = lambda x: np.argsort(np.argsort(x)).astype(np.float64)
print(f"spearman {spearman(a, b):+.6f} vs pearson-on-ranks "
      f"{pearson(ranks(a), ranks(b)):+.6f}   (tie-free case)")

# Monotone transformations leave spearman alone but move pearson.
c = np.exp(3.0 * a)
print(f"exp transform: pearson {pearson(a, c):+.4f}, spearman {spearman(a, c):+.4f}")

# ----------------------------------------------------------------------
# 3. Accuracy
# ----------------------------------------------------------------------

preds = np.array([0, 1, 2, 2, 1])
truth = np.array([0, 1, 1, 2, 1])
print(f"\naccuracy {accuracy(preds, truth):.1f}% on 4 of 5 correct")
