"""Finite-difference audit of the hand-written backward pass.

Every gradient in the package is derived by hand, so the only trustworthy
referee is the definition of the derivative itself. This script builds a
reduced float64 encoder over a token embedder, pushes a scalar loss through
the full pooled forward pass, and compares the analytic parameter gradients
against central finite differences at randomly sampled coordinates.

Run from the repository root (about half a minute):

    python3 demos/gradient_check.py
"""

import numpy as np

from dapt import DomainModel, EncoderConfig
from dapt.nn import finite_difference, max_relative_error
from dapt.specs import DatasetSpec

# A small spec keeps the audit fast; the backward code paths are identical
# at every size. float64 keeps the difference quotient meaningful.
spec = DatasetSpec(name="audit_tokens", modality="tokens", input_dims=(8,),
                   patch_dims=None, sequence_length=8, batch_size=4,
                   num_train=64, num_val=16, vocab_size=32, synthetic=True)
cfg = EncoderConfig(layers=2, d_model=16, heads=2, ffn_dim=32,
                    proj_dim=8, dropout=0.0, dtype="float64")
model = DomainModel(spec, cfg)
params = model.init_params(seed=0)

rng = np.random.default_rng(1)
batch = {
    "tokens": rng.integers(0, spec.vocab_size, size=(4, 8)),
    "token_mask": np.ones((4, 8), dtype=bool),
}
batch["token_mask"][3, 6:] = False          # exercise the padding path
readout = rng.normal(size=(4, cfg.proj_dim))


def loss_value() -> float:
    pooled, _ = model.forward_pooled(params, batch, train=False)
    return float((pooled * readout).sum())


# Analytic gradients via the model's backward pass.
pooled, caches = model.forward_pooled(params, batch, train=False)
analytic = model.backward_pooled(params, caches, readout.astype(pooled.dtype))

# Finite differences at 6 random coordinates per tensor.
fd = finite_difference(loss_value, params, step=1e-5,
                       coords_per_tensor=6, rng=np.random.default_rng(2))

print(f"{len(params)} parameter tensors, "
      f"{sum(p.size for p in params.values())} coordinates total\n")

worst = []
for name, (idx, vals) in sorted(fd.items()):
    a = analytic.get(name)
    a = a.reshape(-1)[idx] if a is not None else np.zeros(len(idx))
    denom = np.maximum(np.maximum(np.abs(a), np.abs(vals)), 1e-6)
    err = float(np.max(np.abs(a - vals) / denom))
    worst.append((err, name))
worst.sort(reverse=True)
for err, name in worst[:8]:
    print(f"{err:10.3e}  {name}")

overall = max_relative_error(analytic, fd)
print(f"\nmax relative error across every audited coordinate: {overall:.3e}")
assert overall < 1e-6, "analytic and finite-difference gradients disagree"
print("analytic backward pass agrees with finite differences")
