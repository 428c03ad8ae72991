"""Self-supervised pretraining loop.

Ties datasets -> embedding -> encoder -> objective with AdamW and
checkpointing. Both objectives run two stages around the shared encoder:

* emix: embed content, mix rows per a sampled plan, run the clean and the
  mixed batch through the encoder in train mode with independent dropout
  draws, and apply the contrastive loss on the two pooled feature sets.
  Gradients flow through both branches. Mixed rows keep the anchor row's
  validity mask.
* shed: embed content, cyclically derange a sampled subset of each row's
  valid positions before position addition, and train the per-position
  detection head with binary cross-entropy over valid positions.

Every random draw comes from a stream keyed by (seed, tag, step), so a
checkpoint at step s resumes bitwise: the remaining steps draw exactly what
an uninterrupted run would have drawn.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import encoder as enc
from . import objectives as obj
from . import rng as rngmod
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .model import DomainModel
from .nn import accumulate
from .optim import AdamW, AdamWConfig
from .specs import load_spec

OBJECTIVES = ("emix", "shed", "none")


@dataclass(frozen=True)
class PretrainConfig:
    spec_name: str
    objective: str
    steps: int = 1000
    seed: int = 0
    batch_size: int | None = None          # None: the spec's batch size
    optimizer: AdamWConfig = field(default_factory=AdamWConfig)
    temperature: float = 0.2
    shuffle_rate: float = 0.15
    label_mode: str = "literal"
    encoder: enc.EncoderConfig = field(default_factory=enc.EncoderConfig)
    log_every: int = 50
    grad_clip: float | None = None
    checkpoint_path: str | None = None
    loss_log_path: str | None = None
    deterministic: bool = True             # single-threaded mode; always honored

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"Unknown objective '{self.objective}'. Valid: {OBJECTIVES}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def objective_config(self) -> obj.ObjectiveConfig:
        return obj.ObjectiveConfig(temperature=self.temperature,
                                   shuffle_rate=self.shuffle_rate,
                                   label_mode=self.label_mode)

    def echo(self) -> dict:
        """JSON-safe snapshot stored in checkpoints and manifests."""
        d = asdict(self)
        d.pop("checkpoint_path")
        d.pop("loss_log_path")
        return _jsonify(d)


def _jsonify(x):
    if isinstance(x, dict):
        return {k: _jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


# ---------------------------------------------------------------------------
# Objective steps (loss + full parameter gradients)
# ---------------------------------------------------------------------------

def emix_forward_backward(model: DomainModel, params: dict, batch: dict,
                          ocfg: obj.ObjectiveConfig, plan: obj.MixPlan, *,
                          train: bool = True,
                          rng_anchor: np.random.Generator | None = None,
                          rng_mixed: np.random.Generator | None = None):
    """One mixup-contrast pass; returns (loss, grads)."""
    content, c_embed = model.embed_content(params, batch)
    mixed_values = obj.apply_mix(content.values, plan)
    mixed_content = replace(content, values=mixed_values)

    seq_a, c_pos_a = model.add_positions(params, content)
    out_a, c_enc_a = enc.encode(params, model.cfg, seq_a, train=train, rng=rng_anchor)
    feats_a, c_pool_a = enc.pool_project(params, out_a)

    seq_m, c_pos_m = model.add_positions(params, mixed_content)
    out_m, c_enc_m = enc.encode(params, model.cfg, seq_m, train=train, rng=rng_mixed)
    feats_m, c_pool_m = enc.pool_project(params, out_m)

    labels = obj.virtual_labels(plan, ocfg.label_mode)
    loss, dfa, dfm = obj.emix_loss(feats_a, feats_m, labels, ocfg.temperature)

    dstates_a, grads = enc.pool_project_backward(dfa, c_pool_a)
    dvalues_a, g = enc.encode_backward(c_enc_a, dstates_a, model.cfg)
    accumulate(grads, g)
    dcontent_a, g = model.add_positions_backward(c_pos_a, dvalues_a)
    accumulate(grads, g)

    dstates_m, g = enc.pool_project_backward(dfm, c_pool_m)
    accumulate(grads, g)
    dvalues_m, g = enc.encode_backward(c_enc_m, dstates_m, model.cfg)
    accumulate(grads, g)
    dmixed, g = model.add_positions_backward(c_pos_m, dvalues_m)
    accumulate(grads, g)
    dcontent_m = obj.apply_mix_backward(dmixed, plan)

    dcontent = dcontent_a + dcontent_m
    accumulate(grads, model.embed_content_backward(params, c_embed, dcontent))
    return loss, grads


def sample_shed_plans(mask: np.ndarray, ocfg: obj.ObjectiveConfig,
                      rng: np.random.Generator):
    """Per-example shuffle plans over valid positions; returns (plans, labels)."""
    b, l = mask.shape
    plans = []
    labels = np.zeros((b, l), dtype=np.int8)
    for i in range(b):
        valid = np.flatnonzero(mask[i])
        plan = obj.sample_shuffle_plan(len(valid), ocfg, rng,
                                       valid_indices=valid, total_length=l)
        plans.append(plan)
        labels[i] = plan.labels
    return plans, labels


def shed_forward_backward(model: DomainModel, params: dict, batch: dict,
                          ocfg: obj.ObjectiveConfig, plans: list, labels: np.ndarray, *,
                          train: bool = True,
                          rng_dropout: np.random.Generator | None = None):
    """One shuffle-detection pass; returns (loss, grads)."""
    content, c_embed = model.embed_content(params, batch)
    shuffled = np.empty_like(content.values)
    for i, plan in enumerate(plans):
        shuffled[i] = obj.apply_shuffle(content.values[i], plan, mask=content.mask[i])
    seq, c_pos = model.add_positions(params, replace(content, values=shuffled))
    out, c_enc = enc.encode(params, model.cfg, seq, train=train, rng=rng_dropout)
    logits, c_head = enc.per_position_logits(params, out)

    loss, dlogits = obj.shed_loss(logits, labels, content.mask)

    dstates, grads = enc.per_position_logits_backward(dlogits, c_head)
    dvalues, g = enc.encode_backward(c_enc, dstates, model.cfg)
    accumulate(grads, g)
    dshuffled, g = model.add_positions_backward(c_pos, dvalues)
    accumulate(grads, g)
    dcontent = np.empty_like(dshuffled)
    for i, plan in enumerate(plans):
        dcontent[i] = obj.apply_shuffle_backward(dshuffled[i], plan)
    accumulate(grads, model.embed_content_backward(params, c_embed, dcontent))
    return loss, grads


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most max_norm."""
    total = 0.0
    for g in grads.values():
        total += float((g.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= g.dtype.type(scale)
    return norm


def pretrain_step(model: DomainModel, params: dict, opt: AdamW, batch: dict,
                  cfg: PretrainConfig, step: int) -> float:
    """One forward/backward/update; returns the loss. Mutates params and opt."""
    ocfg = cfg.objective_config
    if cfg.objective == "emix":
        n = next(iter(batch.values())).shape[0]
        if n < 2:
            raise ValueError("emix needs batch size >= 2")
        plan = obj.sample_mix_plan(n, rngmod.stream(cfg.seed, rngmod.PLAN, step))
        loss, grads = emix_forward_backward(
            model, params, batch, ocfg, plan, train=True,
            rng_anchor=rngmod.stream(cfg.seed, rngmod.DROPOUT, step, 0),
            rng_mixed=rngmod.stream(cfg.seed, rngmod.DROPOUT, step, 1))
    elif cfg.objective == "shed":
        mask = _batch_mask(model, batch)
        plans, labels = sample_shed_plans(mask, ocfg,
                                          rngmod.stream(cfg.seed, rngmod.PLAN, step))
        loss, grads = shed_forward_backward(
            model, params, batch, ocfg, plans, labels, train=True,
            rng_dropout=rngmod.stream(cfg.seed, rngmod.DROPOUT, step, 0))
    else:
        raise ValueError(f"pretrain_step does not train objective '{cfg.objective}'")
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss {loss!r} at step {step} (objective {cfg.objective})")
    if cfg.grad_clip is not None:
        clip_gradients(grads, cfg.grad_clip)
    opt.step(params, grads)
    return loss


def _batch_mask(model: DomainModel, batch: dict) -> np.ndarray:
    """Validity mask of the concatenated sequence without running embedders."""
    spec = model.spec
    if spec.modality == "tokens":
        ids = np.asarray(batch["tokens"])
        return np.asarray(batch.get("token_mask", np.ones(ids.shape, dtype=bool))).astype(bool)
    if spec.modality == "image_text_pair":
        ids = np.asarray(batch["tokens"])
        tmask = np.asarray(batch.get("token_mask", np.ones(ids.shape, dtype=bool))).astype(bool)
        img_len = spec.sequence_length - spec.text_len
        b = ids.shape[0]
        return np.concatenate([np.ones((b, img_len), dtype=bool), tmask], axis=1)
    key = "image" if "image" in batch else "series"
    b = np.asarray(batch[key]).shape[0]
    return np.ones((b, spec.sequence_length), dtype=bool)


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------

def batch_indices(num_examples: int, batch_size: int, seed: int, step: int) -> np.ndarray:
    """Deterministic example indices for one step.

    Examples are reshuffled every epoch from a stream keyed by the epoch
    index alone, so any step's batch is computable without replaying prior
    steps. Trailing examples that do not fill a batch are skipped.
    """
    per_epoch = num_examples // batch_size
    if per_epoch < 1:
        raise ValueError("batch size exceeds dataset size")
    epoch, slot = divmod(step, per_epoch)
    perm = rngmod.stream(seed, rngmod.DATA, epoch).permutation(num_examples)
    return perm[slot * batch_size:(slot + 1) * batch_size]


def run_pretraining(cfg: PretrainConfig, *, dataset=None,
                    resume_from: str | None = None) -> Checkpoint:
    """Train per cfg and return the final checkpoint (written to
    cfg.checkpoint_path when set).

    dataset defaults to the synthetic domain attached to the spec; real-data
    specs require an explicit dataset object exposing `.train.n` and
    `.train.batch(indices) -> payload dict`. Objective "none" skips training
    and checkpoints the untouched initialization, the no-pretraining
    baseline.
    """
    spec = load_spec(cfg.spec_name)
    if dataset is None:
        if not spec.synthetic:
            raise ValueError(
                f"spec '{spec.name}' has no bundled data; pass a dataset object "
                "(real corpora are not shipped with this package)")
        from .synthetic import make_synthetic_domain, synthetic_config_for
        dataset = make_synthetic_domain(synthetic_config_for(spec.name))

    model = DomainModel(spec, cfg.encoder)
    params = model.init_params(cfg.seed)
    echo = cfg.echo()

    if cfg.objective == "none":
        ck = Checkpoint(params=params, step=0, seed=cfg.seed, config=echo)
        if cfg.checkpoint_path:
            save_checkpoint(ck, cfg.checkpoint_path)
        return ck

    opt = AdamW(params, cfg.optimizer)
    start_step = 0
    if resume_from is not None:
        prev = load_checkpoint(resume_from)
        _check_resume_compatible(prev.config, echo)
        for k in params:
            params[k][...] = prev.params[k]
        opt.load_state(prev.opt_m, prev.opt_v, prev.opt_t)
        start_step = prev.step
        if start_step > cfg.steps:
            raise ValueError(
                f"checkpoint at step {start_step} already exceeds the "
                f"requested budget {cfg.steps}; refusing to relabel it")

    batch_size = cfg.batch_size or spec.batch_size
    log_lines: list[str] = []
    for step in range(start_step, cfg.steps):
        idx = batch_indices(dataset.train.n, batch_size, cfg.seed, step)
        batch = dataset.train.batch(idx)
        loss = pretrain_step(model, params, opt, batch, cfg, step)
        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            log_lines.append(f"{step}\t{loss:.6f}\t{time.time():.3f}")

    if cfg.loss_log_path:
        with open(cfg.loss_log_path, "a", encoding="utf-8") as f:
            for line in log_lines:
                f.write(line + "\n")

    m, v, t = opt.state_arrays()
    ck = Checkpoint(params=params, step=cfg.steps, seed=cfg.seed, config=echo,
                    opt_m=m, opt_v=v, opt_t=t)
    if cfg.checkpoint_path:
        save_checkpoint(ck, cfg.checkpoint_path)
    return ck


def _check_resume_compatible(prev_echo: dict, echo: dict) -> None:
    """Resume only within one training trajectory: all fields except the step
    budget must match."""
    a = {k: v for k, v in prev_echo.items() if k != "steps"}
    b = {k: v for k, v in echo.items() if k != "steps"}
    if a != b:
        diff = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
        raise ValueError(f"resume config mismatch on keys: {diff}")
