"""Domain-agnostic self-supervised pretraining on a fixed transformer.

The package keeps one encoder, one optimization recipe, and one transfer
protocol fixed across every data domain; only the thin embedding layer in
front of the encoder knows what a domain's raw inputs look like. Pretraining
offers two input-space objectives, a mixup-based contrastive task and a
shuffled-position detection task, and transfer is always a linear probe on
frozen pooled features.

Layout:

    specs        dataset registry: shapes, patching, sequence lengths
    preprocess   raw-input canonicalization (images, audio, text, sensors)
    tokenizers   whitespace tokenizer plus an adapter for external vocabs
    synthetic    latent-factor toy domains with permutation-coded labels
    embedding    patch / segment / token embedders and position tables
    encoder      the fixed transformer trunk, pooling, and heads
    objectives   mixup-contrast and shuffle-detection losses and plans
    model        embedder + encoder composition per dataset spec
    optim        AdamW with decoupled weight decay
    pretrain     training loop, gradient plumbing, deterministic batching
    transfer     frozen-feature linear probes and metrics
    checkpoint   self-describing single-file parameter container
    workflows    run directories, reports, and the gains experiment
    cli          the `dapt` command
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .encoder import EncoderConfig, encode, init_encoder_params, pool_project
from .model import DomainModel
from .objectives import (MixPlan, ObjectiveConfig, ShufflePlan, VirtualLabels,
                         apply_mix, apply_shuffle, emix_loss, sample_mix_plan,
                         sample_shuffle_plan, shed_loss, virtual_labels)
from .optim import AdamW, AdamWConfig, adam
from .pretrain import PretrainConfig, pretrain_step, run_pretraining
from .specs import (AudioParams, DatasetSpec, all_specs, load_spec,
                    read_registry, registered_names, write_registry)
from .synthetic import (SyntheticDomain, SyntheticDomainConfig,
                        make_synthetic_domain, synthetic_config_for)
from .transfer import (ProbeConfig, ProbeTask, accuracy, auroc,
                       extract_features, linear_probe_transfer, pearson,
                       spearman, train_linear_probe)

__version__ = "0.1.0"

__all__ = [
    "AdamW", "AdamWConfig", "AudioParams", "Checkpoint", "DatasetSpec",
    "DomainModel", "EncoderConfig", "MixPlan", "ObjectiveConfig",
    "PretrainConfig", "ProbeConfig", "ProbeTask", "ShufflePlan",
    "SyntheticDomain", "SyntheticDomainConfig", "VirtualLabels", "accuracy",
    "adam", "all_specs", "apply_mix", "apply_shuffle", "auroc", "emix_loss",
    "encode", "extract_features", "init_encoder_params",
    "linear_probe_transfer", "load_checkpoint", "load_spec",
    "make_synthetic_domain", "pearson", "pool_project", "pretrain_step",
    "read_registry", "registered_names", "run_pretraining",
    "sample_mix_plan", "sample_shuffle_plan", "save_checkpoint", "shed_loss",
    "spearman", "synthetic_config_for", "train_linear_probe",
    "virtual_labels", "write_registry",
]
