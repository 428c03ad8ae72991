"""Experiment orchestration: configs, run directories, reports, gain suites.

A run directory holds everything one experiment produced:

    config.json     the resolved configuration actually used
    ckpt.dapt       final checkpoint (parameters, optimizer state, config echo)
    loss.tsv        step, loss, wall-clock time per logged step
    reports.jsonl   one JSON object per transfer metric
    report.txt      human-readable rendering of reports.jsonl

The output root is $DAPT_OUTPUT_ROOT, defaulting to ./runs.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import encoder as enc
from . import objectives as obj
from . import rng as rngmod
from .checkpoint import Checkpoint, load_checkpoint
from .model import DomainModel
from .optim import AdamWConfig
from .pretrain import PretrainConfig, _batch_mask, run_pretraining, sample_shed_plans
from .specs import load_spec
from .synthetic import make_synthetic_domain, synthetic_config_for
from .transfer import (ProbeConfig, ProbeTask, auroc, evaluate_probe,
                       extract_features, train_linear_probe)

ENV_OUTPUT_ROOT = "DAPT_OUTPUT_ROOT"
ENV_GAINS_DIR = "DAPT_GAINS_DIR"

CHECKPOINT_FILE = "ckpt.dapt"
LOSS_LOG_FILE = "loss.tsv"
CONFIG_FILE = "config.json"
REPORTS_FILE = "reports.jsonl"
REPORT_TEXT_FILE = "report.txt"
GAINS_FILE = "gains_summary.json"

# The full configuration surface. Flags override file values, file values
# override these defaults; anything else in a config file is an error.
CONFIG_DEFAULTS: dict = {
    "spec": None,
    "objective": "emix",
    "steps": 1000,
    "seed": 0,
    "batch_size": None,
    "lr": 1e-4,
    "weight_decay": 1e-4,
    "temperature": 0.2,
    "shuffle_rate": 0.15,
    "label_mode": "literal",
    "grad_clip": None,
    "log_every": 50,
    "probe_epochs": 100,
    "probe_lr": 1e-4,
    "probe_batch_size": 256,
    "probe_seed": 0,
    "run_name": None,
    "deterministic": True,
}

_INT_KEYS = ("steps", "seed", "batch_size", "log_every",
             "probe_epochs", "probe_batch_size", "probe_seed")
_FLOAT_KEYS = ("lr", "weight_decay", "temperature", "shuffle_rate", "grad_clip",
               "probe_lr")
_STR_KEYS = ("spec", "objective", "label_mode", "run_name")


def parse_config(file_path: str | None = None,
                 overrides: dict | None = None) -> dict:
    """Resolve a run configuration: defaults < config file < overrides.

    Unknown keys and untypeable values raise ValueError. None overrides are
    ignored, so optional CLI flags can be passed through unconditionally.
    """
    cfg = dict(CONFIG_DEFAULTS)
    if file_path is not None:
        with open(file_path, encoding="utf-8") as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        _apply(cfg, loaded, source=file_path)
    if overrides:
        _apply(cfg, {k: v for k, v in overrides.items() if v is not None},
               source="overrides")
    return cfg


def _apply(cfg: dict, updates: dict, source: str) -> None:
    unknown = sorted(set(updates) - set(CONFIG_DEFAULTS))
    if unknown:
        raise ValueError(f"unknown config keys from {source}: {unknown}")
    for k, v in updates.items():
        if v is None:
            cfg[k] = None
            continue
        if k in _INT_KEYS:
            if isinstance(v, bool) or int(v) != v:
                raise ValueError(f"config key '{k}' must be an integer, got {v!r}")
            v = int(v)
        elif k in _FLOAT_KEYS:
            v = float(v)
        elif k in _STR_KEYS:
            if not isinstance(v, str):
                raise ValueError(f"config key '{k}' must be a string, got {v!r}")
        elif k == "deterministic":
            if not isinstance(v, bool):
                raise ValueError("config key 'deterministic' must be a boolean")
        cfg[k] = v


def output_root() -> Path:
    return Path(os.environ.get(ENV_OUTPUT_ROOT, "runs"))


def run_name_for(cfg: dict) -> str:
    return cfg["run_name"] or f"{cfg['spec']}-{cfg['objective']}-s{cfg['seed']}"


def _pretrain_config(cfg: dict, run_dir: Path) -> PretrainConfig:
    if not cfg["spec"]:
        raise ValueError("config key 'spec' is required")
    return PretrainConfig(
        spec_name=cfg["spec"],
        objective=cfg["objective"],
        steps=cfg["steps"],
        seed=cfg["seed"],
        batch_size=cfg["batch_size"],
        optimizer=AdamWConfig(lr=cfg["lr"], weight_decay=cfg["weight_decay"]),
        temperature=cfg["temperature"],
        shuffle_rate=cfg["shuffle_rate"],
        label_mode=cfg["label_mode"],
        log_every=cfg["log_every"],
        grad_clip=cfg["grad_clip"],
        checkpoint_path=str(run_dir / CHECKPOINT_FILE),
        loss_log_path=str(run_dir / LOSS_LOG_FILE),
        deterministic=cfg["deterministic"],
    )


@dataclass
class RunManifest:
    run_dir: str
    spec: str
    objective: str
    steps: int
    seed: int
    checkpoint_path: str
    checkpoint_id: str
    metrics: dict


def run_pretrain_workflow(cfg: dict, run_dir: Path | None = None,
                          dataset=None, resume: bool = False) -> Checkpoint:
    """Pretrain per cfg into a run directory; returns the saved checkpoint."""
    run_dir = Path(run_dir) if run_dir is not None else output_root() / run_name_for(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    pcfg = _pretrain_config(cfg, run_dir)
    with open(run_dir / CONFIG_FILE, "w", encoding="utf-8") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
        f.write("\n")
    resume_from = None
    if resume:
        candidate = run_dir / CHECKPOINT_FILE
        if candidate.exists():
            resume_from = str(candidate)
    return run_pretraining(pcfg, dataset=dataset, resume_from=resume_from)


def synthetic_probe_task(spec_name: str) -> ProbeTask:
    dcfg = synthetic_config_for(spec_name)
    return ProbeTask(name="category", kind="multiclass",
                     num_classes=dcfg.num_categories)


def run_transfer_workflow(cfg: dict, run_dir: Path | None = None,
                          checkpoint_path: str | None = None,
                          dataset=None, task: ProbeTask | None = None) -> dict:
    """Probe a checkpoint's frozen features and append metrics to reports.jsonl."""
    run_dir = Path(run_dir) if run_dir is not None else output_root() / run_name_for(cfg)
    ckpt_path = Path(checkpoint_path) if checkpoint_path else run_dir / CHECKPOINT_FILE
    if not ckpt_path.exists():
        raise ValueError(f"no checkpoint at {ckpt_path}; run pretrain first")
    ck = load_checkpoint(str(ckpt_path))
    spec_name = ck.config["spec_name"]
    if cfg["spec"] and cfg["spec"] != spec_name:
        raise ValueError(
            f"config spec '{cfg['spec']}' does not match checkpoint spec '{spec_name}'")
    spec = load_spec(spec_name)
    if dataset is None:
        if not spec.synthetic:
            raise ValueError(
                f"spec '{spec_name}' has no bundled data; pass a dataset object")
        dataset = make_synthetic_domain(synthetic_config_for(spec_name))
    task = task or synthetic_probe_task(spec_name)

    model = DomainModel(spec, enc.EncoderConfig(**ck.config["encoder"]))
    probe_cfg = ProbeConfig(lr=cfg["probe_lr"], epochs=cfg["probe_epochs"],
                            batch_size=cfg["probe_batch_size"], seed=cfg["probe_seed"])
    feats_train = extract_features(model, ck.params, dataset.train)
    feats_val = extract_features(model, ck.params, dataset.val)
    result = train_linear_probe(feats_train, dataset.train.labels, task, probe_cfg)
    metrics = evaluate_probe(result, feats_val, dataset.val.labels)

    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / REPORTS_FILE, "a", encoding="utf-8") as f:
        for metric, value in metrics.items():
            record = {
                "run": run_dir.name,
                "spec": spec_name,
                "objective": ck.config["objective"],
                "steps": ck.step,
                "seed": ck.seed,
                "task": task.name,
                "kind": task.kind,
                "metric": metric,
                "value": value,
                "probe_epochs": probe_cfg.epochs,
                "probe_lr": probe_cfg.lr,
                "probe_batch_size": probe_cfg.batch_size,
                "probe_seed": probe_cfg.seed,
                "checkpoint": ck.checkpoint_id,
                "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
            }
            f.write(json.dumps(record, sort_keys=True) + "\n")
    return metrics


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSummary:
    spec: str
    objective: str
    metric: str
    mean: float
    count: int


def read_reports(run_dir: Path) -> list[dict]:
    path = Path(run_dir) / REPORTS_FILE
    if not path.exists():
        raise ValueError(f"no {REPORTS_FILE} in {run_dir}; run transfer first")
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def aggregate(records: list[dict]) -> list[DomainSummary]:
    """Mean metric value per (spec, objective, metric), in first-seen order."""
    groups: dict[tuple, list[float]] = {}
    for r in records:
        groups.setdefault((r["spec"], r["objective"], r["metric"]), []).append(r["value"])
    return [DomainSummary(spec=k[0], objective=k[1], metric=k[2],
                          mean=float(np.mean(v)), count=len(v))
            for k, v in groups.items()]


def render_report(records: list[dict]) -> str:
    """Fixed-width text report: every record, then per-group means."""
    if not records:
        return "No transfer results recorded.\n"
    lines = ["run                              spec                objective  steps   metric     value",
             "-" * 96]
    for r in records:
        lines.append(f"{r['run']:<32} {r['spec']:<19} {r['objective']:<10}"
                     f" {r['steps']:<7} {r['metric']:<10} {r['value']:8.2f}")
    lines.append("")
    lines.append("aggregates (mean over matching runs)")
    lines.append("-" * 96)
    for s in aggregate(records):
        lines.append(f"{s.spec:<19} {s.objective:<10} {s.metric:<10}"
                     f" {s.mean:8.2f}  (n={s.count})")
    return "\n".join(lines) + "\n"


def run_report_workflow(run_dir: Path) -> str:
    """Render reports.jsonl to report.txt; returns the text."""
    run_dir = Path(run_dir)
    text = render_report(read_reports(run_dir))
    with open(run_dir / REPORT_TEXT_FILE, "w", encoding="utf-8") as f:
        f.write(text)
    return text


# ----------------------------------------------------------------------
# Held-out shuffle-detection score
# ----------------------------------------------------------------------

def shed_detection_auroc(model: DomainModel, params: dict, split,
                         ocfg: obj.ObjectiveConfig, seed: int,
                         batch_size: int = 64) -> float:
    """AUROC (percent) of the detection head on freshly shuffled held-out data.

    Evaluation mode: no dropout. Plans come from a dedicated stream so they
    are independent of anything seen in training.
    """
    rng = rngmod.stream(seed, rngmod.PLAN)
    scores, labels = [], []
    for start in range(0, split.n, batch_size):
        idx = np.arange(start, min(start + batch_size, split.n))
        batch = split.batch(idx)
        mask = _batch_mask(model, batch)
        plans, lab = sample_shed_plans(mask, ocfg, rng)
        content, _ = model.embed_content(params, batch)
        shuffled = np.empty_like(content.values)
        for i, plan in enumerate(plans):
            shuffled[i] = obj.apply_shuffle(content.values[i], plan,
                                            mask=content.mask[i])
        seq, _ = model.add_positions(params, replace(content, values=shuffled))
        out, _ = enc.encode(params, model.cfg, seq, train=False)
        logits, _ = enc.per_position_logits(params, out)
        scores.append(logits[mask])
        labels.append(lab[mask])
    return auroc(np.concatenate(scores), np.concatenate(labels))


# ----------------------------------------------------------------------
# Gains suite: every synthetic domain, baseline vs both objectives
# ----------------------------------------------------------------------

GAIN_DOMAINS = ("synthetic_images", "synthetic_series",
                "synthetic_tokens", "synthetic_pairs")


def _cached_probe(run_dir: Path, checkpoint_id: str, cfg: dict) -> float | None:
    """Accuracy from a prior probe of this exact checkpoint, if recorded
    under the same probe hyperparameters."""
    path = Path(run_dir) / REPORTS_FILE
    if not path.exists():
        return None
    for line in path.read_text(encoding="utf-8").splitlines():
        r = json.loads(line)
        if (r.get("checkpoint") == checkpoint_id
                and r.get("metric") == "accuracy"
                and r.get("probe_epochs") == cfg["probe_epochs"]
                and r.get("probe_lr") == cfg["probe_lr"]
                and r.get("probe_batch_size") == cfg["probe_batch_size"]
                and r.get("probe_seed", cfg["probe_seed"]) == cfg["probe_seed"]):
            return float(r["value"])
    return None


def run_gains_suite(out_dir: Path, steps: int = 2000, seed: int = 0,
                    domains: tuple = GAIN_DOMAINS,
                    objectives: tuple = ("emix", "shed"),
                    probe_epochs: int = 100) -> dict:
    """Pretrain and probe every domain under each objective plus the untrained
    baseline; writes gains_summary.json and returns its contents.

    This is the long-running experiment of the package (hours at full size).
    Each (domain, objective) leg gets its own run directory under out_dir so
    partial progress survives and provenance stays checkable: a leg whose
    checkpoint is already at the step budget skips training (a partial one
    resumes), and a recorded probe of that exact checkpoint is reused rather
    than recomputed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {
        "steps": steps,
        "seed": seed,
        "probe_epochs": probe_epochs,
        "objectives": list(objectives),
        "domains": {},
    }
    for spec_name in domains:
        dataset = make_synthetic_domain(synthetic_config_for(spec_name))
        entry: dict = {}
        for objective in ("none",) + tuple(objectives):
            cfg = parse_config(overrides={
                "spec": spec_name,
                "objective": objective,
                "steps": steps if objective != "none" else 1,
                "seed": seed,
                "probe_epochs": probe_epochs,
                "run_name": f"{spec_name}-{objective}-s{seed}",
            })
            run_dir = out_dir / cfg["run_name"]
            ck = run_pretrain_workflow(cfg, run_dir, dataset=dataset, resume=True)
            accuracy = _cached_probe(run_dir, ck.checkpoint_id, cfg)
            if accuracy is None:
                accuracy = run_transfer_workflow(cfg, run_dir, dataset=dataset)["accuracy"]
            entry["baseline" if objective == "none" else objective] = accuracy
        for objective in objectives:
            entry[f"gain_{objective}"] = entry[objective] - entry["baseline"]
        summary["domains"][spec_name] = entry
        _write_gains(out_dir, summary)
    return summary


def _write_gains(out_dir: Path, summary: dict) -> None:
    with open(Path(out_dir) / GAINS_FILE, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


def load_gains_summary(out_dir: Path) -> dict:
    path = Path(out_dir) / GAINS_FILE
    with open(path, encoding="utf-8") as f:
        return json.load(f)
