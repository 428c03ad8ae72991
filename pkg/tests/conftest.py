"""Shared fixtures: reduced encoder configs and tiny dataset specs.

Unit tests run on small encoders so every assertion stays sub-second; the
full-size architecture is exercised in the acceptance suite. Acceptance
verdict lines are buffered here and echoed after the run summary so they
stay visible regardless of output capture.
"""

import numpy as np
import pytest

from dapt import rng as rngmod
from dapt.encoder import EncoderConfig
from dapt.model import DomainModel
from dapt.specs import DatasetSpec

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_encoder():
    return EncoderConfig(layers=2, d_model=32, heads=4, ffn_dim=64,
                         proj_dim=16, dropout=0.1)


@pytest.fixture
def audit_encoder():
    """Reduced float64 encoder with dropout off, for gradient audits."""
    return EncoderConfig(layers=2, d_model=16, heads=2, ffn_dim=32,
                         proj_dim=8, dropout=0.0, dtype="float64")


@pytest.fixture
def tiny_tokens_spec():
    return DatasetSpec(name="tiny_tokens", modality="tokens", input_dims=(8,),
                       patch_dims=None, sequence_length=8, batch_size=4,
                       num_train=64, num_val=16, vocab_size=32, synthetic=True)


@pytest.fixture
def tiny_image_spec():
    return DatasetSpec(name="tiny_images", modality="image2d",
                       input_dims=(3, 8, 8), patch_dims=(4, 4),
                       sequence_length=4, batch_size=4,
                       num_train=64, num_val=16, synthetic=True)


@pytest.fixture
def tiny_pair_spec():
    return DatasetSpec(name="tiny_pairs", modality="image_text_pair",
                       input_dims=((3, 8, 8), (6,)), patch_dims=(4, 4),
                       sequence_length=10, batch_size=4,
                       num_train=64, num_val=16, vocab_size=32, synthetic=True)


def token_batch(spec: DatasetSpec, n: int, seed: int = 0, n_pad: int = 0):
    """Random id batch with optional trailing padding on every row."""
    r = rngmod.stream(seed, 9)
    length = spec.text_len
    ids = r.integers(0, spec.vocab_size, size=(n, length))
    mask = np.ones((n, length), dtype=bool)
    if n_pad:
        mask[:, length - n_pad:] = False
        ids[~mask] = 0
    return {"tokens": ids, "token_mask": mask}


def image_batch(spec: DatasetSpec, n: int, seed: int = 0):
    r = rngmod.stream(seed, 9)
    return {"image": r.normal(size=(n,) + spec.image_dims).astype(np.float32)}


def pair_batch(spec: DatasetSpec, n: int, seed: int = 0, n_pad: int = 0):
    r = rngmod.stream(seed, 9)
    img = r.normal(size=(n,) + spec.image_dims).astype(np.float32)
    tok = token_batch(spec, n, seed=seed + 1, n_pad=n_pad)
    return {"image": img, "tokens": tok["tokens"], "token_mask": tok["token_mask"]}


def batch_for(spec: DatasetSpec, n: int, seed: int = 0):
    if spec.modality == "tokens":
        return token_batch(spec, n, seed)
    if spec.modality == "image_text_pair":
        return pair_batch(spec, n, seed)
    if spec.modality == "series1d":
        r = rngmod.stream(seed, 9)
        return {"series": r.normal(size=(n,) + tuple(spec.input_dims)).astype(np.float32)}
    return image_batch(spec, n, seed)


def build_model(spec: DatasetSpec, cfg: EncoderConfig, seed: int = 0):
    model = DomainModel(spec, cfg)
    return model, model.init_params(seed)
