"""Modality-specific embedding modules.

These are the only domain-varying pieces of the model: patch embeddings for
2-d inputs, segment embeddings for multichannel series, a lookup table for
tokens, plus position addition and multimodal concatenation. Every operation
has an explicit backward so the whole model trains without autodiff.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import nn


@dataclass(frozen=True)
class EmbedderConfig:
    """Shape parameters for one embedder."""

    modality: str
    d_model: int = 256
    patch_dims: tuple | None = None     # (ph, pw) for 2-d inputs
    segment_len: int | None = None      # series chunk length
    vocab_size: int | None = None       # token table rows
    max_positions: int = 256


@dataclass
class EmbeddingSequence:
    """Batch of per-position embeddings with a validity mask.

    values: (B, L, d) float array. mask: (B, L) bool, True on real content;
    masked positions always carry zero vectors. boundary is the start index
    of the second modality for concatenated pairs.
    """

    values: np.ndarray
    mask: np.ndarray
    modality_tag: str
    positions_applied: bool = False
    boundary: int | None = None

    @property
    def length(self) -> int:
        return self.values.shape[1]


def _patchify(images: np.ndarray, ph: int, pw: int) -> np.ndarray:
    """(B, C, H, W) -> (B, L, C*ph*pw) in raster order, patch layout (C, ph, pw)."""
    b, c, h, w = images.shape
    gh, gw = h // ph, w // pw
    x = images.reshape(b, c, gh, ph, gw, pw)
    x = x.transpose(0, 2, 4, 1, 3, 5)
    return np.ascontiguousarray(x.reshape(b, gh * gw, c * ph * pw))


def _unpatchify_grad(dpatches: np.ndarray, shape, ph: int, pw: int) -> np.ndarray:
    b, c, h, w = shape
    gh, gw = h // ph, w // pw
    x = dpatches.reshape(b, gh, gw, c, ph, pw).transpose(0, 3, 1, 4, 2, 5)
    return np.ascontiguousarray(x.reshape(b, c, h, w))


def embed_patches_2d(images: np.ndarray, params: dict, cfg: EmbedderConfig, prefix: str):
    """Non-overlapping patches, each flattened and affinely mapped to d_model."""
    ph, pw = cfg.patch_dims
    b, c, h, w = images.shape
    if h % ph or w % pw:
        raise ValueError(f"patch dims ({ph},{pw}) do not divide input {h}x{w}")
    patches = _patchify(images, ph, pw)
    if patches.shape[-1] != params[f"{prefix}.w"].shape[0]:
        raise ValueError(
            f"patch size {patches.shape[-1]} does not match embedder "
            f"weight rows {params[f'{prefix}.w'].shape[0]}"
        )
    values, lin_cache = nn.linear_fwd(patches, params[f"{prefix}.w"], params[f"{prefix}.b"])
    mask = np.ones(values.shape[:2], dtype=bool)
    seq = EmbeddingSequence(values=values, mask=mask, modality_tag=cfg.modality)
    return seq, (lin_cache, images.shape, (ph, pw), prefix)


def embed_patches_2d_backward(dvalues: np.ndarray, cache):
    lin_cache, img_shape, (ph, pw), prefix = cache
    dpatches, dw, db = nn.linear_bwd(dvalues, lin_cache)
    grads = {f"{prefix}.w": dw, f"{prefix}.b": db}
    dimages = _unpatchify_grad(dpatches, img_shape, ph, pw)
    return dimages, grads


def embed_segments_1d(series: np.ndarray, params: dict, cfg: EmbedderConfig, prefix: str):
    """Consecutive length-segment_len slices across all channels, affinely mapped."""
    seg = cfg.segment_len
    b, c, t = series.shape
    if t % seg:
        raise ValueError(f"segment length {seg} does not divide series length {t}")
    x = series.reshape(b, c, t // seg, seg).transpose(0, 2, 1, 3)
    segments = np.ascontiguousarray(x.reshape(b, t // seg, c * seg))
    values, lin_cache = nn.linear_fwd(segments, params[f"{prefix}.w"], params[f"{prefix}.b"])
    mask = np.ones(values.shape[:2], dtype=bool)
    seq = EmbeddingSequence(values=values, mask=mask, modality_tag=cfg.modality)
    return seq, (lin_cache, series.shape, seg, prefix)


def embed_segments_1d_backward(dvalues: np.ndarray, cache):
    lin_cache, series_shape, seg, prefix = cache
    dsegments, dw, db = nn.linear_bwd(dvalues, lin_cache)
    grads = {f"{prefix}.w": dw, f"{prefix}.b": db}
    b, c, t = series_shape
    dx = dsegments.reshape(b, t // seg, c, seg).transpose(0, 2, 1, 3)
    dseries = np.ascontiguousarray(dx.reshape(b, c, t))
    return dseries, grads


def embed_tokens(ids: np.ndarray, mask: np.ndarray, params: dict, cfg: EmbedderConfig,
                 prefix: str):
    """Row lookup into the vocab table; masked positions zeroed."""
    table = params[f"{prefix}.table"]
    if ids.min() < 0 or ids.max() >= table.shape[0]:
        raise ValueError(
            f"token id out of range [0, {table.shape[0]}): "
            f"found min {int(ids.min())}, max {int(ids.max())}"
        )
    mask = mask.astype(bool)
    values = table[ids] * mask[..., None]
    seq = EmbeddingSequence(values=values, mask=mask, modality_tag=cfg.modality)
    return seq, (ids, mask, table.shape, prefix)


def embed_tokens_backward(dvalues: np.ndarray, cache):
    ids, mask, table_shape, prefix = cache
    dtable = np.zeros(table_shape, dtype=dvalues.dtype)
    dmasked = dvalues * mask[..., None]
    np.add.at(dtable, ids.reshape(-1), dmasked.reshape(-1, table_shape[1]))
    return None, {f"{prefix}.table": dtable}


def add_positions(seq: EmbeddingSequence, pos_table: np.ndarray):
    """Add the learned absolute position vector p_j to every batch row.

    Masked positions stay zero, keeping the EmbeddingSequence contract.
    """
    if seq.positions_applied:
        raise ValueError("positions already applied to this sequence")
    L = seq.length
    if L > pos_table.shape[0]:
        raise ValueError(f"sequence length {L} exceeds position table {pos_table.shape[0]}")
    m = seq.mask[..., None].astype(seq.values.dtype)
    values = (seq.values + pos_table[None, :L]) * m
    out = replace(seq, values=values, positions_applied=True)
    return out, (seq.mask, L, pos_table.shape[0])


def add_positions_backward(dvalues: np.ndarray, cache):
    mask, L, table_rows = cache
    m = mask[..., None].astype(dvalues.dtype)
    dmasked = dvalues * m
    dvalues_in = dmasked
    # Table gradient keeps the parameter's full shape; unused rows stay zero.
    dpos = np.zeros((table_rows, dvalues.shape[-1]), dtype=dvalues.dtype)
    dpos[:L] = dmasked.sum(axis=0)
    return dvalues_in, dpos


def concat_modalities(seqs: list[EmbeddingSequence]) -> EmbeddingSequence:
    """Concatenate along L in the given order (image first, then text)."""
    if not seqs:
        raise ValueError("need at least one sequence")
    if len(seqs) == 1:
        return seqs[0]
    if len({s.values.shape[0] for s in seqs}) != 1:
        raise ValueError("mismatched batch sizes")
    if len({s.values.shape[2] for s in seqs}) != 1:
        raise ValueError("mismatched d_model")
    if any(s.positions_applied != seqs[0].positions_applied for s in seqs):
        raise ValueError("mixed positions_applied states")
    values = np.concatenate([s.values for s in seqs], axis=1)
    mask = np.concatenate([s.mask for s in seqs], axis=1)
    return EmbeddingSequence(
        values=values,
        mask=mask,
        modality_tag="+".join(s.modality_tag for s in seqs),
        positions_applied=seqs[0].positions_applied,
        boundary=seqs[0].length,
    )
