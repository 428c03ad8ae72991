"""Assembly of embedders, position tables, encoder, and heads for one spec.

A DomainModel owns no arrays; parameters live in a flat dict produced by
init_params and threaded through every call, which keeps optimizer state,
checkpointing, and gradient checks trivial. Batches are dicts of payload
arrays keyed by modality:

    image2d / spectrogram2d: {"image": (B, C, H, W)}
    series1d:                {"series": (B, C, T)}
    tokens:                  {"tokens": (B, L) int, "token_mask": (B, L) bool}
    image_text_pair:         image keys + token keys; image embeds first.

Each embedder has its own learned position table; for pairs the tables are
concatenated in modality order, so positions are still added in one step on
the concatenated content sequence (mixing and shuffling happen before that
step).
"""

from __future__ import annotations

import numpy as np

from . import embedding as emb
from . import encoder as enc
from . import rng as rngmod
from .nn import accumulate
from .specs import DatasetSpec


class DomainModel:
    """Embedding modules plus the fixed encoder for one DatasetSpec."""

    def __init__(self, spec: DatasetSpec, cfg: enc.EncoderConfig | None = None):
        self.spec = spec
        self.cfg = cfg or enc.EncoderConfig()
        self.dtype = np.dtype(self.cfg.dtype)
        d = self.cfg.d_model
        self.embedders: list[emb.EmbedderConfig] = []
        if spec.modality in ("image2d", "spectrogram2d"):
            self.embedders.append(emb.EmbedderConfig(
                modality=spec.modality, d_model=d, patch_dims=spec.patch_dims,
                max_positions=spec.sequence_length))
        elif spec.modality == "series1d":
            self.embedders.append(emb.EmbedderConfig(
                modality=spec.modality, d_model=d, segment_len=spec.patch_dims[0],
                max_positions=spec.sequence_length))
        elif spec.modality == "tokens":
            self.embedders.append(emb.EmbedderConfig(
                modality=spec.modality, d_model=d, vocab_size=spec.vocab_size,
                max_positions=spec.sequence_length))
        elif spec.modality == "image_text_pair":
            img_dims, text_dims = spec.input_dims
            img_len = spec.sequence_length - text_dims[0]
            self.embedders.append(emb.EmbedderConfig(
                modality="image2d", d_model=d, patch_dims=spec.patch_dims,
                max_positions=img_len))
            self.embedders.append(emb.EmbedderConfig(
                modality="tokens", d_model=d, vocab_size=spec.vocab_size,
                max_positions=text_dims[0]))
        else:
            raise ValueError(f"Unsupported modality '{spec.modality}'")

    # ------------------------------------------------------------------
    # Parameters
    # ------------------------------------------------------------------

    def _image_patch_size(self) -> int:
        c = self.spec.image_dims[0]
        ph, pw = self.spec.patch_dims
        return c * ph * pw

    def init_params(self, seed: int) -> dict[str, np.ndarray]:
        """Fresh parameter dict; equal seeds give bitwise equal values."""
        r = rngmod.stream(seed, rngmod.INIT)
        dt = self.dtype
        std = self.cfg.init_std
        d = self.cfg.d_model
        params: dict[str, np.ndarray] = {}
        for e in self.embedders:
            p = f"embed.{e.modality}"
            if e.modality in ("image2d", "spectrogram2d"):
                params[f"{p}.w"] = r.normal(0.0, std, (self._image_patch_size(), d)).astype(dt)
                params[f"{p}.b"] = np.zeros(d, dtype=dt)
            elif e.modality == "series1d":
                cin = self.spec.input_dims[0] * e.segment_len
                params[f"{p}.w"] = r.normal(0.0, std, (cin, d)).astype(dt)
                params[f"{p}.b"] = np.zeros(d, dtype=dt)
            else:
                params[f"{p}.table"] = r.normal(0.0, std, (e.vocab_size, d)).astype(dt)
            params[f"pos.{e.modality}.table"] = r.normal(0.0, std, (e.max_positions, d)).astype(dt)
        params.update(enc.init_encoder_params(self.cfg, r))
        return params

    # ------------------------------------------------------------------
    # Content embedding (no positions yet)
    # ------------------------------------------------------------------

    def embed_content(self, params: dict, batch: dict):
        """Raw payloads -> concatenated content EmbeddingSequence + cache."""
        seqs, caches = [], []
        for e in self.embedders:
            p = f"embed.{e.modality}"
            if e.modality in ("image2d", "spectrogram2d"):
                x = np.ascontiguousarray(batch["image"], dtype=self.dtype)
                seq, cache = emb.embed_patches_2d(x, params, e, p)
            elif e.modality == "series1d":
                x = np.ascontiguousarray(batch["series"], dtype=self.dtype)
                seq, cache = emb.embed_segments_1d(x, params, e, p)
            else:
                ids = np.asarray(batch["tokens"])
                mask = np.asarray(batch.get("token_mask",
                                            np.ones(ids.shape, dtype=bool)))
                seq, cache = emb.embed_tokens(ids, mask, params, e, p)
            seqs.append(seq)
            caches.append((e.modality, cache))
        out = emb.concat_modalities(seqs)
        lengths = [s.length for s in seqs]
        return out, (caches, lengths)

    def embed_content_backward(self, params: dict, cache, dvalues: np.ndarray) -> dict:
        caches, lengths = cache
        grads: dict[str, np.ndarray] = {}
        start = 0
        for (modality, c), ln in zip(caches, lengths):
            piece = dvalues[:, start:start + ln]
            if modality in ("image2d", "spectrogram2d"):
                _, g = emb.embed_patches_2d_backward(piece, c)
            elif modality == "series1d":
                _, g = emb.embed_segments_1d_backward(piece, c)
            else:
                _, g = emb.embed_tokens_backward(piece, c)
            grads.update(g)
            start += ln
        return grads

    # ------------------------------------------------------------------
    # Positions
    # ------------------------------------------------------------------

    def position_table(self, params: dict) -> np.ndarray:
        """Concatenated per-embedder position tables, length sequence_length."""
        return np.concatenate(
            [params[f"pos.{e.modality}.table"] for e in self.embedders], axis=0
        )

    def add_positions(self, params: dict, seq: emb.EmbeddingSequence):
        return emb.add_positions(seq, self.position_table(params))

    def add_positions_backward(self, cache, dvalues: np.ndarray) -> tuple[np.ndarray, dict]:
        dvalues_in, dpos = emb.add_positions_backward(dvalues, cache)
        grads: dict[str, np.ndarray] = {}
        start = 0
        for e in self.embedders:
            grads[f"pos.{e.modality}.table"] = dpos[start:start + e.max_positions]
            start += e.max_positions
        return dvalues_in, grads

    # ------------------------------------------------------------------
    # Full passes
    # ------------------------------------------------------------------

    def forward_pooled(self, params: dict, batch: dict, *, train: bool = False,
                       rng: np.random.Generator | None = None):
        """Payloads -> pooled features; returns (pooled, caches for backward)."""
        content, c_embed = self.embed_content(params, batch)
        seq, c_pos = self.add_positions(params, content)
        out, c_enc = enc.encode(params, self.cfg, seq, train=train, rng=rng)
        pooled, c_pool = enc.pool_project(params, out)
        return pooled, (c_embed, c_pos, c_enc, c_pool)

    def backward_pooled(self, params: dict, caches, dpooled: np.ndarray) -> dict:
        c_embed, c_pos, c_enc, c_pool = caches
        dstates, grads = enc.pool_project_backward(dpooled, c_pool)
        dvalues, g_enc = enc.encode_backward(c_enc, dstates, self.cfg)
        accumulate(grads, g_enc)
        dcontent, g_pos = self.add_positions_backward(c_pos, dvalues)
        accumulate(grads, g_pos)
        accumulate(grads, self.embed_content_backward(params, c_embed, dcontent))
        return grads
