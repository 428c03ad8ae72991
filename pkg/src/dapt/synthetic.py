"""Synthetic latent-factor domains for desk-scale training and tests.

Every domain follows one recipe. A latent z ~ N(0, I_k) is split by an
orthonormal frame into C category directions and m content directions:

* category = argmax of the C category projections. Because the projections
  are orthonormal, they are iid standard normal, so categories are exactly
  equiprobable.
* rendering coordinates are unit directions that blend one content
  direction with one category direction: coordinate j reads
  sqrt(1 - tilt^2) * v_j + tilt * u_(j mod C) of the latent. They stay
  standard normal, and category_tilt sets how much of their variance the
  label explains. At tilt 0 content is independent of the label and only
  the arrangement below carries it; at the default a probe that reads
  content well can recover a useful part of the label.

The label also decides where content goes: each category owns a distinct
permutation of the content slots (blocks of the image, chunks of the
series, positions of the token sequence), so position-content structure
carries the rest of the signal. Token contents make that structure locally
checkable: every vocabulary id is unique to one (slot role, content bin,
within-clause offset) cell of the template table, so an id seen anywhere
pins down exactly where it belongs.

Decoders are frozen per seed and never trained. Datasets are pure functions
of their config.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as _norm

from . import rng as rngmod
from .embedding import _unpatchify_grad
from .preprocess import _resize_weights

_Z_STREAM = 0
_NOISE_STREAM = 1
_TRAIN, _VAL = 0, 1


@dataclass(frozen=True)
class SyntheticDomainConfig:
    """Generator settings; the irrelevant shape fields are ignored per modality."""

    modality: str
    latent_dim: int = 16
    num_categories: int = 8
    category_tilt: float = 0.5
    noise_scale: float = 0.1
    num_train: int = 2048
    num_val: int = 512
    seed: int = 0
    image_dims: tuple = (3, 32, 32)
    image_block: int = 8               # square block edge, grid derived
    series_dims: tuple = (52, 320)
    series_chunk: int = 20
    token_length: int = 128
    clause_length: int = 1
    vocab_size: int = 1024
    content_bins: int = 2
    pair_text_len: int = 16
    pair_clause_length: int = 1

    def __post_init__(self):
        if self.num_categories < 2:
            raise ValueError("need at least 2 categories")
        if self.latent_dim < self.num_categories + 2:
            raise ValueError("latent_dim must exceed num_categories by >= 2 "
                             "(the surplus carries the content)")
        if not 0.0 <= self.category_tilt <= 1.0:
            raise ValueError("category_tilt must lie in [0, 1]")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")


@dataclass
class RawExample:
    payload: dict[str, np.ndarray]
    label: int | None = None


class SyntheticSplit:
    """One split: payload arrays, labels, and the generating latents."""

    def __init__(self, payloads: dict[str, np.ndarray], labels: np.ndarray,
                 latents: np.ndarray):
        self.payloads = payloads
        self.labels = labels
        self.latents = latents

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def batch(self, indices: np.ndarray) -> dict[str, np.ndarray]:
        return {k: v[indices] for k, v in self.payloads.items()}

    def examples(self):
        for i in range(self.n):
            yield RawExample(payload={k: v[i] for k, v in self.payloads.items()},
                             label=int(self.labels[i]))


def _orthonormal_frame(k: int, c: int, rng: np.random.Generator):
    """(U, V): c category rows and k-c content rows, all orthonormal."""
    q, _ = np.linalg.qr(rng.normal(size=(k, k)))
    return q[:, :c].T.copy(), q[:, c:].T.copy()


def _tilted_directions(content_rows: np.ndarray, u_rows: np.ndarray,
                       tilt: float) -> np.ndarray:
    """Unit rendering directions: row j blends content row j with u_(j mod C).

    content_rows must be unit vectors in the content span, so each output row
    is unit too and its latent projection stays standard normal.
    """
    c = u_rows.shape[0]
    idx = np.arange(content_rows.shape[0]) % c
    return np.sqrt(1.0 - tilt * tilt) * content_rows + tilt * u_rows[idx]


def _distinct_permutations(n_slots: int, count: int, rng: np.random.Generator) -> np.ndarray:
    perms: list[tuple] = []
    seen = set()
    while len(perms) < count:
        p = tuple(rng.permutation(n_slots).tolist())
        if p not in seen:
            seen.add(p)
            perms.append(p)
    return np.array(perms, dtype=np.int64)


def _smooth_patterns_2d(n_slots: int, m: int, channels: int, edge: int,
                        rng: np.random.Generator) -> np.ndarray:
    """(n_slots, m, channels, edge, edge) smooth unit-RMS basis patterns."""
    coarse = rng.normal(size=(n_slots, m, channels, 3, 3))
    up = _resize_weights(3, edge)
    pat = np.einsum("ij,smcjk,lk->smcil", up, coarse, up)
    rms = np.sqrt((pat ** 2).mean(axis=(2, 3, 4), keepdims=True))
    return pat / rms


def _smooth_patterns_1d(n_slots: int, m: int, channels: int, length: int,
                        rng: np.random.Generator) -> np.ndarray:
    """(n_slots, m, channels, length) patterns, smooth along time."""
    coarse = rng.normal(size=(n_slots, m, channels, 5))
    up = _resize_weights(5, length)
    pat = coarse @ up.T
    rms = np.sqrt((pat ** 2).mean(axis=(2, 3), keepdims=True))
    return pat / rms


class SyntheticDomain:
    """Frozen decoder plus train/val splits for one modality."""

    def __init__(self, config: SyntheticDomainConfig):
        cfg = config
        if cfg.modality not in ("image2d", "series1d", "tokens", "image_text_pair"):
            raise ValueError(f"Unsupported synthetic modality '{cfg.modality}'")
        self.config = cfg
        k, c = cfg.latent_dim, cfg.num_categories
        r = rngmod.stream(cfg.seed, rngmod.ASSETS)
        self.U, self.V = _orthonormal_frame(k, c, r)
        m = k - c
        coord_dirs = _tilted_directions(self.V, self.U, cfg.category_tilt)

        if cfg.modality in ("image2d", "image_text_pair"):
            ch, h, w = cfg.image_dims
            edge = cfg.image_block
            if h % edge or w % edge:
                raise ValueError("image_block must divide the image dims")
            self._img_slots = (h // edge) * (w // edge)
            self._img_dirs = coord_dirs
            self._img_patterns = _smooth_patterns_2d(self._img_slots, m, ch, edge, r)
            self._img_perms = _distinct_permutations(self._img_slots, c, r)
        if cfg.modality == "series1d":
            ch, t = cfg.series_dims
            if t % cfg.series_chunk:
                raise ValueError("series_chunk must divide the series length")
            self._ser_slots = t // cfg.series_chunk
            self._ser_dirs = coord_dirs
            self._ser_patterns = _smooth_patterns_1d(self._ser_slots, m, ch,
                                                     cfg.series_chunk, r)
            self._ser_perms = _distinct_permutations(self._ser_slots, c, r)
        if cfg.modality in ("tokens", "image_text_pair"):
            text_len = cfg.token_length if cfg.modality == "tokens" else cfg.pair_text_len
            cl = cfg.clause_length if cfg.modality == "tokens" else cfg.pair_clause_length
            if text_len % cl:
                raise ValueError("clause length must divide the token length")
            n_cl = text_len // cl
            n_cells = n_cl * cfg.content_bins * cl
            if n_cells > cfg.vocab_size - 1:
                raise ValueError(
                    "vocab_size must exceed slots * content_bins * clause_length; "
                    "every template cell gets its own id")
            self._txt_slots = n_cl
            self._txt_len = text_len
            self._txt_clause = cl
            g = r.normal(size=(n_cl, m))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            self._txt_dirs = _tilted_directions(g @ self.V, self.U,
                                                cfg.category_tilt)
            self._txt_edges = _norm.ppf(np.arange(1, cfg.content_bins) / cfg.content_bins)
            # Distinct ids per (slot role, bin, offset) cell: misplaced content
            # is recognizable from the id alone.
            cell_ids = r.choice(np.arange(1, cfg.vocab_size, dtype=np.int64),
                                size=n_cells, replace=False)
            self._txt_table = cell_ids.reshape(n_cl, cfg.content_bins, cl)
            self._txt_perms = _distinct_permutations(n_cl, c, r)

        self.train = self._make_split(cfg.num_train, _TRAIN)
        self.val = self._make_split(cfg.num_val, _VAL)

    # ------------------------------------------------------------------
    # Latents and labels
    # ------------------------------------------------------------------

    def sample_latents(self, n: int, split: int) -> np.ndarray:
        r = rngmod.stream(self.config.seed, rngmod.NOISE, split, _Z_STREAM)
        return r.normal(size=(n, self.config.latent_dim))

    def categorize(self, latents: np.ndarray) -> np.ndarray:
        """The documented label rule: argmax over the category projections."""
        z = np.atleast_2d(latents)
        return np.argmax(z @ self.U.T, axis=1)

    # ------------------------------------------------------------------
    # Rendering
    # ------------------------------------------------------------------

    def render(self, latents: np.ndarray,
               rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
        """Decode latents (n, k) into payload arrays; rng None means no noise."""
        z = np.atleast_2d(latents)
        labels = self.categorize(z)
        out: dict[str, np.ndarray] = {}
        cfg = self.config
        if cfg.modality in ("image2d", "image_text_pair"):
            out["image"] = self._render_blocks_2d(z, labels, rng)
        if cfg.modality == "series1d":
            out["series"] = self._render_chunks_1d(z, labels, rng)
        if cfg.modality in ("tokens", "image_text_pair"):
            ids = self._render_tokens(z, labels, rng)
            out["tokens"] = ids
            out["token_mask"] = np.ones(ids.shape, dtype=bool)
        return out

    def _arrange(self, content: np.ndarray, labels: np.ndarray,
                 perms: np.ndarray) -> np.ndarray:
        """content (n, slots, ...) -> slot s of example i shows content[perm[s]]."""
        n = content.shape[0]
        return content[np.arange(n)[:, None], perms[labels]]

    def _render_blocks_2d(self, z, labels, rng):
        cfg = self.config
        ch, h, w = cfg.image_dims
        y = z @ self._img_dirs.T               # (n, m) rendering coordinates
        m = y.shape[1]
        content = np.einsum("nm,smcij->nscij", y, self._img_patterns) / np.sqrt(m)
        arranged = self._arrange(content, labels, self._img_perms)
        n = arranged.shape[0]
        edge = cfg.image_block
        flat = arranged.reshape(n, self._img_slots, ch * edge * edge)
        images = _unpatchify_grad(flat, (n, ch, h, w), edge, edge)
        if rng is not None and cfg.noise_scale > 0:
            images = images + cfg.noise_scale * rng.normal(size=images.shape)
        return images.astype(np.float32)

    def _render_chunks_1d(self, z, labels, rng):
        cfg = self.config
        ch, t = cfg.series_dims
        y = z @ self._ser_dirs.T               # (n, m) rendering coordinates
        m = y.shape[1]
        content = np.einsum("nm,smcj->nscj", y, self._ser_patterns) / np.sqrt(m)
        arranged = self._arrange(content, labels, self._ser_perms)
        n = arranged.shape[0]
        series = arranged.transpose(0, 2, 1, 3).reshape(n, ch, t)
        if rng is not None and cfg.noise_scale > 0:
            series = series + cfg.noise_scale * rng.normal(size=series.shape)
        return series.astype(np.float32)

    def _render_tokens(self, z, labels, rng):
        # Ids are exact by construction: additive noise has no discrete
        # analogue here, and replacing ids at random would fabricate the very
        # misplaced-content evidence the detection objective trains on.
        scores = z @ self._txt_dirs.T                       # (n, slots), each N(0,1)
        bins = np.searchsorted(self._txt_edges, scores)     # (n, slots) in [0, bins)
        slot_idx = np.arange(self._txt_slots)
        content = self._txt_table[slot_idx[None, :], bins]  # (n, slots, clause_len)
        arranged = self._arrange(content, labels, self._txt_perms)
        return arranged.reshape(z.shape[0], self._txt_len).astype(np.int64)

    # ------------------------------------------------------------------

    def _make_split(self, n: int, split: int) -> SyntheticSplit:
        z = self.sample_latents(n, split)
        noise_rng = rngmod.stream(self.config.seed, rngmod.NOISE, split, _NOISE_STREAM)
        payloads = self.render(z, noise_rng)
        return SyntheticSplit(payloads, self.categorize(z), z)


def make_synthetic_domain(config: SyntheticDomainConfig) -> SyntheticDomain:
    """Build the frozen decoder and materialize both splits."""
    return SyntheticDomain(config)


# Registry-spec companions. Dataset seeds are fixed per domain: the dataset
# is part of the benchmark definition, while training seeds vary per run.
_SYNTHETIC_CONFIGS: dict[str, SyntheticDomainConfig] = {
    "synthetic_images": SyntheticDomainConfig(modality="image2d", seed=101),
    "synthetic_series": SyntheticDomainConfig(modality="series1d", seed=102),
    "synthetic_tokens": SyntheticDomainConfig(modality="tokens", seed=103),
    "synthetic_pairs": SyntheticDomainConfig(modality="image_text_pair", seed=104),
}


def synthetic_config_for(spec_name: str) -> SyntheticDomainConfig:
    try:
        return _SYNTHETIC_CONFIGS[spec_name]
    except KeyError:
        raise ValueError(
            f"No synthetic config for spec '{spec_name}'. "
            f"Available: {', '.join(sorted(_SYNTHETIC_CONFIGS))}"
        ) from None
