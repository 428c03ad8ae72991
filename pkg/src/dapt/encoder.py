"""The fixed cross-domain transformer encoder and its pooled projection.

Twelve pre-norm blocks of masked multi-head self-attention and a GELU
feed-forward, a final layer norm, then a masked mean pool projected to the
128-d feature f(x). Dropout (rate 0.1) applies to attention weights and to
feed-forward outputs in train mode. The same configuration is used for every
modality; only the embedders differ.

Forward passes return caches that the matching *_backward functions consume;
caches are lists that backward pops from, so peak memory falls as the
backward walks down the stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .embedding import EmbeddingSequence


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 12
    d_model: int = 256
    heads: int = 8
    dropout: float = 0.1
    ffn_dim: int = 1024
    proj_dim: int = 128
    dtype: str = "float32"
    init_std: float = 0.02
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be positive")
        if self.d_model % self.heads:
            raise ValueError("d_model must be divisible by heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class EncoderOutput:
    """Final-layer states plus the pooled projected feature."""

    states: np.ndarray            # (B, L, d_model)
    mask: np.ndarray              # (B, L) bool passthrough
    pooled: np.ndarray | None = None   # (B, proj_dim), filled by pool_project


def init_encoder_params(cfg: EncoderConfig, rng: np.random.Generator) -> dict:
    """Initialize encoder, pooling head, and detection head parameters.

    Weights are scaled normal (std cfg.init_std), biases zero, layer norm
    gain one. Draw order is fixed (layer by layer, then final norm, then
    heads) so equal seeds give bitwise equal parameters.
    """
    dt = np.dtype(cfg.dtype)
    d, f = cfg.d_model, cfg.ffn_dim

    def w(*shape):
        return rng.normal(0.0, cfg.init_std, size=shape).astype(dt)

    params: dict[str, np.ndarray] = {}
    for i in range(cfg.layers):
        p = f"enc.{i}"
        params[f"{p}.ln1.g"] = np.ones(d, dtype=dt)
        params[f"{p}.ln1.b"] = np.zeros(d, dtype=dt)
        params[f"{p}.attn.wq"] = w(d, d)
        params[f"{p}.attn.bq"] = np.zeros(d, dtype=dt)
        params[f"{p}.attn.wk"] = w(d, d)
        params[f"{p}.attn.bk"] = np.zeros(d, dtype=dt)
        params[f"{p}.attn.wv"] = w(d, d)
        params[f"{p}.attn.bv"] = np.zeros(d, dtype=dt)
        params[f"{p}.attn.wo"] = w(d, d)
        params[f"{p}.attn.bo"] = np.zeros(d, dtype=dt)
        params[f"{p}.ln2.g"] = np.ones(d, dtype=dt)
        params[f"{p}.ln2.b"] = np.zeros(d, dtype=dt)
        params[f"{p}.ffn.w1"] = w(d, f)
        params[f"{p}.ffn.b1"] = np.zeros(f, dtype=dt)
        params[f"{p}.ffn.w2"] = w(f, d)
        params[f"{p}.ffn.b2"] = np.zeros(d, dtype=dt)
    params["enc.ln_f.g"] = np.ones(d, dtype=dt)
    params["enc.ln_f.b"] = np.zeros(d, dtype=dt)
    params["pool.w"] = w(d, cfg.proj_dim)
    params["pool.b"] = np.zeros(cfg.proj_dim, dtype=dt)
    params["detect.w"] = w(d, 1)
    params["detect.b"] = np.zeros(1, dtype=dt)
    return params


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, l, d = x.shape
    return np.ascontiguousarray(x.reshape(b, l, heads, d // heads).transpose(0, 2, 1, 3))


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, l, dh = x.shape
    return np.ascontiguousarray(x.transpose(0, 2, 1, 3).reshape(b, l, h * dh))


def _attention_fwd(x, params, prefix, cfg, kmask, train, rng):
    q, cq = nn.linear_fwd(x, params[f"{prefix}.wq"], params[f"{prefix}.bq"])
    k, ck = nn.linear_fwd(x, params[f"{prefix}.wk"], params[f"{prefix}.bk"])
    v, cv = nn.linear_fwd(x, params[f"{prefix}.wv"], params[f"{prefix}.bv"])
    qh = _split_heads(q, cfg.heads)
    kh = _split_heads(k, cfg.heads)
    vh = _split_heads(v, cfg.heads)
    scale = x.dtype.type(1.0 / np.sqrt(cfg.d_model // cfg.heads))
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    probs, _ = nn.masked_softmax_fwd(scores, kmask)
    pd, dmask = nn.dropout_fwd(probs, cfg.dropout, rng, train)
    ctx = _merge_heads(pd @ vh)
    out, co = nn.linear_fwd(ctx, params[f"{prefix}.wo"], params[f"{prefix}.bo"])
    cache = (cq, ck, cv, qh, kh, vh, probs, dmask, pd, scale, co, prefix)
    return out, cache


def _attention_bwd(dout, cache, cfg):
    cq, ck, cv, qh, kh, vh, probs, dmask, pd, scale, co, prefix = cache
    dctx, dwo, dbo = nn.linear_bwd(dout, co)
    dctxh = _split_heads(dctx, cfg.heads)
    dpd = dctxh @ vh.transpose(0, 1, 3, 2)
    dvh = pd.transpose(0, 1, 3, 2) @ dctxh
    dprobs = nn.dropout_bwd(dpd, dmask)
    dscores = nn.softmax_bwd(dprobs, probs) * scale
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 1, 3, 2) @ qh
    dq = _merge_heads(dqh)
    dk = _merge_heads(dkh)
    dv = _merge_heads(dvh)
    dx_q, dwq, dbq = nn.linear_bwd(dq, cq)
    dx_k, dwk, dbk = nn.linear_bwd(dk, ck)
    dx_v, dwv, dbv = nn.linear_bwd(dv, cv)
    dx = dx_q + dx_k + dx_v
    grads = {
        f"{prefix}.wq": dwq, f"{prefix}.bq": dbq,
        f"{prefix}.wk": dwk, f"{prefix}.bk": dbk,
        f"{prefix}.wv": dwv, f"{prefix}.bv": dbv,
        f"{prefix}.wo": dwo, f"{prefix}.bo": dbo,
    }
    return dx, grads


def _block_fwd(x, params, layer, cfg, kmask, train, rng):
    p = f"enc.{layer}"
    y, c_ln1 = nn.layernorm_fwd(x, params[f"{p}.ln1.g"], params[f"{p}.ln1.b"], cfg.ln_eps)
    attn, c_attn = _attention_fwd(y, params, f"{p}.attn", cfg, kmask, train, rng)
    x1 = x + attn
    z, c_ln2 = nn.layernorm_fwd(x1, params[f"{p}.ln2.g"], params[f"{p}.ln2.b"], cfg.ln_eps)
    h1, c_fc1 = nn.linear_fwd(z, params[f"{p}.ffn.w1"], params[f"{p}.ffn.b1"])
    a, c_act = nn.gelu_fwd(h1)
    h2, c_fc2 = nn.linear_fwd(a, params[f"{p}.ffn.w2"], params[f"{p}.ffn.b2"])
    hd, c_drop = nn.dropout_fwd(h2, cfg.dropout, rng, train)
    x2 = x1 + hd
    cache = (c_ln1, c_attn, c_ln2, c_fc1, c_act, c_fc2, c_drop, p)
    return x2, cache


def _block_bwd(dout, cache, cfg):
    c_ln1, c_attn, c_ln2, c_fc1, c_act, c_fc2, c_drop, p = cache
    grads: dict[str, np.ndarray] = {}
    dh2 = nn.dropout_bwd(dout, c_drop)
    da, dw2, db2 = nn.linear_bwd(dh2, c_fc2)
    dh1 = nn.gelu_bwd(da, c_act)
    dz, dw1, db1 = nn.linear_bwd(dh1, c_fc1)
    dx1_ffn, dg2, dbeta2 = nn.layernorm_bwd(dz, c_ln2)
    dx1 = dout + dx1_ffn
    dattn = dx1
    dy, attn_grads = _attention_bwd(dattn, c_attn, cfg)
    dx_ln1, dg1, dbeta1 = nn.layernorm_bwd(dy, c_ln1)
    dx = dx1 + dx_ln1
    grads.update(attn_grads)
    grads[f"{p}.ln1.g"] = dg1
    grads[f"{p}.ln1.b"] = dbeta1
    grads[f"{p}.ln2.g"] = dg2
    grads[f"{p}.ln2.b"] = dbeta2
    grads[f"{p}.ffn.w1"] = dw1
    grads[f"{p}.ffn.b1"] = db1
    grads[f"{p}.ffn.w2"] = dw2
    grads[f"{p}.ffn.b2"] = db2
    return dx, grads


def encode(params: dict, cfg: EncoderConfig, seq: EmbeddingSequence, *,
           train: bool = False, rng: np.random.Generator | None = None):
    """Run the encoder stack; returns (EncoderOutput, cache).

    Masked positions neither attend nor are attended to (their keys are
    excluded from every softmax; their own query rows are discarded
    downstream by the mask-aware pooling and losses).
    """
    if not seq.positions_applied:
        raise ValueError("encode expects positions_applied; call add_positions first")
    if seq.values.shape[-1] != cfg.d_model:
        raise ValueError(
            f"embedding width {seq.values.shape[-1]} does not match d_model {cfg.d_model}"
        )
    if train and cfg.dropout > 0.0 and rng is None:
        raise ValueError("train-mode encode with dropout needs an rng")
    kmask = None if bool(seq.mask.all()) else seq.mask[:, None, None, :]
    x = seq.values
    caches = []
    for i in range(cfg.layers):
        x, cache = _block_fwd(x, params, i, cfg, kmask, train, rng)
        if not np.isfinite(x).all():
            raise FloatingPointError(f"non-finite activations after encoder layer {i}")
        caches.append(cache)
    states, c_lnf = nn.layernorm_fwd(x, params["enc.ln_f.g"], params["enc.ln_f.b"], cfg.ln_eps)
    caches.append(c_lnf)
    out = EncoderOutput(states=states, mask=seq.mask)
    return out, caches


def encode_backward(caches: list, dstates: np.ndarray, cfg: EncoderConfig):
    """Backward through encode; returns (d_input_values, grads)."""
    grads: dict[str, np.ndarray] = {}
    c_lnf = caches.pop()
    dx, dgf, dbf = nn.layernorm_bwd(dstates, c_lnf)
    grads["enc.ln_f.g"] = dgf
    grads["enc.ln_f.b"] = dbf
    while caches:
        dx, g = _block_bwd(dx, caches.pop(), cfg)
        nn.accumulate(grads, g)
    return dx, grads


def pool_project(params: dict, out: EncoderOutput):
    """Masked mean over valid positions, then a learned 256 -> 128 map.

    Fills out.pooled and returns (pooled, cache).
    """
    mask = out.mask
    n_valid = mask.sum(axis=1)
    if (n_valid == 0).any():
        raise ValueError("pool_project: row with no valid positions")
    m = mask[..., None].astype(out.states.dtype)
    denom = n_valid.astype(out.states.dtype)[:, None]
    mean = (out.states * m).sum(axis=1) / denom
    pooled, lin_cache = nn.linear_fwd(mean, params["pool.w"], params["pool.b"])
    out.pooled = pooled
    return pooled, (lin_cache, mask, denom, out.states.shape)


def pool_project_backward(dpooled: np.ndarray, cache):
    lin_cache, mask, denom, states_shape = cache
    dmean, dw, db = nn.linear_bwd(dpooled, lin_cache)
    dstates = np.zeros(states_shape, dtype=dpooled.dtype)
    dstates += (dmean / denom)[:, None, :]
    dstates *= mask[..., None]
    return dstates, {"pool.w": dw, "pool.b": db}


def per_position_logits(params: dict, out: EncoderOutput):
    """Shared affine map 256 -> 1 at every position (detection head)."""
    logits, lin_cache = nn.linear_fwd(out.states, params["detect.w"], params["detect.b"])
    return logits[..., 0], lin_cache


def per_position_logits_backward(dlogits: np.ndarray, cache):
    dstates, dw, db = nn.linear_bwd(dlogits[..., None], cache)
    return dstates, {"detect.w": dw, "detect.b": db}
