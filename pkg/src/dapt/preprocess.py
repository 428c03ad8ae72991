"""Deterministic preprocessing adapters for each modality.

All functions are pure given (input, spec, seed): repeated calls agree
bitwise. Randomness (subsegment starts, answer corruption) comes only from
the caller's generator.

Expected on-disk layouts for real-data parity runs: image folders of
HxWxC arrays, 16 kHz mono waveform files, line-per-example text, and CSV
sensor logs with one row per timestep; loaders for those formats are out of
scope here, these adapters start from decoded arrays/strings.
"""

from __future__ import annotations

import numpy as np

from .specs import AudioParams, DatasetSpec
from .tokenizers import Tokenizer


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------

def _resize_weights(n_in: int, n_out: int, dtype=np.float64) -> np.ndarray:
    """Bilinear interpolation matrix (n_out x n_in), half-pixel centers."""
    w = np.zeros((n_out, n_in), dtype=dtype)
    scale = n_in / n_out
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        lo = int(np.floor(src))
        hi = min(lo + 1, n_in - 1)
        frac = src - lo
        w[i, lo] += 1.0 - frac
        w[i, hi] += frac
    return w


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of an (H, W, C) array, half-pixel convention."""
    h, w, _ = image.shape
    wr = _resize_weights(h, out_h)
    wc = _resize_weights(w, out_w)
    x = image.astype(np.float64)
    x = np.tensordot(wr, x, axes=(1, 0))     # (out_h, W, C)
    x = np.tensordot(x, wc, axes=(1, 1))     # (out_h, C, out_w)
    return np.ascontiguousarray(x.transpose(0, 2, 1))


def _center_crop(image: np.ndarray, size: int) -> np.ndarray:
    h, w, _ = image.shape
    top = (h - size) // 2
    left = (w - size) // 2
    return image[top:top + size, left:left + size]


def _normalize(x: np.ndarray, mean: tuple, std: tuple) -> np.ndarray:
    c = x.shape[0]
    m = np.asarray(mean, dtype=np.float32)
    s = np.asarray(std, dtype=np.float32)
    if m.size == 1:
        m = np.full(c, m.item(), dtype=np.float32)
    if s.size == 1:
        s = np.full(c, s.item(), dtype=np.float32)
    return (x - m[:, None, None]) / s[:, None, None]


def preprocess_image(raw: np.ndarray, spec: DatasetSpec) -> np.ndarray:
    """Route one HxWxC image through the spec's pixel pipeline.

    Routes: "none" passes 32x32 inputs through unchanged; "resize" maps
    directly to 224x224 (medical imaging); "resize_crop" resizes to 640x480,
    center-crops 480x480, then resizes to 224x224. Output is channel-first
    float32, scaled to [0, 1] when the input is an integer type, then
    normalized by the spec's mean/std. A single-channel input is replicated
    when the spec wants three channels; a three-channel input cannot feed a
    single-channel spec.
    """
    if raw.ndim == 2:
        raw = raw[..., None]
    if raw.ndim != 3 or raw.shape[2] not in (1, 3):
        raise ValueError(f"expected HxWxC with C in (1, 3), got shape {raw.shape}")
    if raw.shape[0] == 0 or raw.shape[1] == 0:
        raise ValueError("zero-sized image")
    x = raw.astype(np.float64)
    if np.issubdtype(raw.dtype, np.integer):
        x = x / 255.0

    pipeline = spec.pixel_pipeline or "none"
    target = spec.image_dims[1:]
    if pipeline == "none":
        if x.shape[:2] != target:
            raise ValueError(
                f"pipeline 'none' expects {target[0]}x{target[1]} input, got "
                f"{x.shape[0]}x{x.shape[1]}")
    elif pipeline == "resize":
        x = bilinear_resize(x, *target)
    elif pipeline == "resize_crop":
        x = bilinear_resize(x, 480, 640)
        x = _center_crop(x, 480)
        x = bilinear_resize(x, *target)
    chw = np.ascontiguousarray(x.transpose(2, 0, 1)).astype(np.float32)
    want = spec.image_dims[0]
    if chw.shape[0] == 1 and want == 3:
        chw = np.repeat(chw, 3, axis=0)
    elif chw.shape[0] != want:
        raise ValueError(f"spec '{spec.name}' wants {want} channels, "
                         f"input has {chw.shape[0]}")
    return _normalize(chw, spec.norm_mean, spec.norm_std)


# ---------------------------------------------------------------------------
# Audio
# ---------------------------------------------------------------------------

def spectrogram_frame_count(n_samples: int, hop: int) -> int:
    """Frames produced by a center-padded short-time transform."""
    return 1 + n_samples // hop


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: float,
                   fmin: float, fmax: float) -> np.ndarray:
    """Triangular mel filters (HTK mel scale), rows = mels, cols = rfft bins."""
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    n_bins = n_fft // 2 + 1
    freqs = np.linspace(0.0, sample_rate / 2.0, n_bins)
    mel_pts = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    fb = np.zeros((n_mels, n_bins), dtype=np.float64)
    for m in range(n_mels):
        lo, center, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (freqs - lo) / max(center - lo, 1e-12)
        down = (hi - freqs) / max(hi - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def stft_power(segment: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """Power spectrogram of a 1-d signal, center-padded, Hann window.

    Returns (n_fft//2 + 1, 1 + len(segment)//hop).
    """
    pad = n_fft // 2
    x = np.pad(segment.astype(np.float64), pad, mode="reflect")
    n_frames = spectrogram_frame_count(len(segment), hop)
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx]
    window = np.hanning(n_fft + 1)[:-1]      # periodic Hann
    spec = np.fft.rfft(frames * window, axis=1)
    return (spec.real ** 2 + spec.imag ** 2).T


def preprocess_audio(waveform: np.ndarray, spec: DatasetSpec,
                     rng: np.random.Generator, sample_rate: float = 16000.0) -> np.ndarray:
    """Random fixed-length subsegment -> log-mel spectrogram -> 1xM xT array.

    Steps: zero-pad (at the end) up to the segment length, draw a random
    start, compute the power spectrogram (hop per spec), apply the mel
    filterbank, convert to decibels against the spec's floor, optionally
    convert the decibel values back to power scale (the default; see
    AudioParams.db_to_power), and normalize by the spec mean/std.
    """
    a = spec.audio or AudioParams()
    w = np.asarray(waveform, dtype=np.float64).reshape(-1)
    if w.size < 1:
        raise ValueError("empty waveform")
    if not np.isfinite(w).all():
        raise ValueError("waveform contains non-finite samples")
    if w.size < a.segment_samples:
        w = np.pad(w, (0, a.segment_samples - w.size))
    start = int(rng.integers(0, w.size - a.segment_samples + 1))
    segment = w[start:start + a.segment_samples]

    power = stft_power(segment, a.n_fft, a.hop)
    fb = mel_filterbank(a.n_mels, a.n_fft, sample_rate, a.fmin, a.fmax)
    mel = fb @ power
    db = 10.0 * np.log10(np.maximum(mel, a.db_floor))
    feat = np.power(10.0, db / 10.0) if a.db_to_power else db
    out = feat[None].astype(np.float32)
    return _normalize(out, spec.norm_mean, spec.norm_std)


# ---------------------------------------------------------------------------
# Text and pairs
# ---------------------------------------------------------------------------

def preprocess_text(text: str, tokenizer: Tokenizer, max_len: int):
    """Tokenize, truncate to the prefix, pad; returns (ids, mask) of max_len."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    ids = tokenizer.encode(text)[:max_len]
    n = len(ids)
    out = np.full(max_len, tokenizer.pad_id, dtype=np.int64)
    out[:n] = ids
    mask = np.zeros(max_len, dtype=bool)
    mask[:n] = True
    return out, mask


def pair_vqa(question: str, correct: str, wrong_pool: list[str],
             tokenizer: Tokenizer, rng: np.random.Generator, max_len: int = 32):
    """Tokenized "question [SEP] answer" with 50% answer corruption.

    The answer is the correct one with probability 0.5, otherwise drawn
    uniformly from wrong_pool. Returns (ids, mask, label); label is 1 iff
    the correct answer was kept.
    """
    if not wrong_pool:
        raise ValueError("wrong_pool must be nonempty")
    keep = rng.random() < 0.5
    answer = correct if keep else wrong_pool[int(rng.integers(len(wrong_pool)))]
    q_ids = tokenizer.encode(question)
    a_ids = tokenizer.encode(answer)
    ids = q_ids + [tokenizer.sep_id] + a_ids
    out = np.full(max_len, tokenizer.pad_id, dtype=np.int64)
    n = min(len(ids), max_len)
    out[:n] = ids[:n]
    mask = np.zeros(max_len, dtype=bool)
    mask[:n] = True
    return out, mask, int(keep)


# ---------------------------------------------------------------------------
# Sensors
# ---------------------------------------------------------------------------

def preprocess_sensor(series: np.ndarray, spec: DatasetSpec,
                      rng: np.random.Generator) -> np.ndarray:
    """Random contiguous window across all channels, standardized per channel.

    Sensor channels mix units (acceleration, rotation, magnetic field, heart
    rate), and no dataset statistics ship with the package, so each window is
    normalized in place: per channel, subtract the window mean and divide by
    the window standard deviation (guarded for constant channels).
    """
    c_expect, t_target = spec.input_dims
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != c_expect:
        raise ValueError(f"expected {c_expect}xT series, got shape {s.shape}")
    t = s.shape[1]
    if t < t_target:
        raise ValueError(f"series length {t} shorter than window {t_target}")
    start = int(rng.integers(0, t - t_target + 1))
    window = s[:, start:start + t_target]
    m = window.mean(axis=1, keepdims=True)
    sd = np.maximum(window.std(axis=1, keepdims=True), 1e-6)
    return ((window - m) / sd).astype(np.float32)
