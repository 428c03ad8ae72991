"""Tour of raw-input canonicalization: images, audio, text, and sensors.

Each modality has one entry point that maps raw data to the array a
DatasetSpec promises. Everything downstream (embedding, encoder) only ever
sees those canonical shapes.

Run from the repository root:

    python3 demos/preprocessing_tour.py
"""

import numpy as np

from dapt import load_spec
from dapt.preprocess import (bilinear_resize, preprocess_audio,
                             preprocess_image, preprocess_sensor,
                             preprocess_text, spectrogram_frame_count)
from dapt.tokenizers import WhitespaceTokenizer

rng = np.random.default_rng(0)

# ----------------------------------------------------------------------
# 1. Images: resize routes and channel handling
# ----------------------------------------------------------------------
#
# A 320x320 single-channel scan goes through the "resize" route and comes
# out 3x224x224 (graylevels replicated across RGB); a 32x32 photo passes
# through untouched except for scaling and normalization.

scan = rng.integers(0, 256, size=(320, 320), dtype=np.uint8)
x = preprocess_image(scan, load_spec("chexpert"))
print(f"x-ray  {scan.shape} uint8 -> {x.shape} {x.dtype}")

photo = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
x = preprocess_image(photo, load_spec("cifar10"))
print(f"photo  {photo.shape} uint8 -> {x.shape} {x.dtype}")

# Bilinear resize itself is separable; a constant image stays constant.
flat = np.full((7, 5, 1), 3.25)
assert np.allclose(bilinear_resize(flat, 224, 224), 3.25)
print("constant image stays constant under bilinear resize")

# ----------------------------------------------------------------------
# 2. Audio: waveform -> log-mel spectrogram
# ----------------------------------------------------------------------
#
# A random subsegment of the waveform is windowed into frames (center
# padding makes the count exact), projected through a mel filterbank, and
# converted to decibels. 150526 samples at hop 672 give 224 frames, matching
# the 224-frame spectrograms the audio specs declare.

spec = load_spec("librispeech")
wave = rng.normal(size=200_000)
mel = preprocess_audio(wave, spec, rng)
frames = spectrogram_frame_count(spec.audio.segment_samples, spec.audio.hop)
print(f"\nwaveform {wave.shape} -> mel {mel.shape} "
      f"(frame count {frames} = 1 + {spec.audio.segment_samples}//{spec.audio.hop})")

# ----------------------------------------------------------------------
# 3. Text: whitespace tokenizer, truncation, padding
# ----------------------------------------------------------------------

tok = WhitespaceTokenizer.from_corpus([
    "the quick brown fox", "the lazy dog", "the fox jumps",
])
ids, mask = preprocess_text("the fox watches the dog", tok, max_len=8)
print(f"\nvocab size {tok.vocab_size}, pad={tok.pad_id} unk={tok.unk_id} sep={tok.sep_id}")
print(f"ids  {ids.tolist()}")
print(f"mask {mask.astype(int).tolist()}")
print(f"decoded: '{tok.decode(ids[mask])}'   (out-of-vocabulary words collapse to unk)")

# ----------------------------------------------------------------------
# 4. Sensors: windowing and per-channel standardization
# ----------------------------------------------------------------------
#
# Sensor channels mix physical units, so each sampled window is standardized
# per channel; every channel of the output has zero mean and unit variance.

recording = rng.normal(size=(52, 1000)) * 40.0 + 17.0
window = preprocess_sensor(recording, load_spec("pamap2"), rng)
print(f"\nsensor {recording.shape} -> window {window.shape}")
print(f"per-channel mean ~ {np.abs(window.mean(axis=1)).max():.2e}, "
      f"std ~ {window.std(axis=1).mean():.4f}")
