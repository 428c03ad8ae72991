"""Input canonicalization: resizing, spectrograms, text, pairs, sensors."""

import numpy as np
import pytest

from dapt import rng as rngmod
from dapt.preprocess import (bilinear_resize, mel_filterbank, pair_vqa,
                             preprocess_audio, preprocess_image,
                             preprocess_sensor, preprocess_text,
                             spectrogram_frame_count, stft_power)
from dapt.specs import load_spec
from dapt.tokenizers import WhitespaceTokenizer


# ----------------------------------------------------------------------
# Images
# ----------------------------------------------------------------------

def test_resize_same_size_is_identity():
    r = rngmod.stream(0, 0)
    img = r.normal(size=(5, 7, 3))
    np.testing.assert_allclose(bilinear_resize(img, 5, 7), img, atol=1e-12)


def test_resize_constant_image_stays_constant():
    img = np.full((4, 4, 3), 2.5)
    out = bilinear_resize(img, 9, 13)
    np.testing.assert_allclose(out, 2.5, atol=1e-12)


def test_resize_two_to_four_oracle():
    # Half-pixel centers: output pixel centers at input coords
    # -0.25, 0.25, 0.75, 1.25 (clamped), so a [0, 1] ramp maps to
    # [0, 0.25, 0.75, 1].
    img = np.array([[0.0, 1.0]])[:, :, None]
    out = bilinear_resize(img, 1, 4)[0, :, 0]
    np.testing.assert_allclose(out, [0.0, 0.25, 0.75, 1.0], atol=1e-12)


def test_resize_downsample_averages():
    img = np.arange(4, dtype=np.float64).reshape(1, 4, 1)
    out = bilinear_resize(img, 1, 2)[0, :, 0]
    np.testing.assert_allclose(out, [0.5, 2.5], atol=1e-12)


def test_preprocess_image_pipelines():
    spec = load_spec("cifar10")          # pipeline "none": size must match
    r = rngmod.stream(1, 0)
    raw = (r.random(size=(32, 32, 3)) * 255).astype(np.uint8)
    out = preprocess_image(raw, spec)
    assert out.shape == (3, 32, 32) and out.dtype == np.float32
    assert out.max() <= 1.0 and out.min() >= 0.0
    with pytest.raises(ValueError):
        preprocess_image(np.zeros((16, 16, 3)), spec)

    spec = load_spec("chexpert")         # pipeline "resize"
    raw = r.random(size=(100, 140))      # grayscale 2-d input
    out = preprocess_image(raw, spec)
    assert out.shape == (3, 224, 224)

    spec = load_spec("coco")             # pipeline "resize_crop": 640x480 path
    raw = (r.random(size=(480, 640, 3)) * 255).astype(np.uint8)
    out = preprocess_image(raw, spec)
    assert out.shape == (3, 224, 224)


def test_preprocess_image_rejects_bad_channels():
    with pytest.raises(ValueError):
        preprocess_image(np.zeros((32, 32, 4)), load_spec("cifar10"))


# ----------------------------------------------------------------------
# Audio
# ----------------------------------------------------------------------

def test_frame_count_matches_mel_axis():
    spec = load_spec("librispeech")
    p = spec.audio
    assert spectrogram_frame_count(p.segment_samples, p.hop) == 224


def test_stft_power_shape_and_nonnegativity():
    wave = rngmod.stream(2, 0).normal(size=4096)
    power = stft_power(wave, n_fft=512, hop=128)
    assert power.shape == (257, 1 + 4096 // 128)
    assert (power >= 0).all()


def test_mel_filterbank_covers_band_without_gaps():
    fb = mel_filterbank(64, 2048, 16000.0, 0.0, 8000.0)
    assert fb.shape == (64, 1025)
    assert (fb >= 0).all()
    # Interior frequency bins between the first and last filter centers get
    # nonzero total weight: triangles overlap, no dead bands.
    support = fb.sum(axis=0)
    assert (support[20:-300] > 0).all()


def test_mel_filterbank_htk_scale_spot_value():
    # HTK mel of 1000 Hz is 2595 log10(1 + 1000/700) = 999.9855...
    m = 2595.0 * np.log10(1.0 + 1000.0 / 700.0)
    assert abs(m - 999.98557) < 1e-4


def test_preprocess_audio_emits_full_grid():
    spec = load_spec("audio_mnist")
    wave = rngmod.stream(2, 1).normal(size=8000)   # shorter than the segment
    out = preprocess_audio(wave, spec, rngmod.stream(2, 2))
    assert out.shape == (1, 224, 224)
    assert out.dtype == np.float32
    assert np.isfinite(out).all()


def test_preprocess_audio_rejects_bad_waveforms():
    spec = load_spec("audio_mnist")
    with pytest.raises(ValueError):
        preprocess_audio(np.array([]), spec, rngmod.stream(0, 0))
    with pytest.raises(ValueError):
        preprocess_audio(np.array([1.0, np.nan]), spec, rngmod.stream(0, 0))


# ----------------------------------------------------------------------
# Text and pairs
# ----------------------------------------------------------------------

def _tok():
    return WhitespaceTokenizer(["the", "cat", "sat", "mat", "dog", "ran"])


def test_preprocess_text_truncates_prefix_and_pads():
    tok = _tok()
    ids, mask = preprocess_text("the cat sat", tok, max_len=5)
    assert ids.shape == (5,)
    assert mask.tolist() == [True, True, True, False, False]
    assert (ids[3:] == tok.pad_id).all()
    long_ids, long_mask = preprocess_text("the cat sat the cat sat", tok, max_len=4)
    assert long_mask.all()
    np.testing.assert_array_equal(long_ids, tok.encode("the cat sat the")[:4])


def test_unknown_words_map_to_unk():
    tok = _tok()
    ids, _ = preprocess_text("the zebra", tok, max_len=2)
    assert ids[1] == tok.unk_id


def test_pair_vqa_builds_question_separator_answer():
    tok = _tok()
    r = rngmod.stream(3, 0)
    keeps = []
    for _ in range(400):
        ids, mask, label = pair_vqa("the cat", "sat", ["ran", "mat"], tok, r,
                                    max_len=8)
        keeps.append(label)
        n = int(mask.sum())
        assert ids[2] == tok.sep_id
        words = tok.decode(ids[:n]).split()
        assert words[:2] == ["the", "cat"]
        if label:
            assert words[-1] == "sat"
        else:
            assert words[-1] in ("ran", "mat")
    # Answer corruption is a fair coin.
    assert 0.42 < np.mean(keeps) < 0.58


def test_pair_vqa_requires_wrong_answers():
    with pytest.raises(ValueError):
        pair_vqa("q", "a", [], _tok(), rngmod.stream(0, 0))


# ----------------------------------------------------------------------
# Sensors
# ----------------------------------------------------------------------

def test_preprocess_sensor_windows_and_normalizes():
    spec = load_spec("pamap2")
    r = rngmod.stream(4, 0)
    series = r.normal(size=(52, 1000)) * 5 + 2
    out = preprocess_sensor(series, spec, rngmod.stream(4, 1))
    assert out.shape == (52, 320)
    np.testing.assert_allclose(out.mean(axis=1), 0, atol=1e-6)
    np.testing.assert_allclose(out.std(axis=1), 1, atol=1e-2)


def test_preprocess_sensor_validates_shape():
    spec = load_spec("pamap2")
    with pytest.raises(ValueError):
        preprocess_sensor(np.zeros((10, 1000)), spec, rngmod.stream(0, 0))
    with pytest.raises(ValueError):
        preprocess_sensor(np.zeros((52, 100)), spec, rngmod.stream(0, 0))
