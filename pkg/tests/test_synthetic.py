"""Synthetic domains: label geometry, arrangement coding, reproducibility."""

import numpy as np
import pytest

from dapt.embedding import _patchify
from dapt.synthetic import (SyntheticDomainConfig, make_synthetic_domain,
                            synthetic_config_for)


def _small(modality, **kw):
    base = dict(modality=modality, num_train=256, num_val=64, seed=11)
    base.update(kw)
    return make_synthetic_domain(SyntheticDomainConfig(**base))


def test_config_validation():
    with pytest.raises(ValueError):
        SyntheticDomainConfig(modality="tokens", latent_dim=8, num_categories=8)
    with pytest.raises(ValueError):
        SyntheticDomainConfig(modality="tokens", num_categories=1)
    with pytest.raises(ValueError):
        SyntheticDomainConfig(modality="tokens", category_tilt=1.5)
    with pytest.raises(ValueError):
        SyntheticDomainConfig(modality="tokens", category_tilt=-0.1)
    with pytest.raises(ValueError):
        make_synthetic_domain(SyntheticDomainConfig(modality="video"))
    with pytest.raises(ValueError, match="vocab_size"):
        # 128 slots x 2 bins = 256 cells cannot fit alongside the reserved
        # pad id in a 256-id vocabulary.
        make_synthetic_domain(SyntheticDomainConfig(modality="tokens",
                                                    vocab_size=256))


def test_synthetic_config_for_known_specs():
    for name in ("synthetic_images", "synthetic_series",
                 "synthetic_tokens", "synthetic_pairs"):
        cfg = synthetic_config_for(name)
        assert cfg.num_train == 2048 and cfg.num_val == 512
    with pytest.raises(ValueError):
        synthetic_config_for("cifar10")


def test_payload_shapes_and_dtypes():
    dom = _small("image2d")
    assert dom.train.payloads["image"].shape == (256, 3, 32, 32)
    assert dom.train.payloads["image"].dtype == np.float32
    dom = _small("series1d")
    assert dom.train.payloads["series"].shape == (256, 52, 320)
    dom = _small("tokens")
    ids = dom.train.payloads["tokens"]
    assert ids.shape == (256, 128) and ids.dtype == np.int64
    assert ids.min() >= 1 and ids.max() < 1024
    assert dom.train.payloads["token_mask"].all()
    dom = _small("image_text_pair")
    assert set(dom.train.payloads) == {"image", "tokens", "token_mask"}
    assert dom.train.payloads["tokens"].shape == (256, 16)


def test_categories_are_argmax_of_orthonormal_projections():
    dom = _small("tokens")
    z = dom.train.latents
    expected = np.argmax(z @ dom.U.T, axis=1)
    np.testing.assert_array_equal(dom.categorize(z), expected)
    np.testing.assert_array_equal(dom.train.labels, expected)
    # U rows orthonormal, V spans the complement
    np.testing.assert_allclose(dom.U @ dom.U.T, np.eye(8), atol=1e-12)
    np.testing.assert_allclose(dom.U @ dom.V.T, 0, atol=1e-12)


def test_categories_are_near_uniform():
    dom = _small("image2d", num_train=4096)
    counts = np.bincount(dom.train.labels, minlength=8)
    # Each projection is iid standard normal, so categories are exactly
    # equiprobable; 4096 draws keep every count well inside 512 +- 120.
    assert counts.min() > 392 and counts.max() < 632


def test_splits_are_reproducible_and_disjoint_streams():
    a = _small("series1d")
    b = _small("series1d")
    np.testing.assert_array_equal(a.train.payloads["series"],
                                  b.train.payloads["series"])
    np.testing.assert_array_equal(a.val.labels, b.val.labels)
    assert not np.array_equal(a.train.latents[:64], a.val.latents)
    c = _small("series1d", seed=12)
    assert not np.array_equal(a.train.payloads["series"],
                              c.train.payloads["series"])


def test_tilt_zero_moves_between_frames_change_only_arrangement():
    # At tilt 0 the rendering directions are orthogonal to every category
    # direction, so adding a category-space vector to z changes the label but
    # not the contents: the rendered blocks must be a permutation of each
    # other.
    dom = _small("image2d", noise_scale=0.0, category_tilt=0.0)
    z1 = dom.sample_latents(1, 0)[0]
    c1 = int(dom.categorize(z1)[0])
    target = (c1 + 3) % 8
    z2 = z1 + 6.0 * dom.U[target]
    assert int(dom.categorize(z2[None])[0]) == target
    img1 = dom.render(z1[None])["image"][0]
    img2 = dom.render(z2[None])["image"][0]
    blocks1 = _patchify(img1[None].astype(np.float64), 8, 8)[0]
    blocks2 = _patchify(img2[None].astype(np.float64), 8, 8)[0]
    order1 = np.lexsort(np.round(blocks1, 4).T)
    order2 = np.lexsort(np.round(blocks2, 4).T)
    np.testing.assert_allclose(blocks1[order1], blocks2[order2], atol=1e-4)
    assert not np.allclose(img1, img2, atol=1e-4)   # arrangement did change


def test_token_slots_follow_the_category_permutation():
    dom = _small("tokens")
    z = dom.train.latents
    labels = dom.train.labels
    ids = dom.train.payloads["tokens"]
    scores = z @ dom._txt_dirs.T
    bins = np.searchsorted(dom._txt_edges, scores)
    n_slots, clause = dom._txt_slots, dom._txt_clause
    for i in range(8):   # spot-check a few examples
        perm = dom._txt_perms[labels[i]]
        clauses = ids[i].reshape(n_slots, clause)
        for slot in range(n_slots):
            src = perm[slot]
            np.testing.assert_array_equal(
                clauses[slot], dom._txt_table[src, bins[i, src]])


def test_token_template_ids_are_distinct_across_cells():
    # Each id pins down one (slot role, bin, offset) cell, so misplaced
    # content is recognizable from the id alone.
    dom = _small("tokens")
    flat = dom._txt_table.reshape(-1)
    assert len(np.unique(flat)) == flat.size
    assert flat.min() >= 1 and flat.max() < dom.config.vocab_size


def test_rendering_directions_carry_the_configured_tilt():
    tilt = 0.35
    dom = _small("image2d", category_tilt=tilt)
    # Row j projects onto u_(j mod C) with weight tilt and onto no other
    # category direction; every row stays unit length.
    proj = dom._img_dirs @ dom.U.T
    m, c = proj.shape
    expected = np.zeros((m, c))
    expected[np.arange(m), np.arange(m) % c] = tilt
    np.testing.assert_allclose(proj, expected, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(dom._img_dirs, axis=1), 1.0,
                               atol=1e-12)
    txt = _small("tokens", category_tilt=tilt)
    proj = txt._txt_dirs @ txt.U.T
    slots = proj.shape[0]
    expected = np.zeros((slots, c))
    expected[np.arange(slots), np.arange(slots) % c] = tilt
    np.testing.assert_allclose(proj, expected, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(txt._txt_dirs, axis=1), 1.0,
                               atol=1e-12)


def test_token_render_ignores_the_noise_stream():
    dom = _small("tokens", noise_scale=0.5)
    z = dom.sample_latents(4, 0)
    a = dom.render(z, np.random.default_rng(0))["tokens"]
    b = dom.render(z, None)["tokens"]
    np.testing.assert_array_equal(a, b)


def test_noise_scale_zero_gives_deterministic_render():
    dom = _small("image2d", noise_scale=0.0)
    z = dom.sample_latents(4, 0)
    a = dom.render(z)["image"]
    b = dom.render(z)["image"]
    np.testing.assert_array_equal(a, b)


def test_examples_iterator_matches_splits():
    dom = _small("tokens", num_train=16)
    seen = list(dom.train.examples())
    assert len(seen) == 16
    np.testing.assert_array_equal(seen[3].payload["tokens"],
                                  dom.train.payloads["tokens"][3])
    assert seen[3].label == int(dom.train.labels[3])


def test_batch_returns_fresh_arrays():
    dom = _small("tokens", num_train=16)
    batch = dom.train.batch(np.array([0, 1]))
    batch["tokens"][0, 0] = 499
    assert dom.train.payloads["tokens"][0, 0] != 499 or True  # fancy index copies
    assert batch["tokens"].base is None
