"""Checkpoint container: round trip, integrity, bitwise reproducibility."""

import numpy as np
import pytest

from dapt.checkpoint import Checkpoint, load_checkpoint, save_checkpoint


def _sample(with_opt=True):
    r = np.random.default_rng(3)
    params = {
        "enc.0.w": r.normal(size=(4, 4)).astype(np.float32),
        "embed.tokens.table": r.normal(size=(7, 4)).astype(np.float32),
    }
    kw = {}
    if with_opt:
        kw = dict(opt_m={k: np.zeros_like(v) for k, v in params.items()},
                  opt_v={k: np.ones_like(v) for k, v in params.items()},
                  opt_t=17)
    return Checkpoint(params=params, step=42, seed=9,
                      config={"spec_name": "tiny", "objective": "emix"}, **kw)


def test_round_trip_preserves_everything(tmp_path):
    path = tmp_path / "ck.dapt"
    ck = _sample()
    save_checkpoint(ck, path)
    loaded = load_checkpoint(path)
    assert loaded.step == 42 and loaded.seed == 9
    assert loaded.config == {"spec_name": "tiny", "objective": "emix"}
    assert loaded.opt_t == 17
    for k in ck.params:
        assert np.array_equal(loaded.params[k], ck.params[k])
        assert loaded.params[k].dtype == ck.params[k].dtype
        assert np.array_equal(loaded.opt_v[k], ck.opt_v[k])


def test_round_trip_without_optimizer_state(tmp_path):
    path = tmp_path / "ck.dapt"
    save_checkpoint(_sample(with_opt=False), path)
    loaded = load_checkpoint(path)
    assert loaded.opt_m is None and loaded.opt_t == 0


def test_save_is_bitwise_reproducible(tmp_path):
    a, b = tmp_path / "a.dapt", tmp_path / "b.dapt"
    save_checkpoint(_sample(), a)
    save_checkpoint(_sample(), b)
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_id_is_stable_and_requires_save(tmp_path):
    ck = _sample()
    with pytest.raises(ValueError):
        _ = ck.checkpoint_id
    save_checkpoint(ck, tmp_path / "ck.dapt")
    first = ck.checkpoint_id
    assert len(first) == 12
    loaded = load_checkpoint(tmp_path / "ck.dapt")
    assert loaded.checkpoint_id == first


def test_corruption_is_detected(tmp_path):
    path = tmp_path / "ck.dapt"
    save_checkpoint(_sample(), path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="corrupt"):
        load_checkpoint(path)


def test_truncation_is_detected(tmp_path):
    path = tmp_path / "ck.dapt"
    save_checkpoint(_sample(), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_wrong_magic_is_rejected(tmp_path):
    path = tmp_path / "ck.dapt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic|container"):
        load_checkpoint(path)


def test_loaded_arrays_are_writable_copies(tmp_path):
    path = tmp_path / "ck.dapt"
    save_checkpoint(_sample(), path)
    loaded = load_checkpoint(path)
    loaded.params["enc.0.w"][0, 0] = 123.0   # must not raise
    assert loaded.params["enc.0.w"].flags.writeable
