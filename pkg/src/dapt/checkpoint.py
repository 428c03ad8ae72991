"""Single-file checkpoint container.

Layout: magic, u32 format version, u64 header length, header JSON, raw
little-endian array payload, trailing sha256 over header + payload. The
header names every entry with dtype/shape/offset and echoes the training
config, step counter, and seed. The format is deliberately timestamp-free so
identical training runs produce bitwise identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"DAPTCKPT"
FORMAT_VERSION = 1
_DIGEST_BYTES = 32


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    step: int
    seed: int
    config: dict
    opt_m: dict[str, np.ndarray] | None = None
    opt_v: dict[str, np.ndarray] | None = None
    opt_t: int = 0
    format_version: int = FORMAT_VERSION
    digest: str | None = None

    @property
    def checkpoint_id(self) -> str:
        """Short content id (first 12 hex chars of the container digest)."""
        if self.digest is None:
            raise ValueError("checkpoint has not been saved or loaded yet")
        return self.digest[:12]


def _entries(ck: Checkpoint):
    for name in sorted(ck.params):
        yield "param", name, ck.params[name]
    if ck.opt_m is not None:
        for name in sorted(ck.opt_m):
            yield "opt_m", name, ck.opt_m[name]
        for name in sorted(ck.opt_v):
            yield "opt_v", name, ck.opt_v[name]


def save_checkpoint(ck: Checkpoint, path) -> str:
    """Write the container; returns the hex digest of its contents."""
    metas = []
    chunks = []
    offset = 0
    for kind, name, arr in _entries(ck):
        a = np.ascontiguousarray(arr)
        raw = a.tobytes()
        metas.append({
            "kind": kind,
            "name": name,
            "dtype": a.dtype.str,     # '<f4' style: byte order pinned
            "shape": list(a.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "step": int(ck.step),
        "seed": int(ck.seed),
        "opt_t": int(ck.opt_t),
        "has_optimizer": ck.opt_m is not None,
        "config": ck.config,
        "entries": metas,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    payload = b"".join(chunks)
    digest = hashlib.sha256(header_bytes + payload).hexdigest()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)
        f.write(bytes.fromhex(digest))
    ck.digest = digest
    return digest


def load_checkpoint(path) -> Checkpoint:
    """Read and verify a container written by save_checkpoint."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise ValueError(
            f"{path}: checkpoint format version {version} unsupported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    (hlen,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    header_bytes = blob[pos:pos + hlen]
    pos += hlen
    payload = blob[pos:-_DIGEST_BYTES]
    stored = blob[-_DIGEST_BYTES:].hex()
    digest = hashlib.sha256(header_bytes + payload).hexdigest()
    if digest != stored or len(blob) < pos + _DIGEST_BYTES:
        raise ValueError(f"{path}: integrity digest mismatch (corrupt or truncated)")
    header = json.loads(header_bytes)
    params: dict[str, np.ndarray] = {}
    opt_m: dict[str, np.ndarray] = {}
    opt_v: dict[str, np.ndarray] = {}
    for meta in header["entries"]:
        raw = payload[meta["offset"]:meta["offset"] + meta["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(meta["dtype"])).reshape(meta["shape"]).copy()
        {"param": params, "opt_m": opt_m, "opt_v": opt_v}[meta["kind"]][meta["name"]] = arr
    has_opt = header.get("has_optimizer", False)
    ck = Checkpoint(
        params=params,
        step=header["step"],
        seed=header["seed"],
        config=header["config"],
        opt_m=opt_m if has_opt else None,
        opt_v=opt_v if has_opt else None,
        opt_t=header["opt_t"],
        format_version=version,
        digest=digest,
    )
    return ck
