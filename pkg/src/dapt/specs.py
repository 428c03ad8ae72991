"""Dataset shape registry.

Each :class:`DatasetSpec` records the input dimensions, patch or segment
size, derived sequence length, and batch size for one dataset, plus the
preprocessing constants the adapters need (normalization statistics, pixel
pipeline route, audio framing parameters). The registry preloads one entry
per supported real dataset and one per synthetic desk-scale domain.

The registry also round-trips through a versioned INI document so external
tools can inspect or pin the shapes without importing this package.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

MODALITIES = ("image2d", "spectrogram2d", "series1d", "tokens", "image_text_pair")

# Pixel preprocessing routes (see preprocess.preprocess_image):
#   "none"        32x32 natural images pass through unchanged
#   "resize"      direct bilinear resize to 224x224 (medical imaging)
#   "resize_crop" resize to 640x480, center-crop 480x480, resize to 224x224
PIXEL_PIPELINES = ("none", "resize", "resize_crop")

REGISTRY_FORMAT_VERSION = 1


@dataclass(frozen=True)
class AudioParams:
    """Spectrogram framing constants for speech specs.

    ``db_to_power`` controls the final scaling stage: when True (default) the
    log-mel decibel values are converted back to power scale (10^(dB/10))
    before normalization. Disabling it keeps decibel-scaled features, the
    more common convention; both are supported because published pipelines
    disagree on the direction.
    """

    segment_samples: int = 150526
    hop: int = 672
    n_fft: int = 2048
    n_mels: int = 224
    fmin: float = 0.0
    fmax: float = 8000.0
    db_to_power: bool = True
    db_floor: float = 1e-10


def derived_sequence_length(modality: str, input_dims, patch_dims) -> int:
    """Sequence length implied by the shape arithmetic for one modality."""
    if modality in ("image2d", "spectrogram2d"):
        _, h, w = input_dims
        ph, pw = patch_dims
        return (h // ph) * (w // pw)
    if modality == "series1d":
        _, t = input_dims
        (seg,) = patch_dims
        return t // seg
    if modality == "tokens":
        (max_tokens,) = input_dims
        return max_tokens
    if modality == "image_text_pair":
        img_dims, text_dims = input_dims
        img_patch = patch_dims
        return derived_sequence_length("image2d", img_dims, img_patch) + text_dims[0]
    raise ValueError(f"Unknown modality '{modality}'. Valid: {MODALITIES}")


@dataclass(frozen=True)
class DatasetSpec:
    """One registry row: shapes, batch size, and preprocessing constants."""

    name: str
    modality: str
    input_dims: tuple
    patch_dims: tuple | None
    sequence_length: int
    batch_size: int
    num_train: int
    num_val: int
    vocab_size: int | None = None
    norm_mean: tuple = (0.0,)
    norm_std: tuple = (1.0,)
    pixel_pipeline: str | None = None
    audio: AudioParams | None = None
    synthetic: bool = False

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"Unknown modality '{self.modality}'. Valid: {MODALITIES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.pixel_pipeline is not None and self.pixel_pipeline not in PIXEL_PIPELINES:
            raise ValueError(
                f"Unknown pixel_pipeline '{self.pixel_pipeline}'. Valid: {PIXEL_PIPELINES}"
            )
        self._check_divisibility()
        expect = derived_sequence_length(self.modality, self.input_dims, self.patch_dims)
        if self.sequence_length != expect:
            raise ValueError(
                f"sequence_length {self.sequence_length} does not match shape "
                f"arithmetic {expect} for spec '{self.name}'"
            )

    def _check_divisibility(self):
        if self.modality in ("image2d", "spectrogram2d"):
            _, h, w = self.input_dims
            ph, pw = self.patch_dims
            if h % ph or w % pw:
                raise ValueError(f"patch {self.patch_dims} does not divide {self.input_dims}")
        elif self.modality == "series1d":
            _, t = self.input_dims
            (seg,) = self.patch_dims
            if t % seg:
                raise ValueError(f"segment {seg} does not divide length {t}")
        elif self.modality == "image_text_pair":
            _, h, w = self.input_dims[0]
            ph, pw = self.patch_dims
            if h % ph or w % pw:
                raise ValueError(f"patch {self.patch_dims} does not divide {self.input_dims[0]}")

    @property
    def image_dims(self) -> tuple:
        """Image component dims: (C, H, W) for image-bearing modalities."""
        if self.modality == "image_text_pair":
            return self.input_dims[0]
        if self.modality in ("image2d", "spectrogram2d"):
            return self.input_dims
        raise ValueError(f"spec '{self.name}' has no image component")

    @property
    def text_len(self) -> int:
        if self.modality == "tokens":
            return self.input_dims[0]
        if self.modality == "image_text_pair":
            return self.input_dims[1][0]
        raise ValueError(f"spec '{self.name}' has no text component")


# ---------------------------------------------------------------------------
# Built-in registry
# ---------------------------------------------------------------------------

_CIFAR_SHAPE = dict(
    modality="image2d",
    input_dims=(3, 32, 32),
    patch_dims=(4, 4),
    sequence_length=64,
    batch_size=64,
    pixel_pipeline="none",
)
_SPEECH_SHAPE = dict(
    modality="spectrogram2d",
    input_dims=(1, 224, 224),
    patch_dims=(16, 16),
    sequence_length=196,
    batch_size=64,
    audio=AudioParams(),
)
# BertTokenizer (bert-base-uncased) vocabulary size; parity adapters only.
_BERT_VOCAB = 30522
_TEXT_SHAPE = dict(
    modality="tokens",
    input_dims=(128,),
    patch_dims=None,
    sequence_length=128,
    batch_size=128,
    vocab_size=_BERT_VOCAB,
)
_PAIR_SHAPE = dict(
    modality="image_text_pair",
    input_dims=((3, 224, 224), (32,)),
    patch_dims=(16, 16),
    sequence_length=228,
    batch_size=64,
    vocab_size=_BERT_VOCAB,
    pixel_pipeline="resize_crop",
)


def _real_specs() -> list[DatasetSpec]:
    rows: list[DatasetSpec] = []

    def image(name, num_train, num_val):
        rows.append(DatasetSpec(name=name, num_train=num_train, num_val=num_val, **_CIFAR_SHAPE))

    def speech(name, num_train, num_val):
        rows.append(DatasetSpec(name=name, num_train=num_train, num_val=num_val, **_SPEECH_SHAPE))

    def text(name, num_train, num_val):
        rows.append(DatasetSpec(name=name, num_train=num_train, num_val=num_val, **_TEXT_SHAPE))

    image("cifar10", 50000, 10000)
    image("textures", 3760, 1880)
    image("aircraft", 6667, 3333)
    image("birds", 5994, 5794)
    image("traffic_signs", 600, 300)
    image("flowers", 6507, 1682)

    speech("librispeech", 145265, 8251)
    speech("voxceleb", 2148, 555)
    speech("fluent_speech", 26250, 3793)
    speech("google_speech", 115816, 11005)
    speech("audio_mnist", 24000, 6000)

    text("wikitext103", 1165029, 2461)
    text("cola", 8551, 1043)
    text("sst2", 67349, 872)
    text("mrpc", 3668, 408)
    text("qqp", 363846, 40430)
    text("stsb", 5749, 1500)
    text("mnli", 392702, 19647)
    text("qnli", 104743, 5463)
    text("rte", 2490, 277)
    text("wnli", 635, 71)

    rows.append(
        DatasetSpec(
            name="chexpert",
            modality="image2d",
            input_dims=(3, 224, 224),
            patch_dims=(16, 16),
            sequence_length=196,
            batch_size=64,
            num_train=223414,
            num_val=234,
            pixel_pipeline="resize",
        )
    )
    rows.append(
        DatasetSpec(
            name="pamap2",
            modality="series1d",
            input_dims=(52, 320),
            patch_dims=(5,),
            sequence_length=64,
            batch_size=256,
            num_train=50000,
            num_val=10000,
        )
    )
    rows.append(DatasetSpec(name="coco", num_train=117266, num_val=4952, **_PAIR_SHAPE))
    rows.append(DatasetSpec(name="vqa", num_train=248349, num_val=121512, **_PAIR_SHAPE))
    return rows


def _synthetic_specs() -> list[DatasetSpec]:
    common = dict(batch_size=8, num_train=2048, num_val=512, synthetic=True)
    return [
        DatasetSpec(
            name="synthetic_images",
            modality="image2d",
            input_dims=(3, 32, 32),
            patch_dims=(4, 4),
            sequence_length=64,
            pixel_pipeline="none",
            **common,
        ),
        DatasetSpec(
            name="synthetic_series",
            modality="series1d",
            input_dims=(52, 320),
            patch_dims=(5,),
            sequence_length=64,
            **common,
        ),
        DatasetSpec(
            name="synthetic_tokens",
            modality="tokens",
            input_dims=(128,),
            patch_dims=None,
            sequence_length=128,
            vocab_size=1024,
            **common,
        ),
        DatasetSpec(
            name="synthetic_pairs",
            modality="image_text_pair",
            input_dims=((3, 32, 32), (16,)),
            patch_dims=(4, 4),
            sequence_length=80,
            vocab_size=1024,
            **common,
        ),
    ]


_REGISTRY: dict[str, DatasetSpec] = {s.name: s for s in _real_specs() + _synthetic_specs()}


def registered_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def load_spec(name: str) -> DatasetSpec:
    """Look up a registered spec by name."""
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"Unknown dataset spec '{name}'. Registered: {', '.join(registered_names())}"
        ) from None


def all_specs() -> list[DatasetSpec]:
    return [_REGISTRY[n] for n in registered_names()]


# ---------------------------------------------------------------------------
# Registry document round trip
# ---------------------------------------------------------------------------

def _dims_str(dims) -> str:
    if isinstance(dims[0], tuple):
        return "+".join(_dims_str(d) for d in dims)
    return "x".join(str(d) for d in dims)


def _dims_parse(s: str):
    if "+" in s:
        return tuple(_dims_parse(part) for part in s.split("+"))
    return tuple(int(d) for d in s.split("x"))


def _floats_str(vals) -> str:
    return ",".join(repr(float(v)) for v in vals)


def _floats_parse(s: str) -> tuple:
    return tuple(float(v) for v in s.split(","))


def write_registry(path, specs: list[DatasetSpec] | None = None) -> None:
    """Write the registry (default: all built-in specs) as a versioned INI file."""
    specs = all_specs() if specs is None else specs
    cp = configparser.ConfigParser()
    cp["registry"] = {"format_version": str(REGISTRY_FORMAT_VERSION)}
    for s in specs:
        sec = {
            "modality": s.modality,
            "input_dims": _dims_str(s.input_dims),
            "patch_dims": "-" if s.patch_dims is None else _dims_str(s.patch_dims),
            "sequence_length": str(s.sequence_length),
            "batch_size": str(s.batch_size),
            "num_train": str(s.num_train),
            "num_val": str(s.num_val),
            "norm_mean": _floats_str(s.norm_mean),
            "norm_std": _floats_str(s.norm_std),
            "synthetic": str(s.synthetic).lower(),
        }
        if s.vocab_size is not None:
            sec["vocab_size"] = str(s.vocab_size)
        if s.pixel_pipeline is not None:
            sec["pixel_pipeline"] = s.pixel_pipeline
        if s.audio is not None:
            a = s.audio
            sec["audio"] = (
                f"segment_samples={a.segment_samples};hop={a.hop};n_fft={a.n_fft};"
                f"n_mels={a.n_mels};fmin={a.fmin};fmax={a.fmax};"
                f"db_to_power={str(a.db_to_power).lower()};db_floor={a.db_floor}"
            )
        cp[s.name] = sec
    buf = io.StringIO()
    cp.write(buf)
    with open(path, "w", encoding="utf-8") as f:
        f.write(buf.getvalue())


def _parse_audio(s: str) -> AudioParams:
    kv = dict(item.split("=", 1) for item in s.split(";"))
    return AudioParams(
        segment_samples=int(kv["segment_samples"]),
        hop=int(kv["hop"]),
        n_fft=int(kv["n_fft"]),
        n_mels=int(kv["n_mels"]),
        fmin=float(kv["fmin"]),
        fmax=float(kv["fmax"]),
        db_to_power=kv["db_to_power"] == "true",
        db_floor=float(kv["db_floor"]),
    )


def read_registry(path) -> dict[str, DatasetSpec]:
    """Parse a registry document written by :func:`write_registry`."""
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as f:
        cp.read_file(f)
    if "registry" not in cp:
        raise ValueError(f"{path}: missing [registry] section")
    version = int(cp["registry"].get("format_version", "-1"))
    if version != REGISTRY_FORMAT_VERSION:
        raise ValueError(
            f"{path}: registry format_version {version} unsupported "
            f"(expected {REGISTRY_FORMAT_VERSION})"
        )
    out: dict[str, DatasetSpec] = {}
    for name in cp.sections():
        if name == "registry":
            continue
        sec = cp[name]
        patch = sec["patch_dims"]
        out[name] = DatasetSpec(
            name=name,
            modality=sec["modality"],
            input_dims=_dims_parse(sec["input_dims"]),
            patch_dims=None if patch == "-" else _dims_parse(patch),
            sequence_length=int(sec["sequence_length"]),
            batch_size=int(sec["batch_size"]),
            num_train=int(sec["num_train"]),
            num_val=int(sec["num_val"]),
            vocab_size=int(sec["vocab_size"]) if "vocab_size" in sec else None,
            norm_mean=_floats_parse(sec["norm_mean"]),
            norm_std=_floats_parse(sec["norm_std"]),
            pixel_pipeline=sec.get("pixel_pipeline") or None,
            audio=_parse_audio(sec["audio"]) if "audio" in sec else None,
            synthetic=sec.get("synthetic", "false") == "true",
        )
    return out
