"""Tokenizer interface plus the reference whitespace tokenizer.

The package treats tokenization as an interface: anything with encode(),
vocab_size, pad_id, and sep_id works. A whitespace+vocabulary reference
implementation ships for tests and synthetic data; adapters can wrap the
external tokenizers used for real-data parity runs (HuggingFace
BertTokenizer for English, XLMRobertaTokenizer for multilingual text), which
are deliberately not dependencies of this package.
"""

from __future__ import annotations

from typing import Iterable, Protocol, runtime_checkable


@runtime_checkable
class Tokenizer(Protocol):
    vocab_size: int
    pad_id: int
    unk_id: int
    sep_id: int

    def encode(self, text: str) -> list[int]: ...


class WhitespaceTokenizer:
    """Lowercased whitespace splitting over a fixed vocabulary.

    Reserved ids: 0 pad, 1 unk, 2 sep. The sep token's surface form is
    "[SEP]" so question/answer pairs can be spliced textually.
    """

    PAD, UNK, SEP = "<pad>", "<unk>", "[SEP]"

    def __init__(self, vocab: Iterable[str]):
        self._tokens = [self.PAD, self.UNK, self.SEP]
        seen = set(self._tokens)
        for tok in vocab:
            t = tok.lower()
            if t not in seen:
                seen.add(t)
                self._tokens.append(t)
        # Lookup is case-insensitive, so the "[SEP]" surface form matches too.
        self._ids = {t.lower(): i for i, t in enumerate(self._tokens)}
        self.pad_id = 0
        self.unk_id = 1
        self.sep_id = 2

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    def encode(self, text: str) -> list[int]:
        return [self._ids.get(tok.lower(), self.unk_id) for tok in text.split()]

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self._tokens[i] for i in ids)

    @classmethod
    def from_corpus(cls, lines: Iterable[str], max_size: int | None = None):
        """Build a vocabulary from whitespace tokens in frequency order."""
        counts: dict[str, int] = {}
        for line in lines:
            for tok in line.split():
                t = tok.lower()
                counts[t] = counts.get(t, 0) + 1
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        if max_size is not None:
            ordered = ordered[: max(0, max_size - 3)]
        return cls(ordered)


class ExternalTokenizerAdapter:
    """Wrap a HuggingFace tokenizer behind the package interface.

    Expected on-disk parity setup: `pip install transformers` and pass a
    pretrained name such as "bert-base-uncased" (vocab 30522) or
    "xlm-roberta-base" (vocab 250002). Only encode/pad/sep are used.
    """

    def __init__(self, pretrained_name: str):
        try:
            from transformers import AutoTokenizer
        except ImportError as e:
            raise ImportError(
                "ExternalTokenizerAdapter needs the optional 'transformers' "
                "package; install it for real-data parity runs"
            ) from e
        self._tok = AutoTokenizer.from_pretrained(pretrained_name)
        self.vocab_size = self._tok.vocab_size
        self.pad_id = self._tok.pad_token_id
        self.unk_id = self._tok.unk_token_id
        self.sep_id = self._tok.sep_token_id

    def encode(self, text: str) -> list[int]:
        return self._tok.encode(text, add_special_tokens=False)
