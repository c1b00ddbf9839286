"""Token vocabulary, hashed word embeddings and masked LSTM sentence encoders."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .tensor import Tensor, concat, embedding, lstm

PAD_ID = 0
UNK_ID = 1
PAD, UNK = "<pad>", "<unk>"

# Every encoder owns its parameters; only the candidate LSTM is shared, across answers.
ENCODERS = ("question", "history", "caption", "dense", "candidate")
GATES = ("i", "f", "g", "o")


class VocabularyError(ValueError):
    pass


class Vocabulary:
    """Token string to id mapping; id 0 is padding and id 1 the unknown token."""

    def __init__(self, words: Iterable[str] = ()):
        self.itos = [PAD, UNK]
        self.stoi = {PAD: PAD_ID, UNK: UNK_ID}
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        if word not in self.stoi:
            self.stoi[word] = len(self.itos)
            self.itos.append(word)
        return self.stoi[word]

    def __len__(self):
        return len(self.itos)

    def encode(self, words: Iterable[str]) -> list[int]:
        return [self.stoi.get(w, UNK_ID) for w in words]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids if i != PAD_ID]

    def to_json(self) -> str:
        return json.dumps(self.stoi, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, int]) -> "Vocabulary":
        if mapping.get(PAD) != PAD_ID or mapping.get(UNK) != UNK_ID:
            raise VocabularyError("vocabulary must map <pad> to 0 and <unk> to 1")
        ids = sorted(mapping.values())
        if ids != list(range(len(ids))):
            raise VocabularyError("vocabulary ids must be contiguous from 0")
        vocab = cls()
        vocab.itos = [None] * len(ids)
        for w, i in mapping.items():
            vocab.itos[i] = w
        vocab.stoi = dict(mapping)
        return vocab

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_mapping(json.loads(Path(path).read_text()))


def pad_tokens(tokens: Iterable[int], length: int) -> list[int]:
    """Truncate or right-pad to exactly ``length`` ids."""
    tokens = list(tokens)[:length]
    return tokens + [PAD_ID] * (length - len(tokens))


def hashed_table(vocab_size: int, d_word: int, seed: int, source: int = 0) -> np.ndarray:
    """Embedding matrix whose row ``t`` depends only on ``(seed, source, t)``.

    Rows are uniform in +-sqrt(3/d_word); the pad row is zero.
    """
    bound = np.sqrt(3.0 / d_word)
    table = np.zeros((vocab_size, d_word))
    for t in range(1, vocab_size):
        rng = np.random.default_rng([seed, source, t])
        table[t] = rng.uniform(-bound, bound, d_word)
    return table


def embed(tokens, params: Mapping[str, Tensor]) -> Tensor:
    """Word vectors for an id array of any shape; a trailing feature axis is added.

    When a second table is present the two lookups are concatenated.
    """
    ids = np.asarray(tokens, dtype=np.int64)
    primary = params["embed.primary"]
    vocab = primary.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        raise VocabularyError(f"token id out of range for vocabulary of {vocab}")
    out = embedding(primary, ids)
    if "embed.secondary" in params:
        out = concat([out, embedding(params["embed.secondary"], ids)], axis=-1)
    return out


def lstm_weights(params: Mapping[str, Tensor], name: str) -> tuple[Tensor, Tensor]:
    pre = f"lstm.{name}"
    W = concat([params[f"{pre}.W_{g}"] for g in GATES], axis=0)
    b = concat([params[f"{pre}.b_{g}"] for g in GATES], axis=0)
    return W, b


def lstm_encode(vectors: Tensor, mask, params: Mapping[str, Tensor], name: str):
    """Final hidden state after the last unmasked step of each sequence.

    Returns ``(hidden, degenerate)`` where ``degenerate`` flags sequences with
    no unmasked step; their hidden state is the zero vector.
    """
    mask = np.asarray(mask, dtype=bool)
    W, b = lstm_weights(params, name)
    h = lstm(vectors, mask, W, b)
    return h, ~mask.any(axis=-1)


def encode_tokens(tokens, params: Mapping[str, Tensor], name: str):
    """Embed and encode an id array of shape (..., T) to (..., d_hid)."""
    ids = np.asarray(tokens, dtype=np.int64)
    lead, T = ids.shape[:-1], ids.shape[-1]
    flat = ids.reshape(-1, T)
    mask = flat != PAD_ID
    used = np.flatnonzero(mask.any(axis=0))
    width = int(used[-1]) + 1 if used.size else 1
    flat, mask = flat[:, :width], mask[:, :width]
    h, degenerate = lstm_encode(embed(flat, params), mask, params, name)
    return h.reshape(*lead, h.shape[-1]), degenerate.reshape(lead)
