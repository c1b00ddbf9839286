"""Rule interpreter that re-derives synthetic answers from a serialised dialogue.

It reads only what is in the dataset file: token ids (through the
vocabulary), object features and relation embeddings. Attributes are decoded
from the one-hot blocks by argmax, captions are parsed as text.
"""
from __future__ import annotations

import numpy as np

from .data import Dialogue
from .synth import RELATIONS, SynthConfig
from .text import Vocabulary


class OracleError(ValueError):
    pass


def _object_types(d: Dialogue, cfg: SynthConfig) -> list[str]:
    types = cfg.types
    return [types[int(np.argmax(f[: cfg.n_types]))] for f in d.graph.obj_feats]


def _find(types: list[str], name: str) -> int:
    hits = [i for i, t in enumerate(types) if t == name]
    if len(hits) != 1:
        raise OracleError(f"expected one {name!r} in the world, found {len(hits)}")
    return hits[0]


def answer_word(d: Dialogue, question: list[str], vocab: Vocabulary, cfg: SynthConfig) -> str:
    q = " ".join(question)
    if q.startswith("what color is the "):
        types = _object_types(d, cfg)
        i = _find(types, question[4])
        block = d.graph.obj_feats[i, cfg.n_types : cfg.n_types + cfg.n_colors]
        return cfg.colors[int(np.argmax(block))]
    if q.startswith("what does the ") and question[-2:] == ["hold", "?"]:
        types = _object_types(d, cfg)
        i = _find(types, question[3])
        labels = np.argmax(d.graph.rel_embeds[i, :, : len(RELATIONS)], axis=-1)
        held = [j for j in range(len(types)) if j != i and RELATIONS[labels[j]] == "holds"]
        if len(held) != 1:
            raise OracleError(f"{question[3]} holds {len(held)} objects")
        return types[held[0]]
    if q.startswith("how does the ") and question[-2:] == ["feel", "?"]:
        for cap in d.dense_caption_tokens:
            words = vocab.decode(cap)
            if len(words) == 5 and words[2] == question[3] and words[3] == "looks":
                return words[4]
        raise OracleError(f"no caption describes {question[3]!r}")
    if q.startswith("what looks ") and len(question) == 4:
        hits = []
        for cap in d.dense_caption_tokens:
            words = vocab.decode(cap)
            if len(words) == 5 and words[3] == "looks" and words[4] == question[2]:
                hits.append(words[2])
        if len(hits) != 1:
            raise OracleError(f"{len(hits)} captions describe something {question[2]!r}")
        return hits[0]
    if q == "where is this ?":
        words = vocab.decode(d.caption_tokens)
        if len(words) < 2 or words[-2] != "the":
            raise OracleError(f"cannot parse scene from {' '.join(words)!r}")
        return words[-1]
    raise OracleError(f"unrecognised question {q!r}")


def oracle_gt_index(d: Dialogue, round_index: int, vocab: Vocabulary, cfg: SynthConfig) -> int:
    r = d.rounds[round_index]
    word = answer_word(d, vocab.decode(r.question_tokens), vocab, cfg)
    cands = [" ".join(vocab.decode(c)) for c in r.candidate_tokens]
    if cands.count(word) != 1:
        raise OracleError(f"answer {word!r} appears {cands.count(word)} times among candidates")
    return cands.index(word)
