"""Dialogue records, dataset JSON Lines I/O and batch collation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .text import pad_tokens
from .visual import SceneGraph


class DatasetError(ValueError):
    """Dataset file is unreadable or inconsistent."""


@dataclass
class Round:
    question_tokens: list
    candidate_tokens: list
    gt_index: int
    relevance: list
    modality_tag: str = "visual"
    template: str = ""


@dataclass
class Dialogue:
    dialogue_id: str
    graph: SceneGraph
    caption_tokens: list
    dense_caption_tokens: list
    rounds: list
    split: str = "train"


@dataclass
class DialogueInstance:
    """One question turn with everything the encoder reads except the scene graph."""

    question_id: str
    dialogue_id: str
    round_index: int
    caption_tokens: list
    dense_caption_tokens: list
    history_tokens: list
    question_tokens: list
    candidate_tokens: list
    gt_index: int
    relevance: list = field(default_factory=list)
    modality_tag: str = "visual"


@dataclass
class Batch:
    question_ids: list
    caption: np.ndarray          # (B, L)
    dense: np.ndarray            # (B, k, L)
    history: np.ndarray          # (B, L_hist)
    question: np.ndarray         # (B, L)
    candidates: np.ndarray       # (B, n_cand, L)
    obj: np.ndarray              # (B, N, d_obj)
    rel: np.ndarray              # (B, N, N, d_rel)
    gt: np.ndarray               # (B,)
    relevance: np.ndarray        # (B, n_cand)
    modality: list

    def __len__(self):
        return len(self.question_ids)


def history_tokens(caption: list, rounds: list, upto: int, max_len: int) -> list:
    """Caption followed by every earlier question and its ground-truth answer, truncated."""
    seq = list(caption)
    for r in rounds[:upto]:
        seq += list(r.question_tokens) + list(r.candidate_tokens[r.gt_index])
    return [t for t in seq if t != 0][:max_len]


def instances(dialogues, max_len: int, history_len: int | None = None) -> list[DialogueInstance]:
    out = []
    for d in dialogues:
        hist_len = history_len or max_len * max(1, len(d.rounds))
        for t, r in enumerate(d.rounds):
            out.append(
                DialogueInstance(
                    question_id=f"{d.dialogue_id}_{t}",
                    dialogue_id=d.dialogue_id,
                    round_index=t,
                    caption_tokens=d.caption_tokens,
                    dense_caption_tokens=d.dense_caption_tokens,
                    history_tokens=history_tokens(d.caption_tokens, d.rounds, t, hist_len),
                    question_tokens=r.question_tokens,
                    candidate_tokens=r.candidate_tokens,
                    gt_index=r.gt_index,
                    relevance=r.relevance,
                    modality_tag=r.modality_tag,
                )
            )
    return out


def collate(items: list[DialogueInstance], graphs: dict, max_len: int) -> Batch:
    """Stack instances into padded arrays; ``graphs`` maps dialogue id to SceneGraph."""
    if not items:
        raise DatasetError("cannot collate an empty batch")
    ks = {len(it.dense_caption_tokens) for it in items}
    ns = {len(it.candidate_tokens) for it in items}
    if len(ks) != 1 or len(ns) != 1:
        raise DatasetError("instances in one batch must share k and n_cand")
    hist_len = max(1, max(len(it.history_tokens) for it in items))
    gs = [graphs[it.dialogue_id] for it in items]
    if len({g.obj_feats.shape for g in gs}) != 1 or len({g.rel_embeds.shape for g in gs}) != 1:
        raise DatasetError("scene graphs in one batch must share N, d_obj and d_rel")

    def pad(seq):
        return pad_tokens(seq, max_len)

    return Batch(
        question_ids=[it.question_id for it in items],
        caption=np.array([pad(it.caption_tokens) for it in items], dtype=np.int64),
        dense=np.array([[pad(c) for c in it.dense_caption_tokens] for it in items], dtype=np.int64),
        history=np.array([pad_tokens(it.history_tokens, hist_len) for it in items], dtype=np.int64),
        question=np.array([pad(it.question_tokens) for it in items], dtype=np.int64),
        candidates=np.array([[pad(c) for c in it.candidate_tokens] for it in items], dtype=np.int64),
        obj=np.stack([g.obj_feats for g in gs]),
        rel=np.stack([g.rel_embeds for g in gs]),
        gt=np.array([it.gt_index for it in items], dtype=np.int64),
        relevance=np.array(
            [it.relevance if it.relevance else np.eye(len(it.candidate_tokens))[it.gt_index] for it in items],
            dtype=np.float64,
        ),
        modality=[it.modality_tag for it in items],
    )


# --- JSON Lines dataset format ---------------------------------------------

def _floats(arr) -> str:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        return "[" + ",".join(format(float(x), ".17g") for x in a) + "]"
    return "[" + ",".join(_floats(row) for row in a) + "]"


def dialogue_to_json(d: Dialogue) -> str:
    """Serialise one dialogue; floats carry 17 significant digits."""
    rounds = [
        {
            "question_tokens": list(map(int, r.question_tokens)),
            "candidate_tokens": [list(map(int, c)) for c in r.candidate_tokens],
            "gt_index": int(r.gt_index),
            "relevance": [float(x) for x in r.relevance],
            "modality_tag": r.modality_tag,
            "template": r.template,
        }
        for r in d.rounds
    ]
    head = json.dumps({"dialogue_id": d.dialogue_id, "split": d.split})[:-1]
    world = '{"obj_feats":' + _floats(d.graph.obj_feats) + ',"rel_embeds":' + _floats(d.graph.rel_embeds) + "}"
    tail = json.dumps(
        {
            "caption_tokens": list(map(int, d.caption_tokens)),
            "dense_caption_tokens": [list(map(int, c)) for c in d.dense_caption_tokens],
            "rounds": rounds,
        }
    )[1:]
    return f'{head},"world":{world},{tail}'


def dialogue_from_json(line: str) -> Dialogue:
    rec = json.loads(line)
    world = rec["world"]
    rounds = [
        Round(
            question_tokens=r["question_tokens"],
            candidate_tokens=r["candidate_tokens"],
            gt_index=int(r["gt_index"]),
            relevance=r.get("relevance") or [],
            modality_tag=r.get("modality_tag", "visual"),
            template=r.get("template", ""),
        )
        for r in rec["rounds"]
    ]
    return Dialogue(
        dialogue_id=str(rec["dialogue_id"]),
        graph=SceneGraph(world["obj_feats"], world["rel_embeds"]),
        caption_tokens=rec["caption_tokens"],
        dense_caption_tokens=rec["dense_caption_tokens"],
        rounds=rounds,
        split=rec.get("split", "train"),
    )


def write_dataset(path, dialogues) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in dialogues:
            fh.write(dialogue_to_json(d) + "\n")


def read_dataset(path, split: str | None = None) -> list[Dialogue]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset {path} does not exist")
    out = []
    k = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = dialogue_from_json(line)
            except (ValueError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            if not d.dense_caption_tokens:
                raise DatasetError(f"{path}:{lineno}: dialogue has no dense captions")
            if k is None:
                k = len(d.dense_caption_tokens)
            elif len(d.dense_caption_tokens) != k:
                raise DatasetError(f"{path}:{lineno}: expected {k} dense captions, got {len(d.dense_caption_tokens)}")
            for r in d.rounds:
                if not 0 <= r.gt_index < len(r.candidate_tokens):
                    raise DatasetError(f"{path}:{lineno}: gt_index out of range")
            if split is None or d.split == split:
                out.append(d)
    return out
