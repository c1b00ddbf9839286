"""Visual-semantic fusion, late fusion, the discriminative decoder and the
ablation-variant wiring of the full encoder."""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping

import numpy as np

from .data import Batch, DialogueInstance, collate
from .params import ModelVariant
from .semantic import ConfigurationError, caption_attention, global_local_fusion, semantic_attention
from .tensor import (
    DimensionError,
    Tensor,
    broadcast_to,
    concat,
    linear,
    log_softmax,
    reshape,
    sigmoid,
    softmax_np,
)
from .text import encode_tokens
from .visual import (
    SceneGraph,
    graph_convolution,
    history_gated_question,
    object_attention,
    object_relation_fusion,
    relation_attention,
)

Params = Mapping[str, Tensor]


@dataclass
class AnswerScores:
    probs: np.ndarray
    ranks: np.ndarray

    @classmethod
    def from_logits(cls, logits) -> "AnswerScores":
        # ranked on the logits: far-behind candidates can all underflow to probability 0
        logits = np.asarray(logits, dtype=np.float64)
        return cls(softmax_np(logits, axis=-1), rank_candidates(logits))

    @property
    def top(self):
        return np.argmin(self.ranks, axis=-1)


def rank_candidates(scores) -> np.ndarray:
    """Rank (1 = best) of every candidate; equal scores keep index order."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, axis=-1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(1, scores.shape[-1] + 1) + np.zeros_like(order), axis=-1)
    return ranks


@dataclass
class GateTrace:
    """Attention weights and gate values of one question; absent stages stay None."""

    gate_q: np.ndarray | None = None
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    gate_v: np.ndarray | None = None
    gamma: np.ndarray | None = None
    delta: np.ndarray | None = None
    gate_c: np.ndarray | None = None
    gate_s: np.ndarray | None = None

    def to_json(self, question_id: str | None = None) -> dict:
        out = {} if question_id is None else {"question_id": question_id}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "gate_v":
                out["gate_v_mean"] = v.mean(axis=-1).tolist()
            else:
                out[f.name] = v.tolist()
        if self.gate_s is not None:
            out["gate_ratio"] = list(gate_ratio(self.gate_s))
        return out


def split_trace(trace: dict, n: int) -> list[GateTrace]:
    return [GateTrace(**{k: v[i] for k, v in trace.items()}) for i in range(n)]


def visual_semantic_fusion(image: Tensor, text: Tensor, P: Params, gate_mask=None):
    """Elementwise gate over ``[image, text]``; returns (S, gate).

    ``gate_mask`` (length 2*d_fuse, entries 0 or 1) ablates a modality: masked
    entries are zeroed in the gate input as well as in the gate, since the
    gate of one half otherwise still reads the other half.
    """
    if image.shape != text.shape:
        raise DimensionError(f"fusion inputs {image.shape} and {text.shape} must match")
    both = concat([image, text], axis=-1)
    if gate_mask is not None:
        mask = Tensor(np.asarray(gate_mask, dtype=np.float64))
        if mask.shape != both.shape[-1:]:
            raise DimensionError(f"gate mask {mask.shape} vs fused width {both.shape[-1]}")
        both = both * mask
    gate = sigmoid(linear(both, P["fusion_gate.W"], P["fusion_gate.b"]))
    if gate_mask is not None:
        gate = gate * mask
    return gate * both, gate


def gate_ratio(gate) -> tuple[float, float]:
    """(visual, semantic) share of the mean gate mass; first half gates the image."""
    g = np.asarray(gate, dtype=np.float64)
    if g.shape[-1] % 2:
        raise DimensionError("gate vector length must be even")
    half = g.shape[-1] // 2
    vis = float(g[..., :half].mean())
    sem = float(g[..., half:].mean())
    total = vis + sem
    if total <= 0.0:
        raise ArithmeticError("gate mass is zero")
    return vis / total, sem / total


def score_candidates(S: Tensor, history: Tensor, question: Tensor, cands: Tensor, P: Params) -> Tensor:
    """Dot product of the late-fusion joint embedding with every candidate; (B, n_cand) logits."""
    B, n, d = cands.shape
    if n < 2:
        raise ConfigurationError("ranking needs at least two candidates")
    joint = linear(concat([S, history, question], axis=-1), P["late_fusion.W"], P["late_fusion.b"])
    return reshape(cands @ reshape(joint, (B, d, 1)), (B, n))


def cross_entropy(logits: Tensor, gt) -> Tensor:
    """Mean negative log-likelihood of the ground-truth candidates."""
    gt = np.asarray(gt, dtype=np.int64)
    B, n = logits.shape
    if gt.shape != (B,) or gt.min() < 0 or gt.max() >= n:
        raise ValueError(f"ground-truth indices {gt} invalid for {n} candidates")
    picked = log_softmax(logits, axis=-1)[np.arange(B), gt]
    return picked.sum() * (-1.0 / B)


def loss(scores: AnswerScores, gt_index: int) -> float:
    probs = np.asarray(scores.probs)
    if not 0 <= gt_index < probs.shape[-1]:
        raise ValueError(f"gt_index {gt_index} outside [0, {probs.shape[-1]})")
    return float(-np.log(probs[gt_index]))


def _dropout(x: Tensor, rate: float, rng) -> Tensor:
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(keep)


def forward_batch(batch: Batch, P: Params, variant, *, train: bool = False, dropout: float = 0.0,
                  rng=None, gate_mask=None):
    """Logits (B, n_cand) and a dict of batched trace arrays for one variant."""
    variant = ModelVariant.parse(variant)
    V = ModelVariant
    rate = dropout if train else 0.0
    B = len(batch)

    question, q_degenerate = encode_tokens(batch.question, P, "question")
    history, _ = encode_tokens(batch.history, P, "history")
    cands, _ = encode_tokens(batch.candidates, P, "candidate")
    question = _dropout(question, rate, rng)
    history = _dropout(history, rate, rng)
    cands = _dropout(cands, rate, rng)

    trace = {}
    q_hist = None
    if variant not in (V.ObjRep, V.GlCap):
        q_hist, gate_q = history_gated_question(history, question, P)
        trace["gate_q"] = gate_q

    image = text = None
    if variant.visual:
        obj = Tensor(batch.obj)
        N = obj.shape[1]
        if variant is V.ObjRep:
            gamma = object_attention(obj, question, P)
            image = reshape(reshape(gamma, (B, 1, N)) @ obj, (B, -1))
            trace["gamma"] = gamma
        else:
            if variant is V.VisNoRel:
                rel = broadcast_to(P["no_edge"], (B, N, N, P["no_edge"].shape[0]))
            else:
                rel = Tensor(batch.rel)
            alpha, rel_att = relation_attention(q_hist, rel, P)
            h_rel, beta = graph_convolution(q_hist, obj, rel_att, P)
            trace["alpha"], trace["beta"] = alpha, beta
            if variant is V.RelRep:
                image = h_rel.mean(axis=1)
            else:
                image, gate_v, gamma = object_relation_fusion(obj, h_rel, question, P)
                trace["gate_v"], trace["gamma"] = gate_v, gamma

    if variant.semantic:
        if variant is not V.LoCap:
            caption, _ = encode_tokens(batch.caption, P, "caption")
            caption = _dropout(caption, rate, rng)
        if variant is not V.GlCap:
            dense, _ = encode_tokens(batch.dense, P, "dense")
            dense = _dropout(dense, rate, rng)
        if variant is V.GlCap:
            text = caption
        elif variant is V.LoCap:
            delta = caption_attention(q_hist, dense, P)
            text = reshape(reshape(delta, (B, 1, -1)) @ dense, (B, -1))
            trace["delta"] = delta
        else:
            delta, g_att, l_att = semantic_attention(q_hist, caption, dense, P)
            text, gate_c = global_local_fusion(g_att, l_att, P)
            trace["delta"], trace["gate_c"] = delta, gate_c

    if variant is V.DualVD:
        image_p = linear(image, P["fuse_proj.visual.W"], P["fuse_proj.visual.b"])
        text_p = linear(text, P["fuse_proj.semantic.W"], P["fuse_proj.semantic.b"])
        S, gate_s = visual_semantic_fusion(image_p, text_p, P, gate_mask)
        trace["gate_s"] = gate_s
    else:
        S = image if variant.visual else text

    S = _dropout(S, rate, rng)
    logits = score_candidates(S, history, question, cands, P)
    arrays = {k: v.data for k, v in trace.items()}
    return logits, arrays, q_degenerate


def _tensors(params) -> dict:
    return {k: v if isinstance(v, Tensor) else Tensor(v) for k, v in params.items()}


def forward(instance: DialogueInstance, graph: SceneGraph, params, variant, gate_mask=None):
    """Score one question; returns (AnswerScores, GateTrace)."""
    lengths = [len(instance.question_tokens), len(instance.caption_tokens)]
    lengths += [len(c) for c in instance.candidate_tokens] + [len(c) for c in instance.dense_caption_tokens]
    batch = collate([instance], {instance.dialogue_id: graph}, max(1, max(lengths)))
    logits, trace, _ = forward_batch(batch, _tensors(params), variant, gate_mask=gate_mask)
    return AnswerScores.from_logits(logits.data[0]), split_trace(trace, 1)[0]
