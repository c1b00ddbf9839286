"""Visual branch: history-gated question, relation attention, graph convolution
and object-relation fusion over a complete scene graph.

All functions take a leading batch axis ``B``; a single dialogue turn is B=1.
Parameter names are documented in :func:`dualvd.params.param_shapes`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .tensor import DimensionError, Tensor, broadcast_to, concat, linear, reshape, sigmoid, softmax

Params = Mapping[str, Tensor]


@dataclass
class SceneGraph:
    """N object vectors and the N x N relation embeddings of a complete directed graph.

    ``rel_embeds[i, j]`` describes subject i and object j; the diagonal holds
    the "unknown relationship" slot.
    """

    obj_feats: np.ndarray
    rel_embeds: np.ndarray

    def __post_init__(self):
        self.obj_feats = np.asarray(self.obj_feats, dtype=np.float64)
        self.rel_embeds = np.asarray(self.rel_embeds, dtype=np.float64)
        n = self.obj_feats.shape[0]
        if self.obj_feats.ndim != 2 or n < 1:
            raise DimensionError(f"object features must be (N>=1, d_obj), got {self.obj_feats.shape}")
        if self.rel_embeds.ndim != 3 or self.rel_embeds.shape[:2] != (n, n):
            raise DimensionError(f"relation embeddings must be ({n}, {n}, d_rel), got {self.rel_embeds.shape}")
        if not (np.isfinite(self.obj_feats).all() and np.isfinite(self.rel_embeds).all()):
            raise ValueError("scene graph features must be finite")

    @property
    def n_objects(self) -> int:
        return self.obj_feats.shape[0]


def gated_merge(a: Tensor, b: Tensor, gate_W: Tensor, gate_b: Tensor, proj_W: Tensor | None, proj_b: Tensor | None):
    """``proj(sigmoid(W[a, b] + b) * [a, b])``; the shared shape of every gate in the model."""
    if a.shape[:-1] != b.shape[:-1]:
        raise DimensionError(f"gated merge of {a.shape} and {b.shape}")
    both = concat([a, b], axis=-1)
    gate = sigmoid(linear(both, gate_W, gate_b))
    selected = gate * both
    if proj_W is None:
        return selected, gate
    return linear(selected, proj_W, proj_b), gate


def history_gated_question(history: Tensor, question: Tensor, P: Params):
    """History-aware question ``Q~g`` and its gate. Inputs are (B, d_hid)."""
    if history.shape != question.shape:
        raise DimensionError(f"history {history.shape} vs question {question.shape}")
    return gated_merge(
        history, question, P["history_gate.W"], P["history_gate.b"],
        P["history_proj.W"], P["history_proj.b"],
    )


def relation_attention(q_hist: Tensor, rel: Tensor, P: Params):
    """Joint softmax over all N*N relations; returns (alpha (B,N,N), r~ (B,N,N,d_rel))."""
    B, N, _, _ = rel.shape
    rq = linear(rel, P["relation_attention.W_relation"])
    qq = reshape(linear(q_hist, P["relation_attention.W_question"]), (B, 1, 1, -1))
    logits = linear(qq * rq, P["relation_attention.W_logit"], P["relation_attention.b"])
    alpha = reshape(softmax(reshape(logits, (B, N * N)), axis=-1), (B, N, N))
    return alpha, reshape(alpha, (B, N, N, 1)) * rel


def graph_convolution(q_hist: Tensor, obj: Tensor, rel_att: Tensor, P: Params):
    """Question-guided neighbour aggregation; returns (h~ (B,N,d_obj), beta (B,N,N)).

    ``beta[b, i]`` is a distribution over neighbours j of node i.
    """
    B, N, d_obj = obj.shape
    neighbours = broadcast_to(reshape(obj, (B, 1, N, d_obj)), (B, N, N, d_obj))
    pair = linear(concat([neighbours, rel_att], axis=-1), P["graph_conv.W_pair"])
    logits = linear(reshape(q_hist, (B, 1, 1, -1)) * pair, P["graph_conv.W_logit"], P["graph_conv.b"])
    beta = softmax(reshape(logits, (B, N, N)), axis=-1)
    return beta @ obj, beta


def object_attention(obj: Tensor, question: Tensor, P: Params) -> Tensor:
    """Softmax over objects guided by the raw question encoding; (B, N)."""
    B, N, _ = obj.shape
    proj = linear(obj, P["object_attention.W_obj"])
    logits = linear(reshape(question, (B, 1, -1)) * proj, P["object_attention.W_logit"], P["object_attention.b"])
    return softmax(reshape(logits, (B, N)), axis=-1)


def object_relation_fusion(obj: Tensor, h_rel: Tensor, question: Tensor, P: Params):
    """Gate each object against its relation-aware version, then pool by object attention.

    Returns (image vector (B, d_obj), per-object gates (B, N, 2*d_obj), gamma (B, N)).
    """
    B, N, d_obj = obj.shape
    fused, gate = gated_merge(
        obj, h_rel, P["object_gate.W"], P["object_gate.b"], P["object_proj.W"], P["object_proj.b"]
    )
    gamma = object_attention(obj, question, P)
    image = reshape(reshape(gamma, (B, 1, N)) @ fused, (B, d_obj))
    return image, gate, gamma
