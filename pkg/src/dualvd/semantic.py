"""Semantic branch: question-guided attention over the global and dense captions,
and the global-local caption gate."""
from __future__ import annotations

from typing import Mapping

from .tensor import DimensionError, Tensor, concat, linear, reshape, softmax
from .visual import gated_merge

Params = Mapping[str, Tensor]


class ConfigurationError(ValueError):
    pass


def caption_attention(q_hist: Tensor, items: Tensor, P: Params) -> Tensor:
    """Bilinear-projected scores of each caption against the question; softmax over items.

    ``items`` is (B, M, d_hid); returns (B, M).
    """
    B, M, _ = items.shape
    if M == 0:
        raise ConfigurationError("caption attention needs at least one caption")
    q = linear(q_hist, P["semantic_attention.W_question"], P["semantic_attention.b_question"])
    m = linear(items, P["semantic_attention.W_caption"], P["semantic_attention.b_caption"])
    logits = reshape(m @ reshape(q, (B, -1, 1)), (B, M))
    return softmax(logits, axis=-1)


def semantic_attention(q_hist: Tensor, global_cap: Tensor, local_caps: Tensor, P: Params):
    """One softmax over [global, local_1..local_k].

    Returns (delta (B, k+1), attended global (B, d_hid), attended locals (B, d_hid)).
    """
    B, k, d = local_caps.shape
    if k == 0:
        raise ConfigurationError("semantic attention needs k >= 1 dense captions")
    if global_cap.shape != (B, d):
        raise DimensionError(f"global caption {global_cap.shape} vs locals {local_caps.shape}")
    items = concat([reshape(global_cap, (B, 1, d)), local_caps], axis=1)
    delta = caption_attention(q_hist, items, P)
    g = delta[:, 0:1] * global_cap
    z = reshape(reshape(delta[:, 1:], (B, 1, k)) @ local_caps, (B, d))
    return delta, g, z


def global_local_fusion(global_att: Tensor, local_att: Tensor, P: Params):
    """Gate between attended global and local captions; returns (T~ (B, d_hid), gate (B, 2*d_hid))."""
    return gated_merge(
        global_att, local_att, P["caption_gate.W"], P["caption_gate.b"],
        P["caption_proj.W"], P["caption_proj.b"],
    )
