"""Finite-difference gradient checks of every parameterised operation on a
seeded micro configuration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model, semantic, text, visual
from .data import Batch
from .gradcheck import grad_errors
from .params import ModelConfig, ModelVariant, init_params
from .tensor import Tensor

TOLERANCE = 1e-5

MICRO = dict(d_hid=8, d_obj=8, d_rel=4, n_obj=4, k=3, n_cand=5, vocab=12, d_word=3, seq=4)


@dataclass
class CheckResult:
    name: str
    max_error: float
    errors: dict

    @property
    def ok(self) -> bool:
        return self.max_error <= TOLERANCE

    def offenders(self) -> list[str]:
        return [k for k, v in self.errors.items() if v > TOLERANCE]


def micro_config(seed: int = 42) -> ModelConfig:
    m = MICRO
    return ModelConfig(vocab_size=m["vocab"], d_word=m["d_word"], d_hid=m["d_hid"], d_obj=m["d_obj"],
                       d_rel=m["d_rel"], seed=seed)


def micro_params(variant, seed: int = 42) -> dict[str, np.ndarray]:
    """Initial parameters with biases and gates moved off zero, so every path is exercised."""
    rng = np.random.default_rng([seed, 7])
    p = init_params(micro_config(seed), variant)
    out = {k: v + 0.3 * rng.standard_normal(v.shape) for k, v in p.items()}
    for k in ("embed.primary", "embed.secondary"):
        if k in out:
            out[k][0] = 0.0
    return out


def micro_batch(seed: int = 42, batch: int = 2) -> Batch:
    m = MICRO
    rng = np.random.default_rng([seed, 3])

    def tokens(*shape):
        t = rng.integers(1, m["vocab"], size=shape + (m["seq"],))
        t[..., -1] = 0
        return t

    return Batch(
        question_ids=[f"q{i}" for i in range(batch)],
        caption=tokens(batch),
        dense=tokens(batch, m["k"]),
        history=rng.integers(1, m["vocab"], size=(batch, m["seq"] + 2)),
        question=tokens(batch),
        candidates=tokens(batch, m["n_cand"]),
        obj=rng.standard_normal((batch, m["n_obj"], m["d_obj"])),
        rel=rng.standard_normal((batch, m["n_obj"], m["n_obj"], m["d_rel"])),
        gt=rng.integers(0, m["n_cand"], size=batch),
        relevance=np.zeros((batch, m["n_cand"])),
        modality=["visual"] * batch,
    )


def _weighted(outputs, weights):
    """Scalar probe: fixed random projection of every output."""
    total = None
    for out, w in zip(outputs, weights):
        term = (out * Tensor(w)).sum()
        total = term if total is None else total + term
    return total


def _probe(fn, point: dict, seed: int) -> dict[str, float]:
    shapes = [o.shape for o in fn({k: Tensor(v) for k, v in point.items()})]
    rng = np.random.default_rng([seed, 11])
    weights = [rng.standard_normal(s) for s in shapes]
    return grad_errors(lambda P: _weighted(fn(P), weights), point)


def _pick(params: dict, prefixes) -> dict:
    return {k: v for k, v in params.items() if k.startswith(tuple(prefixes))}


def op_points(seed: int = 42) -> dict:
    """name -> (function of named tensors returning outputs, evaluation point)."""
    m = MICRO
    rng = np.random.default_rng([seed, 5])
    P = micro_params(ModelVariant.DualVD, seed)
    B, N, k, dh = 2, m["n_obj"], m["k"], m["d_hid"]

    def vec(*shape):
        return rng.standard_normal(shape)

    graph_in = {"in.obj": vec(B, N, m["d_obj"]), "in.rel": vec(B, N, N, m["d_rel"])}
    points = {
        "lstm_encode": (
            lambda T: [text.encode_tokens(micro_batch(seed).question, T, "question")[0]],
            {**_pick(P, ["embed.", "lstm.question."])},
        ),
        "history_gated_question": (
            lambda T: list(visual.history_gated_question(T["in.H"], T["in.Q"], T)),
            {"in.H": vec(B, dh), "in.Q": vec(B, dh), **_pick(P, ["history_gate.", "history_proj."])},
        ),
        "relation_attention": (
            lambda T: list(visual.relation_attention(T["in.Qg"], T["in.rel"], T)),
            {"in.Qg": vec(B, dh), "in.rel": graph_in["in.rel"], **_pick(P, ["relation_attention."])},
        ),
        "graph_convolution": (
            lambda T: list(visual.graph_convolution(T["in.Qg"], T["in.obj"], T["in.rel"], T)),
            {"in.Qg": vec(B, dh), **graph_in, **_pick(P, ["graph_conv."])},
        ),
        "object_relation_fusion": (
            lambda T: list(visual.object_relation_fusion(T["in.obj"], T["in.hrel"], T["in.Q"], T)),
            {"in.obj": graph_in["in.obj"], "in.hrel": vec(B, N, m["d_obj"]), "in.Q": vec(B, dh),
             **_pick(P, ["object_gate.", "object_proj.", "object_attention."])},
        ),
        "semantic_attention": (
            lambda T: list(semantic.semantic_attention(T["in.Qg"], T["in.C"], T["in.Z"], T)),
            {"in.Qg": vec(B, dh), "in.C": vec(B, dh), "in.Z": vec(B, k, dh), **_pick(P, ["semantic_attention."])},
        ),
        "global_local_fusion": (
            lambda T: list(semantic.global_local_fusion(T["in.C"], T["in.Z"], T)),
            {"in.C": vec(B, dh), "in.Z": vec(B, dh), **_pick(P, ["caption_gate.", "caption_proj."])},
        ),
        "visual_semantic_fusion": (
            lambda T: list(model.visual_semantic_fusion(T["in.I"], T["in.T"], T)),
            {"in.I": vec(B, dh), "in.T": vec(B, dh), **_pick(P, ["fusion_gate."])},
        ),
        "score_candidates": (
            lambda T: [model.score_candidates(T["in.S"], T["in.H"], T["in.Q"], T["in.A"], T)],
            {"in.S": vec(B, 2 * dh), "in.H": vec(B, dh), "in.Q": vec(B, dh), "in.A": vec(B, m["n_cand"], dh),
             **_pick(P, ["late_fusion."])},
        ),
    }
    return points


def end_to_end(variant=ModelVariant.DualVD, seed: int = 42) -> CheckResult:
    variant = ModelVariant.parse(variant)
    batch = micro_batch(seed)

    def f(T):
        logits, _, _ = model.forward_batch(batch, T, variant)
        return model.cross_entropy(logits, batch.gt)

    errors = grad_errors(f, micro_params(variant, seed))
    return CheckResult(f"loss[{variant.value}]", max(errors.values()), errors)


def gradcheck_suite(seed: int = 42, variants=(ModelVariant.DualVD,)) -> list[CheckResult]:
    results = []
    for name, (fn, point) in op_points(seed).items():
        errors = _probe(fn, point, seed)
        results.append(CheckResult(name, max(errors.values()), errors))
    for v in variants:
        results.append(end_to_end(v, seed))
    return results
