"""Training, evaluation and ablation loops."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .data import Dialogue, collate, instances
from .metrics import EvalRecord, compute_metrics
from .model import AnswerScores, cross_entropy, forward_batch, gate_ratio, rank_candidates, split_trace
from .optim import LrSchedule, OptimizerState, adam_step, lr_at
from .params import ModelConfig, ModelVariant, as_tensors, init_params
from .synth import SynthConfig
from .tensor import Tape

log = logging.getLogger(__name__)


class NumericError(ArithmeticError):
    """Training produced a non-finite loss or gradient."""


PRESETS = {
    "desk": {
        "synth": {},
        "run": {
            "d_word": 16, "d_hid": 32, "max_len": 10, "batch_size": 32, "epochs": 60,
            "dropout": 0.0, "eta_max": 3e-3, "eta_min": 3.4e-4,
        },
    },
    "paper": {
        "synth": {
            "n_objects": 36, "n_dense": 6, "n_cand": 100, "d_obj": 2048, "d_rel": 512,
            "n_types": 48, "n_colors": 100, "n_moods": 100, "n_scenes": 100,
        },
        "run": {
            "d_word": 300, "d_hid": 512, "max_len": 20, "batch_size": 15, "epochs": 16,
            "dropout": 0.5, "eta_max": 1e-3, "eta_min": 3.4e-4,
        },
    },
}


@dataclass
class RunConfig:
    dataset: str | None = None
    variant: str = "DualVD"
    preset: str = "desk"
    epochs: int = 60
    batch_size: int = 32
    seed: int = 0
    out_dir: str | None = None
    max_len: int = 10
    d_word: int = 16
    second_source: bool = True
    d_hid: int = 32
    d_att: int | None = None
    d_fuse: int | None = None
    dropout: float = 0.0
    eta_max: float = 3e-3
    eta_min: float = 3.4e-4
    warmup_epochs: int = 2
    warmup_factor: float = 0.2
    checkpoint_every: int = 1
    stop_at_train_r1: float | None = None
    synth: dict = field(default_factory=dict)

    @classmethod
    def from_preset(cls, preset: str = "desk", **overrides) -> "RunConfig":
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose desk or paper")
        base = dict(PRESETS[preset]["run"], preset=preset, synth=dict(PRESETS[preset]["synth"]))
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown run config keys: {sorted(unknown)}")
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    @property
    def schedule(self) -> LrSchedule:
        return LrSchedule(
            eta_max=self.eta_max, eta_min=self.eta_min, warmup_epochs=self.warmup_epochs,
            warmup_factor=self.warmup_factor, total_epochs=max(self.epochs, 1),
        )

    def synth_config(self, **overrides) -> SynthConfig:
        return SynthConfig(**dict(self.synth, **overrides))

    def model_config(self, vocab_size: int, d_obj: int, d_rel: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size, d_word=self.d_word, second_source=self.second_source,
            d_hid=self.d_hid, d_obj=d_obj, d_rel=d_rel, d_att=self.d_att, d_fuse=self.d_fuse,
            dropout=self.dropout, seed=self.seed,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def data_dims(dialogues: list[Dialogue]) -> tuple[int, int]:
    g = dialogues[0].graph
    return g.obj_feats.shape[1], g.rel_embeds.shape[2]


def max_token_id(dialogues: list[Dialogue]) -> int:
    best = 0
    for d in dialogues:
        best = max([best, *d.caption_tokens, *(t for c in d.dense_caption_tokens for t in c)])
        for r in d.rounds:
            best = max([best, *r.question_tokens, *(t for c in r.candidate_tokens for t in c)])
    return best


@dataclass
class EvalResult:
    question_ids: list
    probs: np.ndarray
    ranks: np.ndarray
    gt: np.ndarray
    relevance: np.ndarray
    modality: list
    traces: list
    metrics: dict
    loss: float

    def records(self) -> list[EvalRecord]:
        return [
            EvalRecord(int(self.ranks[i, self.gt[i]]), self.relevance[i], self.ranks[i])
            for i in range(len(self.gt))
        ]

    def prediction_rows(self, variant: str) -> list[dict]:
        rows = []
        for i, qid in enumerate(self.question_ids):
            gs = self.traces[i].gate_s
            rows.append({
                "instance_id": qid,
                "probs": self.probs[i].tolist(),
                "ranks": self.ranks[i].tolist(),
                "gt_index": int(self.gt[i]),
                "relevance": self.relevance[i].tolist(),
                "gate_ratio": list(gate_ratio(gs)) if gs is not None else None,
                "modality_tag": self.modality[i],
                "variant": variant,
            })
        return rows


def _batches(items, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def evaluate(params: dict, variant, dialogues: list[Dialogue], max_len: int, batch_size: int = 64,
             score_override: Callable | None = None) -> EvalResult:
    """Deterministic scoring of every question (no dropout, no tape).

    ``score_override(batch, probs) -> probs`` replaces model probabilities,
    e.g. to inject oracle scores.
    """
    variant = ModelVariant.parse(variant)
    graphs = {d.dialogue_id: d.graph for d in dialogues}
    items = instances(dialogues, max_len)
    P = as_tensors(params)
    probs, ranks, qids, gts, rels, mods, traces = [], [], [], [], [], [], []
    nll = []
    for chunk in _batches(items, batch_size):
        batch = collate(chunk, graphs, max_len)
        logits, trace, _ = forward_batch(batch, P, variant)
        scores = AnswerScores.from_logits(logits.data)
        p, r = scores.probs, scores.ranks
        if score_override is not None:
            p = np.asarray(score_override(batch, p), dtype=np.float64)
            r = rank_candidates(p)
        probs.append(p)
        ranks.append(r)
        nll.extend(-np.log(np.maximum(p[np.arange(len(batch)), batch.gt], 1e-300)))
        qids += batch.question_ids
        gts.append(batch.gt)
        rels.append(batch.relevance)
        mods += batch.modality
        traces += split_trace(trace, len(batch))
    probs = np.concatenate(probs)
    ranks = np.concatenate(ranks)
    res = EvalResult(qids, probs, ranks, np.concatenate(gts), np.concatenate(rels), mods, traces, {},
                     math.fsum(nll) / len(nll))
    res.metrics = compute_metrics(res.records())
    return res


@dataclass
class TrainResult:
    params: dict
    model_config: ModelConfig
    history: list = field(default_factory=list)
    epochs_run: int = 0


def train(run: RunConfig, train_set: list[Dialogue], val_set: list[Dialogue] | None = None,
          vocab_size: int | None = None, on_epoch: Callable | None = None,
          init: dict | None = None) -> TrainResult:
    """Minimise cross-entropy with Adam under the warm-up + cosine schedule.

    ``on_epoch(epoch, params, row)`` runs after every epoch.
    Raises :class:`NumericError` on a non-finite loss or gradient.
    """
    if not train_set:
        raise ValueError("empty training set")
    variant = ModelVariant.parse(run.variant)
    d_obj, d_rel = data_dims(train_set)
    vocab_size = vocab_size or max_token_id(train_set + (val_set or [])) + 1
    mcfg = run.model_config(vocab_size, d_obj, d_rel)
    params = init if init is not None else init_params(mcfg, variant)
    graphs = {d.dialogue_id: d.graph for d in train_set}
    items = instances(train_set, run.max_len)
    state = OptimizerState()
    sched = run.schedule
    history = []
    epoch = 0
    for epoch in range(run.epochs):
        lr = lr_at(epoch, sched)
        order = np.random.default_rng([run.seed, 1, epoch]).permutation(len(items))
        losses = []
        for b, idx in enumerate(_batches(order, run.batch_size)):
            batch = collate([items[i] for i in idx], graphs, run.max_len)
            drop_rng = np.random.default_rng([run.seed, 2, epoch, b])
            with Tape():
                P = as_tensors(params, requires_grad=True)
                logits, _, _ = forward_batch(batch, P, variant, train=True, dropout=run.dropout, rng=drop_rng)
                loss = cross_entropy(logits, batch.gt)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise NumericError(f"non-finite loss {value} at epoch {epoch} batch {b}")
                loss.backward()
            grads = {k: t.grad for k, t in P.items()}
            for k, g in grads.items():
                if not np.isfinite(g).all():
                    raise NumericError(f"non-finite gradient for {k} at epoch {epoch} batch {b}")
            adam_step(params, grads, state, lr)
            losses.append(value * len(idx))
        row = {"epoch": epoch, "lr": lr, "train_loss": math.fsum(losses) / len(items)}
        if val_set:
            m = evaluate(params, variant, val_set, run.max_len).metrics
            row["val_mrr"], row["val_r1"] = m["MRR"], m["R@1"]
        if run.stop_at_train_r1 is not None:
            row["train_r1"] = evaluate(params, variant, train_set, run.max_len).metrics["R@1"]
        history.append(row)
        log.info("epoch %d %s", epoch, row)
        if on_epoch is not None:
            on_epoch(epoch, params, row)
        if run.stop_at_train_r1 is not None and row["train_r1"] >= run.stop_at_train_r1:
            epoch += 1
            break
    else:
        epoch = run.epochs
    return TrainResult(params, mcfg, history, epoch)


def ablate(run: RunConfig, variants, train_set, val_set=None, eval_set=None, vocab_size=None):
    """Train and evaluate each variant with the same seed; rows keep the requested order."""
    variants = [ModelVariant.parse(v) for v in variants]
    rows = []
    for v in variants:
        cfg = RunConfig(**{**asdict(run), "variant": v.value})
        result = train(cfg, train_set, val_set, vocab_size)
        target = eval_set if eval_set is not None else train_set
        rows.append((v.value, evaluate(result.params, v, target, run.max_len).metrics, result))
    return rows
