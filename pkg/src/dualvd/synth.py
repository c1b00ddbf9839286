"""Deterministic synthetic dialogues with answers known by construction.

Each world has N objects with a type, a colour and a mood, a scene label, and
pairwise relation labels of which exactly one is ``holds``. What the model can
see is split on purpose:

* object features carry type and colour (one-hot blocks plus noise);
* relation embeddings carry the relation label (one-hot block plus noise);
* the global caption names the scene, the k dense captions give colour and
  mood of k objects. Moods and the scene never reach the features, and the
  ``holds`` relation and the colours of undescribed objects never reach the
  captions.

Questions are tagged ``visual`` (colour of an undescribed object, what an
object holds), ``semantic`` (mood of a described object, the scene) or
``both`` (colour of a described object). The ``which_mood`` question ("what
looks happy ?") is answered with an object type from the captions alone, so
the type information in the visual branch is a distractor for it.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dialogue, Round, write_dataset
from .text import Vocabulary
from .visual import SceneGraph

TYPES = ["dog", "cat", "man", "woman", "boy", "girl", "car", "bus",
         "tree", "bench", "kite", "ball", "horse", "bird", "table", "chair"]
COLORS = ["red", "green", "blue", "yellow", "white", "black",
          "brown", "orange", "pink", "purple", "gray", "silver"]
MOODS = ["happy", "sad", "calm", "angry", "sleepy", "curious",
         "bored", "excited", "proud", "shy", "tired", "playful"]
SCENES = ["park", "beach", "street", "kitchen", "field", "office",
          "garden", "forest", "station", "bedroom", "market", "river"]
RELATIONS = ["unknown", "holds", "near", "behind", "on", "under", "beside"]
FUNCTION_WORDS = ["a", "and", "in", "the", "looks", "what", "color", "is",
                  "does", "hold", "how", "feel", "where", "this", "?"]

TEMPLATES = {
    # name: (modality, weight)
    "color_visual": ("visual", 0.35),
    "holds": ("visual", 0.15),
    "mood": ("semantic", 0.15),
    "scene": ("semantic", 0.10),
    "which_mood": ("semantic", 0.15),
    "color_both": ("both", 0.10),
}


class GenerationError(ValueError):
    pass


def word_list(base: list[str], n: int) -> list[str]:
    """``n`` distinct words; names past the base list get a numeric suffix."""
    return [base[i] if i < len(base) else f"{base[i % len(base)]}{i // len(base)}" for i in range(n)]


@dataclass(frozen=True)
class SynthConfig:
    n_objects: int = 8
    n_dense: int = 4
    n_cand: int = 10
    rounds: int = 10
    dialogues: int = 64
    val_dialogues: int = 16
    d_obj: int = 64
    d_rel: int = 32
    noise_std: float = 0.05
    n_types: int = 16
    n_colors: int = 12
    n_moods: int = 12
    n_scenes: int = 12
    template_weights: dict = field(default_factory=lambda: {k: w for k, (_, w) in TEMPLATES.items()})

    @property
    def types(self):
        return word_list(TYPES, self.n_types)

    @property
    def colors(self):
        return word_list(COLORS, self.n_colors)

    @property
    def moods(self):
        return word_list(MOODS, self.n_moods)

    @property
    def scenes(self):
        return word_list(SCENES, self.n_scenes)

    def validate(self) -> None:
        if self.n_objects < 2:
            raise GenerationError("need at least 2 objects per world")
        if not 1 <= self.n_dense < self.n_objects:
            raise GenerationError("need 1 <= dense captions < objects")
        if self.n_cand < 2:
            raise GenerationError("need at least 2 candidates")
        if not 1 <= self.rounds <= 10:
            raise GenerationError("rounds must be in 1..10")
        if self.dialogues < 0 or self.val_dialogues < 0:
            raise GenerationError("dialogue counts must be non-negative")
        if self.n_types < self.n_objects:
            raise GenerationError(f"{self.n_objects} distinct objects need at least that many types")
        for name in ("n_types", "n_colors", "n_moods", "n_scenes"):
            if getattr(self, name) < self.n_cand:
                raise GenerationError(
                    f"{name}={getattr(self, name)} cannot supply {self.n_cand} distinct candidates"
                )
        if self.d_obj < self.n_types + self.n_colors:
            raise GenerationError(f"d_obj={self.d_obj} < n_types + n_colors")
        if self.d_rel < len(RELATIONS):
            raise GenerationError(f"d_rel={self.d_rel} < {len(RELATIONS)} relation labels")
        unknown = set(self.template_weights) - set(TEMPLATES)
        if unknown or sum(self.template_weights.values()) <= 0:
            raise GenerationError(f"bad template weights {self.template_weights}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        return cls(**d)


def build_vocabulary(cfg: SynthConfig) -> Vocabulary:
    return Vocabulary(FUNCTION_WORDS + cfg.types + cfg.colors + cfg.moods + cfg.scenes)


def _make_world(cfg: SynthConfig, rng: np.random.Generator) -> dict:
    N = cfg.n_objects
    world = {
        "types": rng.choice(cfg.n_types, size=N, replace=False),
        "colors": rng.integers(0, cfg.n_colors, size=N),
        "moods": rng.integers(0, cfg.n_moods, size=N),
        "scene": int(rng.integers(0, cfg.n_scenes)),
    }
    labels = rng.integers(2, len(RELATIONS), size=(N, N))
    np.fill_diagonal(labels, 0)
    holder, held = rng.choice(N, size=2, replace=False)
    labels[holder, held] = 1
    world["relations"] = labels
    world["holder"], world["held"] = int(holder), int(held)
    world["described"] = rng.choice(N, size=cfg.n_dense, replace=False)

    obj = rng.normal(0.0, cfg.noise_std, size=(N, cfg.d_obj))
    obj[np.arange(N), world["types"]] += 1.0
    obj[np.arange(N), cfg.n_types + world["colors"]] += 1.0
    rel = rng.normal(0.0, cfg.noise_std, size=(N, N, cfg.d_rel))
    ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    rel[ii, jj, labels] += 1.0
    world["graph"] = SceneGraph(obj, rel)
    return world


def _question(cfg: SynthConfig, world: dict, template: str, rng) -> tuple[list[str], str, list[str]]:
    """Question words, answer word and the answer-type vocabulary."""
    types, colors, moods = cfg.types, cfg.colors, cfg.moods
    described = [int(i) for i in world["described"]]
    hidden = [i for i in range(cfg.n_objects) if i not in described]
    if template == "color_visual":
        i = int(rng.choice(hidden))
        return ["what", "color", "is", "the", types[world["types"][i]], "?"], colors[world["colors"][i]], colors
    if template == "color_both":
        i = int(rng.choice(described))
        return ["what", "color", "is", "the", types[world["types"][i]], "?"], colors[world["colors"][i]], colors
    if template == "holds":
        h, o = world["holder"], world["held"]
        return ["what", "does", "the", types[world["types"][h]], "hold", "?"], types[world["types"][o]], types
    if template == "mood":
        i = int(rng.choice(described))
        return ["how", "does", "the", types[world["types"][i]], "feel", "?"], moods[world["moods"][i]], moods
    if template == "which_mood":
        counts = np.bincount(world["moods"][described], minlength=cfg.n_moods)
        unique = [i for i in described if counts[world["moods"][i]] == 1]
        if not unique:
            return _question(cfg, world, "mood", rng)
        i = int(rng.choice(unique))
        return ["what", "looks", moods[world["moods"][i]], "?"], types[world["types"][i]], types
    if template == "scene":
        return ["where", "is", "this", "?"], cfg.scenes[world["scene"]], cfg.scenes
    raise GenerationError(f"unknown template {template!r}")


def _dialogue(cfg: SynthConfig, vocab: Vocabulary, seed: int, split: str, index: int) -> Dialogue:
    rng = np.random.default_rng([seed, 0 if split == "train" else 1, index])
    world = _make_world(cfg, rng)
    types = cfg.types
    a, b = rng.choice(cfg.n_objects, size=2, replace=False)
    caption = ["a", types[world["types"][a]], "and", "a", types[world["types"][b]],
               "in", "the", cfg.scenes[world["scene"]]]
    dense = [
        ["the", cfg.colors[world["colors"][i]], types[world["types"][i]], "looks", cfg.moods[world["moods"][i]]]
        for i in world["described"]
    ]
    names = list(cfg.template_weights)
    weights = np.array([cfg.template_weights[n] for n in names], dtype=np.float64)
    rounds = []
    for _ in range(cfg.rounds):
        template = names[int(rng.choice(len(names), p=weights / weights.sum()))]
        words, answer, pool = _question(cfg, world, template, rng)
        if template == "which_mood" and words[1] != "looks":
            template = "mood"
        others = [w for w in pool if w != answer]
        distractors = [others[i] for i in rng.choice(len(others), size=cfg.n_cand - 1, replace=False)]
        gt = int(rng.integers(0, cfg.n_cand))
        cands = distractors[:gt] + [answer] + distractors[gt:]
        relevance = [0.0] * cfg.n_cand
        relevance[gt] = 1.0
        rounds.append(
            Round(
                question_tokens=vocab.encode(words),
                candidate_tokens=[vocab.encode([c]) for c in cands],
                gt_index=gt,
                relevance=relevance,
                modality_tag=TEMPLATES[template][0],
                template=template,
            )
        )
    return Dialogue(
        dialogue_id=f"{split}{index:05d}",
        graph=world["graph"],
        caption_tokens=vocab.encode(caption),
        dense_caption_tokens=[vocab.encode(c) for c in dense],
        rounds=rounds,
        split=split,
    )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DUALVD_THREADS", "1")))
    except ValueError:
        return 1


def generate_dataset(cfg: SynthConfig, seed: int) -> tuple[list[Dialogue], Vocabulary]:
    """All train then val dialogues, each drawn from its own seeded substream."""
    cfg.validate()
    vocab = build_vocabulary(cfg)
    jobs = [("train", i) for i in range(cfg.dialogues)] + [("val", i) for i in range(cfg.val_dialogues)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        dialogues = list(pool.map(lambda job: _dialogue(cfg, vocab, seed, *job), jobs))
    return dialogues, vocab


def write_generated(out_dir, cfg: SynthConfig, seed: int) -> Path:
    """Write ``dataset.jsonl``, ``vocab.json`` and ``generator.json``; returns the dataset path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dialogues, vocab = generate_dataset(cfg, seed)
    path = out / "dataset.jsonl"
    write_dataset(path, dialogues)
    vocab.save(out / "vocab.json")
    (out / "generator.json").write_text(
        json.dumps({"seed": seed, "config": cfg.to_dict()}, indent=1, sort_keys=True) + "\n"
    )
    return path
