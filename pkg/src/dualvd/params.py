"""Model configuration, ablation variants and named parameter initialisation."""
from __future__ import annotations

import enum
import zlib
from dataclasses import asdict, dataclass, replace

import numpy as np

from .tensor import Tensor
from .text import ENCODERS, GATES, hashed_table


class ModelVariant(str, enum.Enum):
    ObjRep = "ObjRep"
    RelRep = "RelRep"
    VisNoRel = "VisNoRel"
    VisMod = "VisMod"
    GlCap = "GlCap"
    LoCap = "LoCap"
    SemMod = "SemMod"
    DualVD = "DualVD"

    @property
    def visual(self) -> bool:
        return self in VISUAL_VARIANTS or self is ModelVariant.DualVD

    @property
    def semantic(self) -> bool:
        return self in SEMANTIC_VARIANTS or self is ModelVariant.DualVD

    @classmethod
    def parse(cls, name) -> "ModelVariant":
        if isinstance(name, cls):
            return name
        try:
            return cls(name)
        except ValueError:
            raise ValueError(
                f"unknown variant {name!r}; choose from {', '.join(v.value for v in cls)}"
            ) from None


VISUAL_VARIANTS = (ModelVariant.ObjRep, ModelVariant.RelRep, ModelVariant.VisNoRel, ModelVariant.VisMod)
SEMANTIC_VARIANTS = (ModelVariant.GlCap, ModelVariant.LoCap, ModelVariant.SemMod)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_word: int = 16
    second_source: bool = True
    d_hid: int = 32
    d_obj: int = 64
    d_rel: int = 32
    d_att: int | None = None
    d_fuse: int | None = None
    dropout: float = 0.0
    seed: int = 0

    @property
    def d_in(self) -> int:
        return self.d_word * (2 if self.second_source else 1)

    @property
    def att_dim(self) -> int:
        return self.d_att or self.d_hid

    @property
    def fuse_dim(self) -> int:
        return self.d_fuse or self.d_hid

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    def replace(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


def encoders_for(variant: ModelVariant) -> tuple[str, ...]:
    used = ["question", "history", "candidate"]
    if variant in (ModelVariant.GlCap, ModelVariant.SemMod, ModelVariant.DualVD):
        used.append("caption")
    if variant in (ModelVariant.LoCap, ModelVariant.SemMod, ModelVariant.DualVD):
        used.append("dense")
    return tuple(e for e in ENCODERS if e in used)


def branch_dim(cfg: ModelConfig, variant: ModelVariant) -> int:
    """Width of the knowledge vector S fed to late fusion."""
    if variant is ModelVariant.DualVD:
        return 2 * cfg.fuse_dim
    return cfg.d_obj if variant.visual else cfg.d_hid


def param_shapes(cfg: ModelConfig, variant) -> dict[str, tuple]:
    """Ordered name -> shape map of every parameter the variant uses.

    Weights are stored (out, in) and applied as ``x @ W.T``.
    """
    variant = ModelVariant.parse(variant)
    dh, do, dr, da, df = cfg.d_hid, cfg.d_obj, cfg.d_rel, cfg.att_dim, cfg.fuse_dim
    V = ModelVariant
    shapes: dict[str, tuple] = {"embed.primary": (cfg.vocab_size, cfg.d_word)}
    if cfg.second_source:
        shapes["embed.secondary"] = (cfg.vocab_size, cfg.d_word)
    for enc in encoders_for(variant):
        for g in GATES:
            shapes[f"lstm.{enc}.W_{g}"] = (dh, cfg.d_in + dh)
        for g in GATES:
            shapes[f"lstm.{enc}.b_{g}"] = (dh,)

    needs_qg = variant not in (V.ObjRep, V.GlCap)
    if needs_qg:
        shapes.update({
            "history_gate.W": (2 * dh, 2 * dh), "history_gate.b": (2 * dh,),
            "history_proj.W": (dh, 2 * dh), "history_proj.b": (dh,),
        })
    if variant in (V.RelRep, V.VisNoRel, V.VisMod, V.DualVD):
        shapes.update({
            "relation_attention.W_question": (da, dh),
            "relation_attention.W_relation": (da, dr),
            "relation_attention.W_logit": (1, da), "relation_attention.b": (1,),
            "graph_conv.W_pair": (dh, do + dr),
            "graph_conv.W_logit": (1, dh), "graph_conv.b": (1,),
        })
    if variant is V.VisNoRel:
        shapes["no_edge"] = (dr,)
    if variant in (V.VisNoRel, V.VisMod, V.DualVD):
        shapes.update({
            "object_gate.W": (2 * do, 2 * do), "object_gate.b": (2 * do,),
            "object_proj.W": (do, 2 * do), "object_proj.b": (do,),
        })
    if variant in (V.ObjRep, V.VisNoRel, V.VisMod, V.DualVD):
        shapes.update({
            "object_attention.W_obj": (dh, do),
            "object_attention.W_logit": (1, dh), "object_attention.b": (1,),
        })
    if variant in (V.LoCap, V.SemMod, V.DualVD):
        shapes.update({
            "semantic_attention.W_question": (dh, dh), "semantic_attention.b_question": (dh,),
            "semantic_attention.W_caption": (dh, dh), "semantic_attention.b_caption": (dh,),
        })
    if variant in (V.SemMod, V.DualVD):
        shapes.update({
            "caption_gate.W": (2 * dh, 2 * dh), "caption_gate.b": (2 * dh,),
            "caption_proj.W": (dh, 2 * dh), "caption_proj.b": (dh,),
        })
    if variant is V.DualVD:
        shapes.update({
            "fuse_proj.visual.W": (df, do), "fuse_proj.visual.b": (df,),
            "fuse_proj.semantic.W": (df, dh), "fuse_proj.semantic.b": (df,),
            "fusion_gate.W": (2 * df, 2 * df), "fusion_gate.b": (2 * df,),
        })
    shapes["late_fusion.W"] = (dh, branch_dim(cfg, variant) + 2 * dh)
    shapes["late_fusion.b"] = (dh,)
    return shapes


def _rng_for(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def init_params(cfg: ModelConfig, variant) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, hashed embeddings; pure in ``cfg.seed``."""
    out = {}
    for name, shape in param_shapes(cfg, variant).items():
        if name == "embed.primary":
            out[name] = hashed_table(cfg.vocab_size, cfg.d_word, cfg.seed, 0)
        elif name == "embed.secondary":
            out[name] = hashed_table(cfg.vocab_size, cfg.d_word, cfg.seed, 1)
        elif name == "no_edge":
            bound = np.sqrt(6.0 / (shape[0] + 1))
            out[name] = _rng_for(cfg.seed, name).uniform(-bound, bound, shape)
        elif len(shape) == 1:
            out[name] = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            out[name] = _rng_for(cfg.seed, name).uniform(-bound, bound, shape)
    return out


def as_tensors(params: dict, requires_grad: bool = False) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=requires_grad, name=k) for k, v in params.items()}
