"""Adam and the warm-up + cosine-annealing learning-rate schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import DimensionError


@dataclass
class OptimizerState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: OptimizerState, lr: float):
    """One bias-corrected Adam update, applied in place to ``params``.

    Parameters without an entry in ``grads`` are treated as having zero
    gradient. Returns ``(params, state)``.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if np.shape(g) != params[name].shape:
            raise DimensionError(f"{name}: grad {np.shape(g)} vs param {params[name].shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass(frozen=True)
class LrSchedule:
    eta_max: float = 1e-3
    eta_min: float = 3.4e-4
    warmup_epochs: int = 2
    warmup_factor: float = 0.2
    total_epochs: int = 16

    @property
    def cosine_epochs(self) -> int:
        return self.total_epochs - self.warmup_epochs


def cosine_lr(t: float, sched: LrSchedule) -> float:
    """Annealed rate ``t`` epochs after warm-up; ``t`` may reach the phase length."""
    span = sched.cosine_epochs
    if span <= 0 or not 0 <= t <= span:
        raise ValueError(f"cosine time {t} outside [0, {span}]")
    return sched.eta_min + 0.5 * (sched.eta_max - sched.eta_min) * (1.0 + math.cos(math.pi * t / span))


def lr_at(epoch: float, sched: LrSchedule = LrSchedule()) -> float:
    if not 0 <= epoch < sched.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {sched.total_epochs})")
    if epoch < sched.warmup_epochs:
        frac = epoch / sched.warmup_epochs
        return sched.eta_max * (sched.warmup_factor + (1.0 - sched.warmup_factor) * frac)
    return cosine_lr(epoch - sched.warmup_epochs, sched)
