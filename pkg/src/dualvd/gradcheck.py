"""Central finite-difference checks for tape gradients."""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import Tape, Tensor


class EvaluationError(ArithmeticError):
    """The checked function returned a non-finite value."""


def _scalar(value) -> float:
    v = float(np.asarray(value.data if isinstance(value, Tensor) else value).reshape(-1)[0])
    if not np.isfinite(v):
        raise EvaluationError(f"non-finite function value {v}")
    return v


def autodiff_grads(f: Callable, point: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    with Tape():
        params = {k: Tensor(v, requires_grad=True, name=k) for k, v in point.items()}
        out = f(params)
        if isinstance(out, Tensor) and out.requires_grad:
            out.backward()
    _scalar(out)
    return {
        k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()
    }


def grad_errors(
    f: Callable, point: Mapping[str, np.ndarray], h: float = 1e-6
) -> dict[str, float]:
    """Max relative error per named parameter.

    ``f`` maps a dict of named Tensors to a scalar Tensor. The error of one
    entry is ``|autodiff - fd| / max(1, |fd|)`` with ``fd`` the central
    difference at step ``h``.
    """
    point = {k: np.array(v, dtype=np.float64) for k, v in point.items()}
    analytic = autodiff_grads(f, point)
    errors = {}
    for name, value in point.items():
        worst = 0.0
        flat = value.reshape(-1)
        ga = analytic[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = _scalar(f({k: Tensor(v) for k, v in point.items()}))
            flat[idx] = orig - h
            down = _scalar(f({k: Tensor(v) for k, v in point.items()}))
            flat[idx] = orig
            fd = (up - down) / (2.0 * h)
            worst = max(worst, abs(ga[idx] - fd) / max(1.0, abs(fd)))
        errors[name] = worst
    return errors


def grad_check(f: Callable, point: Mapping[str, np.ndarray], h: float = 1e-6) -> float:
    errors = grad_errors(f, point, h)
    return max(errors.values(), default=0.0)
