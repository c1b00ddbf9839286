"""Dense float64 tensors with tape-based reverse-mode autodiff.

Operations are recorded on the innermost active :class:`Tape`. Outside of a
tape nothing is recorded, which is how evaluation runs without gradient
bookkeeping::

    with Tape() as tape:
        x = Tensor([1.0, 2.0], requires_grad=True)
        y = (x * x).sum()
        y.backward()
    x.grad  # array([2., 4.])
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

__all__ = [
    "DimensionError",
    "Tape",
    "Tensor",
    "as_tensor",
    "add",
    "mul",
    "matmul",
    "linear",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "softmax",
    "log_softmax",
    "concat",
    "embedding",
    "lstm",
    "softmax_np",
]


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


_TAPES: list["Tape"] = []


class Tape:
    """Records differentiable operations of one forward pass, in execution order."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple, object]] = []
        self.leaves: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def record(self, out: "Tensor", parents: tuple, backward) -> None:
        out._tape = self
        self.nodes.append((out, parents, backward))

    def backward(self, out: "Tensor", grad=None) -> None:
        if grad is None:
            if out.data.size != 1:
                raise DimensionError("backward() without grad needs a scalar output")
            grad = np.ones_like(out.data)
        grads = {id(out): np.asarray(grad, dtype=np.float64)}
        leaves = {}
        for node_out, parents, fn in reversed(self.nodes):
            g = grads.pop(id(node_out), None)
            if g is None:
                continue
            node_out.grad = g
            for parent, pg in zip(parents, fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                if parent._tape is None:
                    leaves[key] = parent
        for node_out, parents, _ in self.nodes:
            for p in parents:
                if p.requires_grad and p._tape is None:
                    leaves.setdefault(id(p), p)
        for leaf in self.leaves:
            leaves.setdefault(id(leaf), leaf)
        for key, leaf in leaves.items():
            g = grads.get(key)
            leaf.grad = np.zeros_like(leaf.data) if g is None else g


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._tape = None
        if requires_grad and _TAPES:
            _TAPES[-1].leaves.append(self)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def backward(self, grad=None) -> None:
        if self._tape is None:
            raise RuntimeError("tensor was not produced on a tape")
        self._tape.backward(self, grad)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return tsum(self, axis, keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, a: int, b: int):
        return swapaxes(self, a, b)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents: tuple, backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out._tape = None
    tape = _TAPES[-1] if _TAPES else None
    out.requires_grad = tape is not None and any(p.requires_grad for p in parents)
    if out.requires_grad:
        tape.record(out, parents, backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_broadcast(a: np.ndarray, b: np.ndarray) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast {a.shape} with {b.shape}") from exc


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data)
    sa, sb = a.shape, b.shape
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
    )


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data)
    ad, bd = a.data, b.data
    return _result(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product; both operands need at least two axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _result(ad @ bd, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` for ``weight`` of shape (out, in)."""
    x = as_tensor(x)
    xd, wd = x.data, weight.data
    if wd.ndim != 2 or xd.shape[-1] != wd.shape[1]:
        raise DimensionError(f"linear: input {xd.shape} vs weight {wd.shape}")
    out = xd @ wd.T
    if bias is not None:
        if bias.shape != (wd.shape[0],):
            raise DimensionError(f"linear: bias {bias.shape} vs weight {wd.shape}")
        out = out + bias.data

    def backward(g):
        gx = g @ wd
        g2 = g.reshape(-1, g.shape[-1])
        gw = g2.T @ xd.reshape(-1, xd.shape[-1])
        gb = g2.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _result(out, parents, backward)


# Largest and smallest float64 strictly inside (0, 1): saturated gates never read exactly 0 or 1.
_SIG_LO = np.finfo(np.float64).tiny
_SIG_HI = 1.0 - np.finfo(np.float64).epsneg


def sigmoid(a: Tensor) -> Tensor:
    y = np.clip(expit(a.data), _SIG_LO, _SIG_HI)
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _result(y, (a,), lambda g: (g * y,))


def log(a: Tensor) -> Tensor:
    x = a.data
    return _result(np.log(x), (a,), lambda g: (g / x,))


def softmax_np(x, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or x.shape[axis] == 0:
        raise DimensionError("softmax of an empty vector")
    z = np.exp(x - x.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    y = softmax_np(a.data, axis)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _result(y, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    if x.size == 0 or x.shape[axis] == 0:
        raise DimensionError("log_softmax of an empty vector")
    shifted = x - x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    p = np.exp(y)
    return _result(y, (a,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _result(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    return _result(np.swapaxes(a.data, i, j), (a,), lambda g: (np.swapaxes(g, i, j),))


def broadcast_to(a: Tensor, shape: tuple) -> Tensor:
    old = a.shape
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast {old} to {shape}") from exc
    return _result(data, (a,), lambda g: (_unbroadcast(g, old),))


def getitem(a: Tensor, index) -> Tensor:
    shape = a.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return _result(a.data[index], (a,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(str(exc)) from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result(data, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)))


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup. Row 0 is the pad row and never receives gradient."""
    ids = np.asarray(ids, dtype=np.int64)
    vocab = table.shape[0]

    def backward(g):
        gt = np.zeros(table.shape)
        np.add.at(gt, ids, g)
        gt[0] = 0.0
        return (gt,)

    return _result(table.data[ids], (table,), backward)


def lstm(x: Tensor, mask, weight: Tensor, bias: Tensor) -> Tensor:
    """Masked LSTM over ``x`` of shape (B, T, d_in); returns the final hidden state.

    ``weight`` stacks the input, forget, cell and output gates row-wise and has
    shape (4*d_hid, d_in + d_hid); ``bias`` has shape (4*d_hid,). Steps where
    ``mask`` is false leave the state untouched, so padding anywhere is inert.
    State starts at zero.
    """
    xd = x.data
    W, b = weight.data, bias.data
    if xd.ndim != 3:
        raise DimensionError(f"lstm expects (B, T, d_in), got {xd.shape}")
    B, T, d_in = xd.shape
    d_hid = W.shape[0] // 4
    if W.shape != (4 * d_hid, d_in + d_hid) or b.shape != (4 * d_hid,):
        raise DimensionError(f"lstm weight {W.shape} / bias {b.shape} for d_in={d_in}")
    m = np.asarray(mask, dtype=bool).reshape(B, T)
    h = np.zeros((B, d_hid))
    c = np.zeros((B, d_hid))
    cache = []
    for t in range(T):
        xh = np.concatenate([xd[:, t], h], axis=1)
        z = xh @ W.T + b
        i = expit(z[:, :d_hid])
        f = expit(z[:, d_hid : 2 * d_hid])
        gg = np.tanh(z[:, 2 * d_hid : 3 * d_hid])
        o = expit(z[:, 3 * d_hid :])
        c_new = f * c + i * gg
        tc = np.tanh(c_new)
        h_new = o * tc
        mt = m[:, t : t + 1]
        cache.append((xh, c, i, f, gg, o, tc, mt))
        c = np.where(mt, c_new, c)
        h = np.where(mt, h_new, h)

    def backward(gh):
        gx = np.zeros_like(xd)
        gW = np.zeros_like(W)
        gb = np.zeros_like(b)
        dh = gh
        dc = np.zeros((B, d_hid))
        for t in range(T - 1, -1, -1):
            xh, c_prev, i, f, gg, o, tc, mt = cache[t]
            dh_new = np.where(mt, dh, 0.0)
            dc_new = np.where(mt, dc, 0.0)
            do = dh_new * tc
            dcn = dc_new + dh_new * o * (1.0 - tc * tc)
            dz = np.concatenate(
                [
                    dcn * gg * i * (1.0 - i),
                    dcn * c_prev * f * (1.0 - f),
                    dcn * i * (1.0 - gg * gg),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            gW += dz.T @ xh
            gb += dz.sum(axis=0)
            dxh = dz @ W
            gx[:, t] = dxh[:, :d_in]
            dh = dxh[:, d_in:] + np.where(mt, 0.0, dh)
            dc = dcn * f + np.where(mt, 0.0, dc)
        return gx, gW, gb

    return _result(h, (x, weight, bias), backward)
