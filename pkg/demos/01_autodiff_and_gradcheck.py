"""Walk through the tape, one fused operation, and the finite-difference checker."""
# %%
import numpy as np

from dualvd.checks import gradcheck_suite
from dualvd.gradcheck import grad_check
from dualvd.tensor import Tape, Tensor, linear, lstm, softmax

# %% [markdown]
# Gradients only exist inside a Tape. Outside one, operations run as plain
# numpy and nothing is recorded.

# %%
with Tape():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = (x * x).sum()
    y.backward()
print("d/dx sum(x^2) at [1, 2] =", x.grad)

# %%
rng = np.random.default_rng(0)
W, b = rng.standard_normal((3, 4)), np.zeros(3)
inputs = rng.standard_normal((2, 4))
with Tape():
    tw = Tensor(W, requires_grad=True)
    probs = softmax(linear(Tensor(inputs), tw, Tensor(b)), axis=-1)
    (probs * Tensor([[1.0, 0, 0], [0, 0, 1.0]])).sum().backward()
print("softmax rows sum to", probs.data.sum(-1))
print("gradient of W has shape", tw.grad.shape)

# %% [markdown]
# The LSTM is a single fused operation with its own backward pass. Masked
# steps leave the state untouched, so right padding never changes the result.

# %%
d_in, d_hid = 3, 2
Wl = rng.standard_normal((4 * d_hid, d_in + d_hid)) * 0.5
bl = np.zeros(4 * d_hid)
seq = rng.standard_normal((1, 5, d_in))
full = lstm(Tensor(seq[:, :3]), np.ones((1, 3), bool), Tensor(Wl), Tensor(bl)).data
padded = lstm(Tensor(seq), np.array([[1, 1, 1, 0, 0]], bool), Tensor(Wl), Tensor(bl)).data
print("padding-invariant:", np.array_equal(full, padded))


def loss(T):
    h = lstm(Tensor(seq), np.ones((1, 5), bool), T["W"], T["b"])
    return (h * h).sum()


print("LSTM max relative error:", grad_check(loss, {"W": Wl, "b": bl}))

# %% [markdown]
# The same checker runs over every parameterised stage of the model on a
# micro configuration. This is what `dualvd gradcheck` prints.

# %%
for r in gradcheck_suite():
    print(f"{r.name:<26} {r.max_error:.2e} {'ok' if r.ok else 'FAIL'}")
