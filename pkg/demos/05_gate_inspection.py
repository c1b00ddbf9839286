"""Read attention weights and the visual/semantic gate for individual questions."""
# %%
import math

import numpy as np

from dualvd.model import gate_ratio
from dualvd.synth import generate_dataset
from dualvd.train import RunConfig, evaluate, train

run = RunConfig.from_preset("desk", epochs=20)
dialogues, vocab = generate_dataset(run.synth_config(), seed=0)
train_set = [d for d in dialogues if d.split == "train"]
result = train(run, train_set, None, len(vocab))
res = evaluate(result.params, "DualVD", train_set, run.max_len)

# %% [markdown]
# For each question the trace holds relation attention (joint over all object
# pairs), per-node neighbour attention, object attention and caption attention.
# Caption index 0 is the global caption.

# %%
d = train_set[0]
for t in range(4):
    tr = res.traces[t]
    q = " ".join(vocab.decode(d.rounds[t].question_tokens))
    vis, sem = gate_ratio(tr.gate_s)
    print(f"{q:<30} top object={int(np.argmax(tr.gamma))} top caption={int(np.argmax(tr.delta))} "
          f"visual={vis:.3f} semantic={sem:.3f}")

# %% [markdown]
# Averaging the semantic share by question type shows how far the gate
# separates the two modalities on this data.

# %%
groups = {}
for mod, tr in zip(res.modality, res.traces):
    groups.setdefault(mod, []).append(gate_ratio(tr.gate_s)[1])
for mod, vals in sorted(groups.items()):
    print(f"{mod:>8}: mean semantic fraction {math.fsum(vals) / len(vals):.4f} over {len(vals)} questions")
