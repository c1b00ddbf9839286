"""What one synthetic dialogue contains, and where each answer can be found."""
# %%
import numpy as np

from dualvd.oracle import oracle_gt_index
from dualvd.synth import RELATIONS, SynthConfig, generate_dataset

cfg = SynthConfig(dialogues=2, val_dialogues=0)
dialogues, vocab = generate_dataset(cfg, seed=0)
d = dialogues[0]

# %% [markdown]
# Object features carry a one-hot type block and a one-hot colour block plus
# noise. Relation embeddings carry a one-hot relation label. Moods and the
# scene live only in the captions.

# %%
types = [cfg.types[i] for i in d.graph.obj_feats[:, : cfg.n_types].argmax(1)]
colors = [cfg.colors[i] for i in d.graph.obj_feats[:, cfg.n_types : cfg.n_types + cfg.n_colors].argmax(1)]
print("objects:", list(zip(types, colors)))
labels = d.graph.rel_embeds[..., : len(RELATIONS)].argmax(-1)
i, j = np.argwhere(labels == RELATIONS.index("holds"))[0]
print(f"the only 'holds' edge: {types[i]} -> {types[j]}")

# %%
print("caption:", " ".join(vocab.decode(d.caption_tokens)))
for cap in d.dense_caption_tokens:
    print("  dense:", " ".join(vocab.decode(cap)))

# %% [markdown]
# Every question is tagged with the modality that can answer it, and the rule
# interpreter in `dualvd.oracle` re-derives each answer from the file alone.

# %%
for t, r in enumerate(d.rounds):
    q = " ".join(vocab.decode(r.question_tokens))
    a = " ".join(vocab.decode(r.candidate_tokens[r.gt_index]))
    agree = oracle_gt_index(d, t, vocab, cfg) == r.gt_index
    print(f"[{r.modality_tag:>8}] {q:<32} -> {a:<8} oracle agrees: {agree}")
