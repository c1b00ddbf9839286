"""Train the full model on the desk preset and score it (about a minute on one core)."""
# %%
from dualvd.synth import generate_dataset
from dualvd.train import RunConfig, evaluate, train

run = RunConfig.from_preset("desk", epochs=20)
dialogues, vocab = generate_dataset(run.synth_config(), seed=0)
train_set = [d for d in dialogues if d.split == "train"]
val_set = [d for d in dialogues if d.split == "val"]
print(f"{len(train_set)} training dialogues, {sum(len(d.rounds) for d in train_set)} questions")

# %%
result = train(run, train_set, val_set, len(vocab),
               on_epoch=lambda e, p, row: print(f"epoch {e:2d} lr={row['lr']:.2e} "
                                                f"loss={row['train_loss']:.4f} val R@1={row['val_r1']:.3f}"))

# %% [markdown]
# Evaluation never records a tape and never applies dropout, so repeated calls
# return identical numbers.

# %%
for name, data in (("train", train_set), ("val", val_set)):
    m = evaluate(result.params, run.variant, data, run.max_len).metrics
    print(name, {k: round(v, 4) for k, v in m.items()})
