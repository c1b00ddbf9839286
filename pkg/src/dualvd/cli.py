"""Command line: generate | train | eval | ablate | gradcheck | inspect-gates.

Exit codes: 0 ok, 1 check failure, 2 input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import checkpoint
from .checks import gradcheck_suite
from .checkpoint import CheckpointError
from .data import DatasetError, read_dataset
from .metrics import metrics_csv, write_report
from .model import gate_ratio
from .params import ModelConfig, ModelVariant, param_shapes
from .synth import GenerationError, write_generated
from .tensor import DimensionError
from .text import Vocabulary, VocabularyError
from .train import NumericError, RunConfig, ablate, data_dims, evaluate, max_token_id, train

log = logging.getLogger("dualvd")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    pass


def _run_config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "config", None):
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
    preset = args.preset or overrides.pop("preset", "desk")
    overrides.pop("preset", None)
    for key in ("seed", "variant", "epochs", "dataset", "batch_size"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    try:
        run = RunConfig.from_preset(preset, **overrides)
        ModelVariant.parse(run.variant)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    return run


def _vocab_size(dataset: Path, dialogues) -> int:
    vocab_file = dataset.parent / "vocab.json"
    if vocab_file.is_file():
        return len(Vocabulary.load(vocab_file))
    return max_token_id(dialogues) + 1


def _load(path, split=None):
    if path is None:
        raise InputError("no dataset given (--dataset or \"dataset\" in --config)")
    dialogues = read_dataset(path, split)
    if not dialogues:
        raise InputError(f"dataset {path} has no dialogues for split {split!r}")
    return dialogues


def _out_dir(run: RunConfig) -> Path:
    out = Path(run.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    run = _run_config(args)
    synth = run.synth_config()
    path = write_generated(_out_dir(run), synth, run.seed)
    print(f"wrote {path}")
    return EXIT_OK


def _save_run(out: Path, run: RunConfig, mcfg: ModelConfig) -> None:
    payload = {"run": asdict(run), "model": mcfg.to_dict()}
    (out / "run.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    run = _run_config(args)
    out = _out_dir(run)
    dataset = Path(run.dataset) if run.dataset else None
    train_set = _load(dataset, "train")
    val_set = read_dataset(dataset, "val")
    vocab_size = _vocab_size(dataset, train_set + val_set)
    d_obj, d_rel = data_dims(train_set)
    mcfg = run.model_config(vocab_size, d_obj, d_rel)
    _save_run(out, run, mcfg)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    rows = []

    def on_epoch(epoch, params, row):
        rows.append(row)
        if run.checkpoint_every and (epoch + 1) % run.checkpoint_every == 0:
            checkpoint.save(ckpt_dir / f"epoch_{epoch:03d}.dvd", params)
        print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))

    result = train(run, train_set, val_set, vocab_size, on_epoch=on_epoch)
    checkpoint.save(out / "model.dvd", result.params)
    cols = ["epoch", "lr", "train_loss", "val_mrr", "val_r1"]
    if run.stop_at_train_r1 is not None:
        cols.append("train_r1")
    with open(out / "train_log.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r.get(c), float) else r.get(c, "") for c in cols])
    print(f"wrote {out / 'model.dvd'}")
    return EXIT_OK


def _load_model(ckpt_path: Path):
    run_file = ckpt_path.parent / "run.json"
    if not run_file.is_file():
        run_file = ckpt_path.parent.parent / "run.json"
    if not run_file.is_file():
        raise InputError(f"no run.json next to {ckpt_path}")
    meta = json.loads(run_file.read_text())
    run = RunConfig(**meta["run"])
    mcfg = ModelConfig.from_dict(meta["model"])
    params = checkpoint.load(ckpt_path)
    expected = param_shapes(mcfg, run.variant)
    got = {k: v.shape for k, v in params.items()}
    if got != expected:
        raise InputError(f"checkpoint {ckpt_path} does not match its run configuration")
    return run, mcfg, params


def _check_dims(mcfg: ModelConfig, dialogues, vocab_size: int) -> None:
    d_obj, d_rel = data_dims(dialogues)
    if (d_obj, d_rel) != (mcfg.d_obj, mcfg.d_rel) or vocab_size > mcfg.vocab_size:
        raise InputError(
            f"dataset dims d_obj={d_obj} d_rel={d_rel} vocab={vocab_size} do not match model "
            f"d_obj={mcfg.d_obj} d_rel={mcfg.d_rel} vocab={mcfg.vocab_size}"
        )


def _evaluate_checkpoint(args):
    run, mcfg, params = _load_model(Path(args.checkpoint))
    dataset = Path(args.dataset or run.dataset or "")
    dialogues = _load(dataset, args.split)
    _check_dims(mcfg, dialogues, max_token_id(dialogues) + 1)
    override = None
    if getattr(args, "oracle_scores", False):
        def override(batch, probs):
            return np.eye(probs.shape[1])[batch.gt]
    return run, evaluate(params, run.variant, dialogues, run.max_len, score_override=override)


def cmd_eval(args) -> int:
    run, res = _evaluate_checkpoint(args)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "metrics.json", res.metrics, variant=run.variant, split=args.split,
                 questions=len(res.question_ids))
    with open(out / "predictions.jsonl", "w", newline="\n") as fh:
        for row in res.prediction_rows(run.variant):
            fh.write(json.dumps(row) + "\n")
    with open(out / "gate_traces.jsonl", "w", newline="\n") as fh:
        for qid, tr in zip(res.question_ids, res.traces):
            fh.write(json.dumps(tr.to_json(qid)) + "\n")
    print(json.dumps(res.metrics, sort_keys=True))
    return EXIT_OK


def cmd_inspect_gates(args) -> int:
    _, res = _evaluate_checkpoint(args)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "gates.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["question_id", "modality_tag", "visual_fraction", "semantic_fraction",
                    "top_object", "top_caption"])
        for qid, mod, tr in zip(res.question_ids, res.modality, res.traces):
            vis, sem = gate_ratio(tr.gate_s) if tr.gate_s is not None else ("", "")
            top_obj = int(np.argmax(tr.gamma)) if tr.gamma is not None else ""
            top_cap = int(np.argmax(tr.delta)) if tr.delta is not None else ""
            w.writerow([qid, mod, repr(vis) if vis != "" else "", repr(sem) if sem != "" else "", top_obj, top_cap])
    print(f"wrote {path}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    run = _run_config(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    try:
        variants = [ModelVariant.parse(v) for v in variants]
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if not variants:
        raise InputError("no variants given")
    dataset = Path(run.dataset) if run.dataset else None
    train_set = _load(dataset, "train")
    val_set = read_dataset(dataset, "val")
    eval_set = train_set if args.split == "train" else _load(dataset, args.split)
    rows = ablate(run, variants, train_set, None, eval_set, _vocab_size(dataset, train_set + val_set))
    out = _out_dir(run)
    table = metrics_csv([(name, m) for name, m, _ in rows])
    (out / "ablation.csv").write_text(table)
    print(table, end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = gradcheck_suite(seed=args.seed if args.seed is not None else 42)
    failed = False
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status} {r.name:<24} max_rel_err={r.max_error:.3e}")
        if not r.ok:
            failed = True
            print("    offending: " + ", ".join(r.offenders()))
    return EXIT_CHECK if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualvd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, variant=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--preset", choices=["desk", "paper"])
        p.add_argument("--out", help="output directory")
        if variant:
            p.add_argument("--variant", help="ablation variant name")

    p = sub.add_parser("generate", help="write a synthetic dataset")
    common(p, variant=False)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one variant")
    common(p)
    p.add_argument("--dataset")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "evaluate a checkpoint"),
                                 ("inspect-gates", cmd_inspect_gates, "per-question gate ratios")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--dataset")
        p.add_argument("--split", default="val", choices=["train", "val"])
        p.add_argument("--out")
        p.add_argument("--oracle-scores", action="store_true", help=argparse.SUPPRESS)
        p.set_defaults(func=func)

    p = sub.add_parser("ablate", help="train and compare several variants")
    common(p, variant=False)
    p.add_argument("--dataset")
    p.add_argument("--epochs", type=int)
    p.add_argument("--variants", default=",".join(v.value for v in ModelVariant))
    p.add_argument("--split", default="train", choices=["train", "val"])
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check of every operation")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, DatasetError, CheckpointError, DimensionError, VocabularyError,
            GenerationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
