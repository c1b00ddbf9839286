"""Retrieval metrics over ranked candidate lists: MRR, R@k, mean rank and NDCG."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .semantic import ConfigurationError

# True where larger is better; used to sort comparison tables.
HIGHER_IS_BETTER = {"MRR": True, "R@1": True, "R@5": True, "R@10": True, "Mean": False, "NDCG": True}


@dataclass
class EvalRecord:
    """Rank of the ground truth plus, for NDCG, the model's rank of every
    candidate and graded relevance scores."""

    rank_of_gt: int
    relevance: Sequence[float] | None = None
    ranks: Sequence[int] | None = None

    def __post_init__(self):
        if self.rank_of_gt < 1:
            raise ValueError(f"rank_of_gt must be >= 1, got {self.rank_of_gt}")
        if self.relevance is not None:
            rel = np.asarray(self.relevance, dtype=np.float64)
            if (rel < 0).any() or not (rel > 0).any():
                raise ValueError("relevance must be non-negative with a positive entry")
            if self.rank_of_gt > rel.size:
                raise ValueError("rank_of_gt exceeds the number of candidates")


def ndcg(ranks, relevance) -> float:
    """NDCG over the top K positions, K = number of candidates with positive relevance."""
    rel = np.asarray(relevance, dtype=np.float64)
    ranks = np.asarray(ranks)
    K = int((rel > 0).sum())
    discounts = 1.0 / np.log2(np.arange(2, K + 2))
    by_model = rel[np.argsort(ranks, kind="stable")][:K]
    ideal = np.sort(rel)[::-1][:K]
    return math.fsum(by_model * discounts) / math.fsum(ideal * discounts)


def compute_metrics(records: Sequence[EvalRecord], ks=(1, 5, 10), with_ndcg: bool | None = None) -> dict:
    """Aggregate metrics. NDCG is included when every record carries ranks
    and relevance, or forced with ``with_ndcg=True``."""
    if not records:
        raise ValueError("no records to evaluate")
    n = len(records)
    ranks = [r.rank_of_gt for r in records]
    out = {"MRR": math.fsum(1.0 / r for r in ranks) / n}
    for k in ks:
        out[f"R@{k}"] = sum(r <= k for r in ranks) / n
    out["Mean"] = math.fsum(ranks) / n
    has_rel = all(r.relevance is not None and r.ranks is not None for r in records)
    if with_ndcg is None:
        with_ndcg = has_rel
    if with_ndcg:
        if not has_rel:
            raise ConfigurationError("NDCG needs candidate ranks and relevance for every record")
        out["NDCG"] = math.fsum(ndcg(r.ranks, r.relevance) for r in records) / n
    return out


def records_from_predictions(path) -> list[EvalRecord]:
    """Read prediction JSON Lines as written by evaluation."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            ranks = rec["ranks"]
            out.append(EvalRecord(int(ranks[rec["gt_index"]]), rec.get("relevance"), ranks))
    return out


def write_report(path, metrics: dict, **extra) -> None:
    payload = {"metrics": metrics, "higher_is_better": {k: HIGHER_IS_BETTER.get(k, True) for k in metrics}}
    payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


COLUMNS = ("MRR", "R@1", "R@5", "R@10", "Mean", "NDCG")


def metrics_csv(rows: Sequence[tuple[str, dict]]) -> str:
    """One row per variant, in the given order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("variant",) + COLUMNS)
    for name, m in rows:
        w.writerow((name,) + tuple(repr(float(m[c])) if c in m else "" for c in COLUMNS))
    return buf.getvalue()
