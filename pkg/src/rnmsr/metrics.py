"""Top-N ranking metrics for a single held-out target per query.

Ranks are 1-based under descending score; equal scores are ordered by
ascending item index.  A target ranked below N scores 0 on every metric.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

DEFAULT_NS = (1, 3, 5, 10, 20)


def rank_of(scores, target: int) -> int:
    return int(kernels.target_ranks(np.asarray(scores, dtype=np.float64)[None, :], [target])[0])


def precision_at(scores, target: int, n: int) -> float:
    return 1.0 if rank_of(scores, target) <= n else 0.0


def mrr_at(scores, target: int, n: int) -> float:
    r = rank_of(scores, target)
    return 1.0 / r if r <= n else 0.0


def ndcg_at(scores, target: int, n: int) -> float:
    r = rank_of(scores, target)
    return 1.0 / math.log2(r + 1) if r <= n else 0.0


def metric_sums(ranks: np.ndarray, ns=DEFAULT_NS) -> dict[str, float]:
    ranks = np.asarray(ranks)
    out = {}
    for n in ns:
        hit = ranks <= n
        out[f"P@{n}"] = float(hit.sum())
        out[f"MRR@{n}"] = float(np.where(hit, 1.0 / ranks, 0.0).sum())
        out[f"NDCG@{n}"] = float(np.where(hit, 1.0 / np.log2(ranks + 1.0), 0.0).sum())
    return out


@dataclass
class EvalReport:
    metrics: dict[str, float] = field(default_factory=dict)
    count: int = 0
    ns: tuple = DEFAULT_NS

    def __getitem__(self, key):
        return self.metrics[key]

    def to_json(self) -> str:
        return json.dumps({"count": self.count, "metrics": self.metrics}, indent=2)

    def csv_header(self) -> list[str]:
        return [f"{m}@{n}" for m in ("P", "MRR", "NDCG") for n in self.ns]

    def csv_row(self) -> list[str]:
        return [f"{self.metrics[k]:.6f}" for k in self.csv_header()]


def report_from_ranks(ranks, ns=DEFAULT_NS) -> EvalReport:
    ranks = np.asarray(ranks)
    sums = metric_sums(ranks, ns)
    count = len(ranks)
    return EvalReport({k: v / count if count else 0.0 for k, v in sums.items()}, count, tuple(ns))


def evaluate_scorer(score_fn, pairs, ns=DEFAULT_NS, batch_size: int = 100) -> EvalReport:
    """Average metrics of ``score_fn(prefixes) -> (B, n_items + 1)`` over pairs.

    Column 0 of the scores is padding and never ranked.
    """
    ranks = []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        scores = np.asarray(score_fn([p for p, _ in chunk]), dtype=np.float64)
        targets = np.array([t for _, t in chunk], dtype=np.int64)
        ranks.append(kernels.target_ranks(np.ascontiguousarray(scores[:, 1:]), targets - 1))
    return report_from_ranks(np.concatenate(ranks) if ranks else np.zeros(0, dtype=np.int64), ns)
