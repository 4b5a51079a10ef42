"""Mini-batch training, evaluation and the ablation harness."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import diffcore as dc
from .data import Dataset
from .metrics import DEFAULT_NS, EvalReport, evaluate_scorer
from .model import RNMSR, ModelConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 100
    epochs: int = 10
    seed: int = 0
    patience: int = 3
    eval_batch_size: int = 500
    model: ModelConfig = field(default_factory=ModelConfig)
    optim: dc.OptimizerConfig = field(default_factory=dc.OptimizerConfig)


def batches(pairs, batch_size, rng=None):
    order = np.arange(len(pairs)) if rng is None else rng.permutation(len(pairs))
    for start in range(0, len(pairs), batch_size):
        yield [pairs[k] for k in order[start : start + batch_size]]


def train_step(model: RNMSR, chunk, optim: dc.OptimizerConfig, epoch: int) -> float:
    params = list(model.params.values())
    dc.zero_grad(params)
    b = model.batch([p for p, _ in chunk], [t for _, t in chunk])
    loss = model.loss(model.forward(b, train=True))
    dc.backward(loss)
    dc.adam_step(params, optim, epoch)
    return float(loss.data)


def evaluate(model: RNMSR, pairs, ns=DEFAULT_NS, batch_size: int = 500) -> EvalReport:
    return evaluate_scorer(model.predict, pairs, ns, batch_size)


def train(dataset: Dataset, config: TrainConfig, log_path=None, ckpt_path=None, on_epoch=None):
    """Train with step-decayed Adam; keep the parameters with the best
    validation MRR@20, stopping after ``patience`` epochs without improvement.

    Returns ``(model, history)`` with one dict per epoch in ``history``.
    """
    if not dataset.train:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    model = RNMSR(dataset.n_items, config.model, seed=config.seed)
    history = []
    best, best_snap, stale = -1.0, None, 0
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(config.epochs):
            t0 = time.perf_counter()
            losses, sizes = [], []
            for chunk in batches(dataset.train, config.batch_size, rng):
                losses.append(train_step(model, chunk, config.optim, epoch))
                sizes.append(len(chunk))
            entry = {
                "epoch": epoch,
                "lr": config.optim.lr_at(epoch),
                "loss": float(np.average(losses, weights=sizes)),
            }
            if dataset.valid:
                rep = evaluate(model, dataset.valid, (20,), config.eval_batch_size)
                entry["valid_P@20"] = rep["P@20"]
                entry["valid_MRR@20"] = rep["MRR@20"]
                score = rep["MRR@20"]
            else:
                score = -entry["loss"]
            entry["seconds"] = round(time.perf_counter() - t0, 3)
            history.append(entry)
            log.info("epoch %d %s", epoch, entry)
            if log_fh:
                log_fh.write(json.dumps(entry) + "\n")
                log_fh.flush()
            if on_epoch:
                on_epoch(model, entry)
            if score > best:
                best, best_snap, stale = score, model.snapshot(), 0
                if ckpt_path:
                    model.save(ckpt_path, {"epoch": epoch, "seed": config.seed})
            else:
                stale += 1
                if config.patience and stale >= config.patience:
                    break
    finally:
        if log_fh:
            log_fh.close()
    if best_snap is not None:
        model.restore(best_snap)
    return model, history


VARIANTS = {
    "w/o IIRL": {"no_iirl": True},
    "w/o SSG": {"seq_graph": True},
    "w/o GBP-r": {"no_gbp_r": True},
    "w/o GBP-d": {"no_gbp_d": True},
    "w/o GBP": {"no_gbp": True},
    "RNMSR": {},
}


def run_ablation(dataset: Dataset, config: TrainConfig, ns=DEFAULT_NS, eval_pairs=None):
    """Train and test every ablation variant with the same seed and split."""
    pairs = dataset.test if eval_pairs is None else eval_pairs
    results = {}
    for name, flags in VARIANTS.items():
        cfg = replace(config, model=replace(config.model, **flags))
        model, _ = train(dataset, cfg)
        results[name] = evaluate(model, pairs, ns, config.eval_batch_size)
        log.info("%s %s", name, results[name].metrics)
    return results


def ablation_csv(results: dict[str, EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    first = next(iter(results.values()))
    w.writerow(["variant", "count"] + first.csv_header())
    for name, rep in results.items():
        w.writerow([name, rep.count] + rep.csv_row())
    return buf.getvalue()
