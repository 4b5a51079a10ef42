"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""
import itertools
import time
from collections import Counter, defaultdict
from dataclasses import replace

import numpy as np
import pytest

from rnmsr import data, gbp, graph, metrics, synth
from rnmsr import diffcore as dc
from rnmsr import train as tr
from rnmsr.model import RNMSR, ModelConfig
from conftest import loss_and_grads, numeric_grad, overfit_pairs, rel_error
from oracles import graph_neighbors, rank_metrics

criterion = pytest.mark.criterion


def brute_force_patterns(l_max):
    out = []
    for n in range(1, l_max + 1):
        for cand in itertools.product(range(1, n + 1), repeat=n):
            if cand[0] == 1 and all(cand[i] <= max(cand[:i]) + 1 for i in range(1, n)):
                out.append(cand)
    return sorted(out)


def independent_pattern(seq, l_max=6):
    keys, out = {}, []
    for item in seq[-l_max:]:
        keys.setdefault(item, len(keys) + 1)
        out.append(keys[item])
    return tuple(out)


@criterion(1, "pattern enumeration: 278 patterns, per-length counts, brute-force match, < 1 s")
def test_enumeration():
    t0 = time.perf_counter()
    pats = gbp.enumerate_patterns(6)
    elapsed = time.perf_counter() - t0
    assert len(pats) == 278
    counts = Counter(len(p) for p in pats)
    assert [counts[n] for n in range(1, 7)] == [1, 2, 5, 15, 52, 203]
    assert sorted(pats) == brute_force_patterns(6)
    assert elapsed < 1.0


@criterion(2, "relabeling invariance on 1000 random sessions")
def test_relabel_invariance():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        session = rng.integers(0, 15, size=rng.integers(1, 20)).tolist()
        labels = sorted(set(session))
        image = rng.choice(10**6, size=len(labels), replace=False).tolist()
        bij = dict(zip(labels, image))
        assert gbp.extract_gbp([bij[i] for i in session]) == gbp.extract_gbp(session)


@criterion(3, "distribution contracts on 1000 random model inputs")
def test_distribution_contracts():
    rng = np.random.default_rng(3)
    flags = [{}, {"no_gbp": True}, {"seq_graph": True}, {"no_iirl": True}]
    done = 0
    for k, extra in enumerate(flags):
        n_items = int(rng.integers(10, 60))
        model = RNMSR(n_items, ModelConfig(dim=16, dropout=0.0, init_std=0.5, **extra), seed=k)
        for _ in range(5):
            prefixes = [rng.integers(1, n_items + 1, size=rng.integers(1, 25)).tolist() for _ in range(50)]
            t = model.forward(prefixes)
            probs = t.probs.data.astype(np.float64)
            assert np.abs(probs.sum(1) - 1.0).max() <= 1e-6
            assert (t.mode.data.sum(1) == 1.0).all()
            assert (probs[:, 0] == 0).all()
            for b, p in enumerate(prefixes):
                window = sorted(set(p[-6:]))
                outside = np.setdiff1d(np.arange(1, n_items + 1), window)
                assert (t.explore.data[b, window] == 0).all()
                assert (t.repeat_items.data[b, outside] == 0).all()
            done += len(prefixes)
    assert done == 1000


@criterion(4, "gradient check d=8 |V|=20, 3 sessions, rel. error < 1e-4, < 30 s")
def test_gradient_check(tiny_model, tiny_batch):
    t0 = time.perf_counter()
    prefixes, targets = tiny_batch
    model = tiny_model
    loss_and_grads(model, prefixes, targets)

    def f():
        return float(model.loss(model.forward(model.batch(prefixes, targets))).data)

    worst = 0.0
    for p in model.params.values():
        worst = max(worst, rel_error(p.grad.copy(), numeric_grad(f, p.data, h=1e-5)))
    assert worst < 1e-4
    assert time.perf_counter() - t0 < 30


@criterion(5, "overfit 100 synthetic sessions, d=32, <= 50 epochs, train P@1 >= 0.9, < 2 min")
def test_overfit():
    t0 = time.perf_counter()
    pairs, n_items = overfit_pairs()
    ds = data.Dataset(pairs, [], [], {str(k): k for k in range(1, n_items + 1)})
    cfg = tr.TrainConfig(
        batch_size=20, epochs=50, seed=0, patience=0,
        model=ModelConfig(dim=32, dropout=0.0),
        optim=dc.OptimizerConfig(lr=0.01, decay_every=0, l2=0.0),
    )
    model, _ = tr.train(ds, cfg)
    assert tr.evaluate(model, pairs, (1,))["P@1"] >= 0.9
    assert time.perf_counter() - t0 < 120


def test_overfit_loss_decreases_first_steps():
    pairs, n_items = overfit_pairs()
    model = RNMSR(n_items, ModelConfig(dim=32, dropout=0.0), seed=0)
    losses = [tr.train_step(model, pairs[:100], dc.OptimizerConfig(lr=1e-3), 0) for _ in range(6)]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def mode_dataset(n=10_000, n_items=100):
    train, _ = synth.synth_mode_separable(n, n_items, seed=1)
    valid, _ = synth.synth_mode_separable(n // 10, n_items, seed=2)
    test, groups = synth.synth_mode_separable(n // 2, n_items, seed=3)
    return data.Dataset(train, valid, test, {str(k): k for k in range(1, n_items + 1)}), groups


MODE_CFG = tr.TrainConfig(epochs=12, seed=0, patience=3, model=ModelConfig(dim=32, dropout=0.0))


@criterion(6, "mode separation: mean P(repeat) > 0.5 on repeat group, < 0.5 on explore group, < 5 min")
def test_mode_separation():
    t0 = time.perf_counter()
    ds, groups = mode_dataset()
    model, _ = tr.train(ds, MODE_CFG)
    p_rep = np.concatenate([
        model.forward([p for p, _ in ds.test[s : s + 500]]).p_repeat for s in range(0, len(ds.test), 500)
    ])
    groups = np.array(groups)
    assert p_rep[groups == "repeat"].mean() > 0.5
    assert p_rep[groups == "explore"].mean() < 0.5
    assert time.perf_counter() - t0 < 300


@criterion(7, "metric oracle on 1000 random score vectors, N in {1,3,5,10,20}")
def test_metric_oracle():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        size = int(rng.integers(1, 80))
        s = rng.integers(0, 6, size=size).astype(float) if rng.random() < 0.5 else rng.normal(size=size)
        t = int(rng.integers(size))
        for n in metrics.DEFAULT_NS:
            rank, p, mrr, ndcg = rank_metrics(s.tolist(), t, n)
            assert metrics.rank_of(s, t) == rank
            assert metrics.precision_at(s, t, n) == p
            assert metrics.mrr_at(s, t, n) == mrr
            assert metrics.ndcg_at(s, t, n) == ndcg


@criterion(8, "graph oracle on 200 sessions x eta in {0, 0.3, 0.6, 0.9} with monotonicity")
def test_graph_oracle():
    rng = np.random.default_rng(8)
    etas = (0.0, 0.3, 0.6, 0.9)
    for _ in range(200):
        session = rng.integers(0, 12, size=rng.integers(1, 16)).tolist()
        nodes = list(dict.fromkeys(session))
        h = rng.normal(size=(len(nodes), 6))
        lookup = dict(zip(nodes, h.tolist()))
        prev = None
        for eta in etas:
            g = graph.build_graph(session, h, eta)
            n_in, n_out = graph_neighbors(session, lookup, eta)
            edges = set()
            for k, v in enumerate(nodes):
                got_in = {nodes[j] for j in g.in_neighbors[k]}
                got_out = {nodes[j] for j in g.out_neighbors[k]}
                assert got_in == n_in[v] and got_out == n_out[v]
                edges |= {("in", v, j) for j in got_in} | {("out", v, j) for j in got_out}
            if prev is not None:
                assert edges <= prev
            prev = edges


@criterion(9, "ablation harness: six variants end-to-end; full >= w/o GBP on mode-separable MRR@20")
def test_ablation():
    sessions = synth.synth_generate(2000, 100, 0.3, seed=0)
    ds = data.preprocess(sessions, holdout=data.DAY, seed=0)
    quick = replace(MODE_CFG, epochs=2, model=ModelConfig(dim=16))
    res = tr.run_ablation(ds, quick)
    assert list(res) == list(tr.VARIANTS)
    assert all(r.count == len(ds.test) for r in res.values())
    assert len(tr.ablation_csv(res).splitlines()) == 7

    mode_ds, _ = mode_dataset()
    res = tr.run_ablation(mode_ds, MODE_CFG)
    assert res["RNMSR"]["MRR@20"] >= res["w/o GBP"]["MRR@20"]


@criterion(10, "stats analyzer matches an independent count on the synthetic corpus")
def test_stats_counts():
    sessions = synth.synth_generate(3000, 150, 0.35, seed=10)
    pairs = [p for s in sessions for p in data.sequence_split(s.items)]
    stats = gbp.compute_stats(pairs)

    total, repeat = Counter(), Counter()
    per_key = defaultdict(Counter)
    for prefix, target in pairs:
        pat = independent_pattern(prefix)
        total[pat] += 1
        suffix = prefix[-6:]
        if target in suffix:
            repeat[pat] += 1
            per_key[pat][pat[suffix.index(target)]] += 1

    assert set(stats) == set(total)
    for pat, s in stats.items():
        assert s.total == total[pat]
        assert s.repeat == repeat[pat]
        assert s.explore == total[pat] - repeat[pat]
        assert dict(s.per_key) == dict(per_key[pat])
