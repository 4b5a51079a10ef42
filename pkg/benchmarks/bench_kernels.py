"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--batch 100] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from rnmsr.kernels import _pykernels

try:
    from rnmsr.kernels import _ckernels
except ImportError:
    _ckernels = None


def make_inputs(batch, n_items, max_len, dim, seed):
    rng = np.random.default_rng(seed)
    lengths = rng.integers(1, max_len + 1, size=batch)
    items = np.zeros((batch, max_len), dtype=np.int64)
    for b, n in enumerate(lengths):
        items[b, :n] = rng.integers(1, n_items + 1, size=n)
    scores = rng.normal(size=(batch, n_items))
    targets = rng.integers(0, n_items, size=batch)
    idx = rng.integers(0, n_items, size=batch * max_len)
    vals = rng.normal(size=(idx.size, dim))
    return items, lengths, scores, targets, idx, vals


def bench(mod, inputs, n_items, dim, repeat):
    items, lengths, scores, targets, idx, vals = inputs
    out = np.zeros((n_items, dim))
    cases = {
        "session_layout": lambda: mod.session_layout(items, lengths, 6, 50),
        "target_ranks": lambda: mod.target_ranks(scores, targets),
        "scatter_add_rows": lambda: mod.scatter_add_rows(out, idx, vals),
    }
    return {k: min(timeit.repeat(f, number=1, repeat=repeat)) for k, f in cases.items()}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--batch", type=int, default=100)
    ap.add_argument("--n-items", type=int, default=5000)
    ap.add_argument("--max-len", type=int, default=20)
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    inputs = make_inputs(args.batch, args.n_items, args.max_len, args.dim, args.seed)
    py = bench(_pykernels, inputs, args.n_items, args.dim, args.repeat)
    cy = bench(_ckernels, inputs, args.n_items, args.dim, args.repeat) if _ckernels else None
    print(f"{'kernel':<18} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for k, t in py.items():
        if cy:
            print(f"{k:<18} {t * 1e3:>10.3f} {cy[k] * 1e3:>10.3f} {t / cy[k]:>7.1f}x")
        else:
            print(f"{k:<18} {t * 1e3:>10.3f} {'n/a':>10} {'':>8}")


if __name__ == "__main__":
    main()
