"""Non-neural sanity baselines."""
from __future__ import annotations

import numpy as np
from scipy import sparse


class Pop:
    """Scores every item by how often it is a target in the training pairs."""

    def __init__(self, n_items: int):
        self.n_items = n_items
        self.counts = np.zeros(n_items + 1)

    def fit(self, pairs):
        targets = np.fromiter((t for _, t in pairs), dtype=np.int64)
        self.counts = np.bincount(targets, minlength=self.n_items + 1).astype(np.float64)
        self.counts[0] = 0.0
        return self

    def __call__(self, prefixes):
        return np.tile(self.counts, (len(prefixes), 1))


class ItemKNN:
    """Cosine similarity of item columns in a binary sequence-item incidence matrix.

    Each training pair contributes the row ``prefix + [target]``.  A prefix
    is scored by the similarity of every item to its last item, keeping the
    ``k`` nearest neighbours.
    """

    def __init__(self, n_items: int, k: int = 100):
        self.n_items = n_items
        self.k = k
        self.sim = None

    def fit(self, pairs):
        rows, cols = [], []
        for r, (prefix, target) in enumerate(pairs):
            items = set(prefix) | {target}
            rows.extend([r] * len(items))
            cols.extend(items)
        x = sparse.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(pairs), self.n_items + 1)
        )
        co = (x.T @ x).tocsr().astype(np.float64)
        norms = np.sqrt(co.diagonal())
        inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        sim = sparse.diags(inv) @ co @ sparse.diags(inv)
        sim = sim.tolil()
        sim.setdiag(0.0)
        self.sim = sim.tocsr()
        self.sim.eliminate_zeros()
        return self

    def __call__(self, prefixes):
        last = np.array([p[-1] for p in prefixes], dtype=np.int64)
        scores = self.sim[last].toarray()
        if self.k and self.k < scores.shape[1]:
            kth = -np.partition(-scores, self.k - 1, axis=1)[:, self.k - 1 : self.k]
            scores = np.where(scores >= kth, scores, 0.0)
        scores[:, 0] = 0.0
        return scores
