"""Similarity-gated item-pairwise session graphs and the mean-pooling encoder.

Node j is an in-link neighbour of node i when j's embedding has cosine
similarity >= eta with i's and j occurs before i (earliest occurrence of j
before the latest occurrence of i).  Out-links mirror this with "after"
(latest occurrence of j after the earliest occurrence of i).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from . import kernels


@dataclass
class EncoderConfig:
    eta: float = 0.0
    iters: int = 1
    dim: int = 100
    seq_graph: bool = False
    no_iirl: bool = False
    sim_source: str = "current"  # or "input": fix the graph from the input embeddings

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.sim_source not in ("current", "input"):
            raise ValueError("sim_source must be 'current' or 'input'")


@dataclass
class SessionGraph:
    nodes: list
    in_neighbors: list[frozenset]
    out_neighbors: list[frozenset]
    positions: dict[int, list[int]] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_nodes
        a_in = np.zeros((n, n), dtype=bool)
        a_out = np.zeros((n, n), dtype=bool)
        for i in range(n):
            a_in[i, list(self.in_neighbors[i])] = True
            a_out[i, list(self.out_neighbors[i])] = True
        return a_in, a_out

    @classmethod
    def from_adjacency(cls, nodes, a_in, a_out, alias):
        n = len(nodes)
        positions: dict[int, list[int]] = {k: [] for k in range(n)}
        for pos, k in enumerate(alias):
            positions[int(k)].append(pos)
        return cls(
            list(nodes),
            [frozenset(np.flatnonzero(a_in[i]).tolist()) for i in range(n)],
            [frozenset(np.flatnonzero(a_out[i]).tolist()) for i in range(n)],
            positions,
        )


def cosine_matrix(h: np.ndarray) -> np.ndarray:
    """Pairwise cosine over the last axis; zero-norm rows score 0 against all."""
    norm = np.linalg.norm(h, axis=-1, keepdims=True)
    unit = np.divide(h, norm, out=np.zeros_like(h), where=norm > 0)
    return unit @ np.swapaxes(unit, -1, -2)


def similarity_adjacency(h, in_cand, out_cand, eta):
    """Gate precedence candidates by cosine >= eta. Works batched or single."""
    close = cosine_matrix(np.asarray(h, dtype=np.float64)) >= eta
    return in_cand.astype(bool) & close, out_cand.astype(bool) & close


def _single_layout(session):
    items = np.asarray([list(session)], dtype=np.int64)
    return kernels.session_layout(items, [len(session)], 1, 1)


def build_graph(session, h, eta: float) -> SessionGraph:
    """Similarity graph over the distinct items of ``session``.

    ``h`` holds one embedding per distinct item, in order of first appearance.
    Items must be integer indices.
    """
    lay = _single_layout(session)
    h = np.asarray(h)
    if h.shape[0] != lay["n_nodes"][0]:
        raise ValueError("need one embedding per distinct item")
    a_in, a_out = similarity_adjacency(h, lay["in_cand"][0], lay["out_cand"][0], eta)
    return SessionGraph.from_adjacency(lay["nodes"][0].tolist(), a_in, a_out, lay["alias"][0, : len(session)])


def build_sequential_graph(session) -> SessionGraph:
    """Graph over consecutive transitions only (no similarity gate)."""
    lay = _single_layout(session)
    return SessionGraph.from_adjacency(
        lay["nodes"][0].tolist(), lay["seq_in"][0].astype(bool), lay["seq_out"][0].astype(bool), lay["alias"][0, : len(session)]
    )


def aggregate(h, adjacency):
    """Mean of neighbour embeddings per node; an empty neighbourhood gives 0."""
    return dc.set_mean(dc.as_tensor(h), adjacency)


def encode_step(h, a_in, a_out, params):
    """One round: transform self + in/out summaries, add the overall mean and a residual.

    ``h`` is (..., U, d); ``a_in``/``a_out`` are matching (..., U, U) masks.
    """
    h = dc.as_tensor(h)
    h_in = aggregate(h, a_in)
    h_out = aggregate(h, a_out)
    o = dc.tanh(
        dc.add(dc.linear(h, params["W_s"]), dc.linear(dc.concat([h_in, h_out], axis=-1), params["W_N"], params["b_N"]))
    )
    eye = np.eye(h.shape[-2], dtype=bool)
    h_all = aggregate(h, a_in | a_out | eye)
    return dc.add(dc.add(o, h_all), h)


def encode_nodes(h0, layout, node_mask, params, config: EncoderConfig):
    """Run ``config.iters`` rounds over a padded batch of node embeddings."""
    if config.no_iirl:
        return h0
    pair_mask = node_mask[:, :, None] & node_mask[:, None, :]
    if config.seq_graph:
        a_in = layout["seq_in"].astype(bool) & pair_mask
        a_out = layout["seq_out"].astype(bool) & pair_mask
    h = h0
    for _ in range(config.iters):
        if not config.seq_graph:
            src = h0 if config.sim_source == "input" else h
            a_in, a_out = similarity_adjacency(src.data, layout["in_cand"], layout["out_cand"], config.eta)
            a_in &= pair_mask
            a_out &= pair_mask
        h = encode_step(h, a_in, a_out, params)
    return h


def encode(session, item_table, params, config: EncoderConfig):
    """Per-position representations of one session (a (n, d) Tensor).

    Repeated items share a node, so their positions get identical rows.
    """
    lay = _single_layout(session)
    nodes = lay["nodes"]
    h0 = dc.embedding(item_table, nodes)
    node_mask = np.ones(nodes.shape, dtype=bool)
    h = encode_nodes(h0, lay, node_mask, params, config)
    out = dc.gather_rows(h, lay["alias"][:, : len(session)])
    return dc.reshape(out, out.shape[1:])
