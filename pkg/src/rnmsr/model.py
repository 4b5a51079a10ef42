"""Repeat/explore prediction head conditioned on group-level behavior patterns.

For a prefix the model produces two mode weights (repeat, explore), a
distribution over the items in the last ``l_max`` positions (repeat mode)
and one over every other item (explore mode), mixed into one distribution
over the vocabulary.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import diffcore as dc
from . import gbp as gbp_mod
from . import kernels
from .diffcore import checkpoint
from .graph import EncoderConfig, encode_nodes

LOG_EPS = 1e-12
REPEAT, EXPLORE = 0, 1


@dataclass
class ModelConfig:
    dim: int = 100
    l_max: int = 6
    l_pos: int = 50
    mlp_depth: int = 2
    mlp_act: str = "relu"
    dropout: float = 0.25
    init_std: float = 0.1
    eta: float = 0.0
    gnn_iters: int = 1
    sim_source: str = "current"
    no_iirl: bool = False
    seq_graph: bool = False
    no_gbp_r: bool = False
    no_gbp_d: bool = False
    no_gbp: bool = False
    repeat_dedup: bool = False  # repeat softmax over distinct items (latest occurrence) instead of positions
    dtype: str = "float32"

    def __post_init__(self):
        if not 1 <= self.l_max <= 8:
            raise ValueError("l_max must be in 1..8")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.l_pos < self.l_max:
            raise ValueError("l_pos must be >= l_max")
        if self.mlp_act not in _ACTS:
            raise ValueError(f"mlp_act must be one of {sorted(_ACTS)}")
        if self.mlp_depth < 1:
            raise ValueError("mlp_depth must be >= 1")

    @property
    def encoder(self) -> EncoderConfig:
        return EncoderConfig(self.eta, self.gnn_iters, self.dim, self.seq_graph, self.no_iirl, self.sim_source)

    @property
    def use_gbp_r(self) -> bool:
        return not (self.no_gbp or self.no_gbp_r)

    @property
    def use_gbp_d(self) -> bool:
        return not (self.no_gbp or self.no_gbp_d)


_ACTS = {"relu": dc.relu, "tanh": dc.tanh, "sigmoid": dc.sigmoid}


@dataclass
class Batch:
    """Padded integer layout of a batch of prefixes."""

    items: np.ndarray
    lengths: np.ndarray
    mask: np.ndarray
    layout: dict
    node_mask: np.ndarray
    pattern_idx: np.ndarray
    explore_mask: np.ndarray
    targets: np.ndarray | None = None
    last_seen: np.ndarray | None = None  # position is its item's latest occurrence

    @property
    def size(self) -> int:
        return self.items.shape[0]

    @classmethod
    def build(cls, prefixes, n_items, vocab: gbp_mod.PatternVocab, l_max, l_pos, targets=None):
        b = len(prefixes)
        if b == 0:
            raise ValueError("empty batch")
        lengths = np.fromiter((len(p) for p in prefixes), dtype=np.int64, count=b)
        if lengths.min() < 1:
            raise ValueError("prefixes must be non-empty")
        t = int(lengths.max())
        items = np.zeros((b, t), dtype=np.int64)
        for k, p in enumerate(prefixes):
            items[k, : len(p)] = p
        if items.min() < 0 or items.max() > n_items or (items[lengths[:, None] > np.arange(t)] == 0).any():
            raise ValueError("prefix holds an item outside the vocabulary")
        lay = kernels.session_layout(items, lengths, l_max, l_pos)
        mask = np.arange(t)[None, :] < lengths[:, None]
        node_mask = np.arange(lay["nodes"].shape[1])[None, :] < lay["n_nodes"][:, None]
        pattern_idx = np.array(
            [vocab.index(tuple(lay["gbp"][k, : lay["gbp_len"][k]].tolist())) for k in range(b)], dtype=np.int64
        )
        explore_mask = np.ones((b, n_items + 1), dtype=bool)
        explore_mask[:, 0] = False
        rows, cols = np.nonzero(lay["window"])
        explore_mask[rows, items[rows, cols]] = False
        rows, cols = np.nonzero(mask)
        alias = lay["alias"][rows, cols]
        latest = np.full((b, t), -1, dtype=np.int64)
        np.maximum.at(latest, (rows, alias), cols)
        last_seen = np.zeros((b, t), dtype=bool)
        last_seen[rows, cols] = latest[rows, alias] == cols
        tg = None if targets is None else np.asarray(targets, dtype=np.int64)
        return cls(items, lengths, mask, lay, node_mask, pattern_idx, explore_mask, tg, last_seen)


@dataclass
class ForwardTrace:
    h_prime: dc.Tensor
    u: dc.Tensor
    beta: dc.Tensor
    s_d: dc.Tensor
    mode: dc.Tensor
    repeat_pos: dc.Tensor
    repeat_items: dc.Tensor
    alpha: dc.Tensor
    s_e: dc.Tensor
    explore: dc.Tensor
    probs: dc.Tensor
    batch: Batch = field(repr=False)

    @property
    def p_repeat(self) -> np.ndarray:
        return self.mode.data[:, REPEAT]

    @property
    def p_explore(self) -> np.ndarray:
        return self.mode.data[:, EXPLORE]


def _shapes(n_items: int, n_patterns: int, cfg: ModelConfig) -> dict[str, tuple]:
    d = cfg.dim
    shapes = {
        "item_emb": (n_items + 1, d),
        "pattern_emb": (n_patterns, d),
        "pos_emb": (cfg.l_pos, d),
        "W_s": (d, d),
        "W_N": (d, 2 * d),
        "b_N": (d,),
        "q_d": (d,),
        "W_d": (d, d),
        "b_d": (d,),
    }
    for layer in range(cfg.mlp_depth):
        shapes[f"mlp_W{layer}"] = (d, 2 * d) if layer == 0 else (d, d)
        shapes[f"mlp_b{layer}"] = (d,)
    shapes.update(
        {
            "W_p": (2, d),
            "W_m": (d, 2 * d),
            "b_m": (d,),
            "W_r": (d, d),
            "U_r": (d, d),
            "q_r": (d,),
            "b_r": (d,),
            "W_e": (d, d),
            "U_e": (d, d),
            "q_e": (d,),
            "b_e": (d,),
            "W_t": (d, d),
            "b_t": (d,),
        }
    )
    return shapes


class RNMSR:
    def __init__(self, n_items: int, config: ModelConfig | None = None, seed: int = 0, params=None):
        self.config = cfg = config or ModelConfig()
        self.n_items = n_items
        self.vocab = gbp_mod.PatternVocab.full(cfg.l_max)
        self.dtype = np.dtype(cfg.dtype)
        self.rng = np.random.default_rng(seed)
        shapes = _shapes(n_items, len(self.vocab), cfg)
        if params is None:
            init_rng = np.random.default_rng(seed)
            params = {
                name: dc.init_gaussian(shape, std=cfg.init_std, rng=init_rng, dtype=self.dtype, name=name)
                for name, shape in shapes.items()
            }
        else:
            for name, shape in shapes.items():
                if name not in params or tuple(params[name].shape) != shape:
                    raise ValueError(f"parameter {name!r} missing or not shaped {shape}")
            for p in params.values():
                p.data = p.data.astype(self.dtype)
                p.grad = np.zeros_like(p.data)
                p.m = p.m.astype(self.dtype)
                p.v = p.v.astype(self.dtype)
        self.params: dict[str, dc.Param] = params

    # ------------------------------------------------------------ pieces

    def batch(self, prefixes, targets=None) -> Batch:
        return Batch.build(prefixes, self.n_items, self.vocab, self.config.l_max, self.config.l_pos, targets)

    def embed_pattern(self, pattern_idx):
        """Pattern embedding rows; unknown patterns map to the UNK row."""
        return dc.embedding(self.params["pattern_emb"], pattern_idx)

    def _zeros(self, shape):
        return dc.Tensor(np.zeros(shape, dtype=self.dtype))

    def _attend(self, h, extra, W, U, q, b, mask):
        """Masked softmax over positions of ``q . tanh(W h + U extra + b)``."""
        z = dc.linear(h, W)
        if extra is not None:
            z = dc.add(z, dc.linear(extra, U))
        scores = dc.inner(dc.tanh(dc.add(z, b)), q)
        return dc.softmax(scores, axis=-1, mask=mask), scores

    def discriminate(self, h_prime, u, mask, zero_session=False):
        """Mode weights [P(repeat), P(explore)] from the pattern and an attentive session summary."""
        P = self.params
        beta, _ = self._attend(h_prime, None, P["W_d"], None, P["q_d"], P["b_d"], mask)
        s_d = dc.sum_(dc.mul(dc.expand(beta, -1), h_prime), axis=1)
        if zero_session:
            s_d = self._zeros(s_d.shape)
        if not self.config.use_gbp_d:
            u = self._zeros(u.shape)
        z = dc.concat([u, s_d], axis=-1)
        act = _ACTS[self.config.mlp_act]
        for layer in range(self.config.mlp_depth):
            z = act(dc.linear(z, P[f"mlp_W{layer}"], P[f"mlp_b{layer}"]))
        # two-way softmax written as (p, 1 - p) so the weights sum to exactly 1
        p_r = dc.index(dc.softmax(dc.linear(z, P["W_p"]), axis=-1), (slice(None), slice(REPEAT, REPEAT + 1)))
        mode = dc.concat([p_r, dc.sub(1.0, p_r)], axis=-1)
        return mode, beta, s_d

    def repeat_scores(self, h_prime, u, batch: Batch, zero_items=False):
        """Distribution over the last ``l_max`` positions and, summed, over items."""
        P = self.params
        pos = dc.embedding(P["pos_emb"], batch.layout["rev_pos"])
        b, t, d = pos.shape
        u_r = u if self.config.use_gbp_r else self._zeros(u.shape)
        u_b = dc.broadcast_to(dc.expand(u_r, 1), (b, t, d))
        m = dc.tanh(dc.linear(dc.concat([pos, u_b], axis=-1), P["W_m"], P["b_m"]))
        h = self._zeros(h_prime.shape) if zero_items else h_prime
        window = batch.layout["window"].astype(bool) & batch.mask
        if self.config.repeat_dedup:
            window &= batch.last_seen
        rep_pos, _ = self._attend(h, m, P["W_r"], P["U_r"], P["q_r"], P["b_r"], window)
        rep_items = dc.scatter_add(rep_pos, batch.items, self.n_items + 1)
        return rep_pos, rep_items

    def explore_scores(self, h_prime, batch: Batch):
        """Distribution over items outside the repeat window."""
        P = self.params
        pos = dc.embedding(P["pos_emb"], batch.layout["rev_pos"])
        alpha, _ = self._attend(h_prime, pos, P["W_e"], P["U_e"], P["q_e"], P["b_e"], batch.mask)
        s_e = dc.sum_(dc.mul(dc.expand(alpha, -1), h_prime), axis=1)
        s_e2 = dc.add(dc.tanh(dc.linear(s_e, P["W_t"], P["b_t"])), s_e)
        scores = dc.matmul(s_e2, dc.transpose(P["item_emb"]))
        return dc.softmax(scores, axis=-1, mask=batch.explore_mask), alpha, s_e2

    @staticmethod
    def combine(mode, rep_items, explore):
        """P(v) = P(repeat) P_rep(v) + P(explore) P_exp(v); supports are disjoint."""
        p_r = dc.index(mode, (slice(None), slice(REPEAT, REPEAT + 1)))
        p_e = dc.index(mode, (slice(None), slice(EXPLORE, EXPLORE + 1)))
        return dc.add(dc.mul(p_r, rep_items), dc.mul(p_e, explore))

    # ------------------------------------------------------------ forward

    def encode(self, batch: Batch, train: bool = False):
        P = self.params
        h0 = dc.embedding(P["item_emb"], batch.layout["nodes"])
        h0 = dc.dropout(h0, self.config.dropout, train, self.rng)
        h = encode_nodes(h0, batch.layout, batch.node_mask, P, self.config.encoder)
        return dc.gather_rows(h, batch.layout["alias"])

    def forward(self, batch, train: bool = False, viz_zero: bool = False) -> ForwardTrace:
        if not isinstance(batch, Batch):
            batch = self.batch(batch)
        h_prime = self.encode(batch, train)
        u = self.embed_pattern(batch.pattern_idx)
        mode, beta, s_d = self.discriminate(h_prime, u, batch.mask, zero_session=viz_zero)
        rep_pos, rep_items = self.repeat_scores(h_prime, u, batch, zero_items=viz_zero)
        explore, alpha, s_e = self.explore_scores(h_prime, batch)
        probs = self.combine(mode, rep_items, explore)
        return ForwardTrace(h_prime, u, beta, s_d, mode, rep_pos, rep_items, alpha, s_e, explore, probs, batch)

    def loss(self, trace: ForwardTrace, targets=None):
        """Mean negative log-likelihood of the targets."""
        targets = trace.batch.targets if targets is None else np.asarray(targets, dtype=np.int64)
        if targets is None:
            raise ValueError("no targets")
        p = dc.pick(trace.probs, targets)
        return dc.mul(dc.mean(dc.log(p, eps=LOG_EPS)), -1.0)

    def predict(self, prefixes) -> np.ndarray:
        """(B, n_items + 1) probabilities; column 0 is padding and always 0."""
        return self.forward(self.batch(prefixes)).probs.data

    def recommend(self, prefix, topk: int = 20) -> list[tuple[int, float]]:
        probs = self.predict([prefix])[0, 1:]
        order = np.lexsort((np.arange(len(probs)), -probs))[:topk]
        return [(int(i) + 1, float(probs[i])) for i in order]

    # ------------------------------------------------------------ persistence

    def save(self, path, extra_meta: dict | None = None) -> None:
        meta = {"n_items": self.n_items, "config": asdict(self.config)}
        meta.update(extra_meta or {})
        checkpoint.save(path, self.params, meta)

    @classmethod
    def load(cls, path, dtype: str | None = None) -> tuple["RNMSR", dict]:
        params, meta = checkpoint.load(path)
        cfg = ModelConfig(**meta["config"])
        if dtype:
            cfg.dtype = dtype
        return cls(meta["n_items"], cfg, params=params), meta

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in snap.items():
            self.params[k].data = v.copy()


def dump_attention(model: RNMSR, prefix, raw_ids=None, viz_zero: bool = False) -> str:
    """Per-position attention weights and the two mode weights for one prefix."""
    tr = model.forward(model.batch([prefix]), viz_zero=viz_zero)
    pattern = gbp_mod.extract_gbp(prefix, model.config.l_max)
    offset = len(prefix) - len(pattern)
    name = (lambda i: raw_ids[i]) if raw_ids is not None else str
    lines = [
        f"pattern: {gbp_mod.pattern_str(pattern)}",
        f"weight_repeat: {tr.p_repeat[0]:.4f}",
        f"weight_explore: {tr.p_explore[0]:.4f}",
        f"{'pos':>4} {'item':>10} {'key':>4} {'discriminate':>13} {'repeat':>8} {'explore':>8}",
    ]
    for pos, item in enumerate(prefix):
        key = gbp_mod.key_letter(pattern[pos - offset]) if pos >= offset else "-"
        lines.append(
            f"{pos + 1:>4} {name(item):>10} {key:>4} {tr.beta.data[0, pos]:>13.4f} "
            f"{tr.repeat_pos.data[0, pos]:>8.4f} {tr.alpha.data[0, pos]:>8.4f}"
        )
    return "\n".join(lines) + "\n"
