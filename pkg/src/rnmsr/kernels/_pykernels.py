"""Pure-Python/numpy kernels. Reference semantics for ``_ckernels``."""
import numpy as np


def scatter_add_rows(out, idx, vals):
    np.add.at(out, idx, vals)


def session_layout(items, lengths, l_max, l_pos):
    items = np.asarray(items, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    b, t = items.shape
    nodes = np.zeros((b, t), dtype=np.int64)
    n_nodes = np.zeros(b, dtype=np.int64)
    alias = np.zeros((b, t), dtype=np.int64)
    min_pos = np.zeros((b, t), dtype=np.int64)
    max_pos = np.zeros((b, t), dtype=np.int64)
    seq_in = np.zeros((b, t, t), dtype=np.uint8)
    seq_out = np.zeros((b, t, t), dtype=np.uint8)
    rev_pos = np.zeros((b, t), dtype=np.int64)
    window = np.zeros((b, t), dtype=np.uint8)
    gbp = np.zeros((b, l_max), dtype=np.int64)
    gbp_len = np.zeros(b, dtype=np.int64)

    for s in range(b):
        n = int(lengths[s])
        seen = {}
        for pos in range(n):
            item = int(items[s, pos])
            k = seen.get(item)
            if k is None:
                k = len(seen)
                seen[item] = k
                nodes[s, k] = item
                min_pos[s, k] = pos
            max_pos[s, k] = pos
            alias[s, pos] = k
            rev_pos[s, pos] = min(n - 1 - pos, l_pos - 1)
            if pos >= n - l_max:
                window[s, pos] = 1
            if pos > 0:
                prev = alias[s, pos - 1]
                if prev != k:
                    seq_in[s, k, prev] = 1
                    seq_out[s, prev, k] = 1
        n_nodes[s] = len(seen)

        start = max(0, n - l_max)
        keys = {}
        for j, pos in enumerate(range(start, n)):
            item = int(items[s, pos])
            if item not in keys:
                keys[item] = len(keys) + 1
            gbp[s, j] = keys[item]
        gbp_len[s] = n - start

    u = int(n_nodes.max()) if b else 0
    valid = np.arange(t)[None, :] < n_nodes[:, None]
    pair = valid[:, :, None] & valid[:, None, :] & ~np.eye(t, dtype=bool)[None]
    in_cand = pair & (min_pos[:, None, :] < max_pos[:, :, None])
    out_cand = pair & (max_pos[:, None, :] > min_pos[:, :, None])
    return {
        "nodes": nodes[:, :u],
        "n_nodes": n_nodes,
        "alias": alias,
        "in_cand": in_cand[:, :u, :u].astype(np.uint8),
        "out_cand": out_cand[:, :u, :u].astype(np.uint8),
        "seq_in": seq_in[:, :u, :u],
        "seq_out": seq_out[:, :u, :u],
        "rev_pos": rev_pos,
        "window": window,
        "gbp": gbp,
        "gbp_len": gbp_len,
    }


def target_ranks(scores, targets):
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    rows = np.arange(scores.shape[0])
    s_t = scores[rows, targets][:, None]
    before = np.arange(scores.shape[1])[None, :] < targets[:, None]
    return 1 + (scores > s_t).sum(axis=1) + ((scores == s_t) & before).sum(axis=1)
