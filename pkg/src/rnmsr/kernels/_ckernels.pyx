# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same signatures and results as ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef fused real_t:
    float
    double


def scatter_add_rows(real_t[:, ::1] out, cnp.int64_t[::1] idx, real_t[:, ::1] vals):
    cdef Py_ssize_t m = idx.shape[0], d = out.shape[1], i, j
    cdef cnp.int64_t r
    with nogil:
        for i in range(m):
            r = idx[i]
            for j in range(d):
                out[r, j] += vals[i, j]


def session_layout(items_in, lengths_in, int l_max, int l_pos):
    cdef cnp.int64_t[:, ::1] items = np.ascontiguousarray(items_in, dtype=np.int64)
    cdef cnp.int64_t[::1] lengths = np.ascontiguousarray(lengths_in, dtype=np.int64)
    cdef Py_ssize_t b = items.shape[0], t = items.shape[1]
    nodes_a = np.zeros((b, t), dtype=np.int64)
    n_nodes_a = np.zeros(b, dtype=np.int64)
    alias_a = np.zeros((b, t), dtype=np.int64)
    minp_a = np.zeros((b, t), dtype=np.int64)
    maxp_a = np.zeros((b, t), dtype=np.int64)
    rev_a = np.zeros((b, t), dtype=np.int64)
    win_a = np.zeros((b, t), dtype=np.uint8)
    gbp_a = np.zeros((b, l_max), dtype=np.int64)
    gbpl_a = np.zeros(b, dtype=np.int64)
    seq_in_a = np.zeros((b, t, t), dtype=np.uint8)
    seq_out_a = np.zeros((b, t, t), dtype=np.uint8)
    cdef cnp.int64_t[:, ::1] nodes = nodes_a, alias = alias_a, minp = minp_a, maxp = maxp_a
    cdef cnp.int64_t[:, ::1] rev = rev_a, gbp = gbp_a
    cdef cnp.int64_t[::1] n_nodes = n_nodes_a, gbpl = gbpl_a
    cdef cnp.uint8_t[:, ::1] win = win_a
    cdef cnp.uint8_t[:, :, ::1] seq_in = seq_in_a, seq_out = seq_out_a
    cdef Py_ssize_t s, pos, k, q, n, start, u = 0, nk
    cdef cnp.int64_t item, prev
    cdef cnp.int64_t[::1] local = np.zeros(max(l_max, 1), dtype=np.int64)

    for s in range(b):
        n = lengths[s]
        nk = 0
        for pos in range(n):
            item = items[s, pos]
            k = -1
            for q in range(nk):
                if nodes[s, q] == item:
                    k = q
                    break
            if k < 0:
                k = nk
                nk += 1
                nodes[s, k] = item
                minp[s, k] = pos
            maxp[s, k] = pos
            alias[s, pos] = k
            rev[s, pos] = n - 1 - pos if n - 1 - pos < l_pos - 1 else l_pos - 1
            if pos >= n - l_max:
                win[s, pos] = 1
            if pos > 0:
                prev = alias[s, pos - 1]
                if prev != k:
                    seq_in[s, k, prev] = 1
                    seq_out[s, prev, k] = 1
        n_nodes[s] = nk
        if nk > u:
            u = nk

        start = n - l_max if n > l_max else 0
        nk = 0
        for pos in range(start, n):
            item = items[s, pos]
            k = -1
            for q in range(nk):
                if local[q] == item:
                    k = q
                    break
            if k < 0:
                k = nk
                local[nk] = item
                nk += 1
            gbp[s, pos - start] = k + 1
        gbpl[s] = n - start

    in_a = np.zeros((b, u, u), dtype=np.uint8)
    out_a = np.zeros((b, u, u), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] in_c = in_a, out_c = out_a
    cdef Py_ssize_t i, j
    for s in range(b):
        for i in range(n_nodes[s]):
            for j in range(n_nodes[s]):
                if i == j:
                    continue
                if minp[s, j] < maxp[s, i]:
                    in_c[s, i, j] = 1
                if maxp[s, j] > minp[s, i]:
                    out_c[s, i, j] = 1

    return {
        "nodes": nodes_a[:, :u],
        "n_nodes": n_nodes_a,
        "alias": alias_a,
        "in_cand": in_a,
        "out_cand": out_a,
        "seq_in": np.ascontiguousarray(seq_in_a[:, :u, :u]),
        "seq_out": np.ascontiguousarray(seq_out_a[:, :u, :u]),
        "rev_pos": rev_a,
        "window": win_a,
        "gbp": gbp_a,
        "gbp_len": gbpl_a,
    }


def target_ranks(scores_in, targets_in):
    cdef double[:, ::1] scores = np.ascontiguousarray(scores_in, dtype=np.float64)
    cdef cnp.int64_t[::1] targets = np.ascontiguousarray(targets_in, dtype=np.int64)
    cdef Py_ssize_t b = scores.shape[0], v = scores.shape[1], r, j
    ranks_a = np.ones(b, dtype=np.int64)
    cdef cnp.int64_t[::1] ranks = ranks_a
    cdef double st
    cdef cnp.int64_t tg, cnt
    with nogil:
        for r in range(b):
            tg = targets[r]
            st = scores[r, tg]
            cnt = 1
            for j in range(v):
                if scores[r, j] > st or (scores[r, j] == st and j < tg):
                    cnt += 1
            ranks[r] = cnt
    return ranks_a
