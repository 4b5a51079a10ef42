"""Synthetic click logs for desk-scale checks."""
from __future__ import annotations

from collections import Counter

import numpy as np

from .data import DAY, Pair, Session


class GenerationError(ValueError):
    pass


def synth_generate(
    n_sessions: int,
    n_items: int,
    repeat_rate: float,
    min_len: int = 2,
    max_len: int = 8,
    seed: int = 0,
    days: int = 10,
) -> list[Session]:
    """Sessions where each next click re-clicks a uniformly chosen earlier item
    with probability ``repeat_rate`` and otherwise a uniform new item.

    Lengths are uniform on ``[min_len, max_len]``. Sessions are spread over
    ``days`` days and returned ordered by their last timestamp.
    """
    if not 0.0 <= repeat_rate <= 1.0:
        raise GenerationError("repeat_rate must be in [0, 1]")
    if not 1 <= min_len <= max_len:
        raise GenerationError("need 1 <= min_len <= max_len")
    if repeat_rate == 0.0 and n_items < max_len:
        raise GenerationError("not enough items for all-distinct sessions")
    rng = np.random.default_rng(seed)
    span = days * DAY
    out = []
    for sid in range(n_sessions):
        n = int(rng.integers(min_len, max_len + 1))
        items = [int(rng.integers(1, n_items + 1))]
        seen = {items[0]}
        for _ in range(n - 1):
            if rng.random() < repeat_rate or len(seen) >= n_items:
                items.append(items[int(rng.integers(0, len(items)))])
            else:
                while True:
                    cand = int(rng.integers(1, n_items + 1))
                    if cand not in seen:
                        break
                seen.add(cand)
                items.append(cand)
        start = int(rng.integers(0, span - 3600))
        gaps = rng.integers(1, 300, size=n)
        ts = (start + np.cumsum(gaps)).tolist()
        out.append(Session(f"s{sid}", [f"i{i}" for i in items], ts))
    out.sort(key=lambda s: s.last_ts)
    return out


def repeat_fraction(sessions: list[Session]) -> float:
    """Share of non-first clicks that re-click an item already in the session."""
    rep = steps = 0
    for s in sessions:
        for k in range(1, len(s.items)):
            steps += 1
            rep += s.items[k] in s.items[:k]
    return rep / steps if steps else 0.0


def _random_rgs(rng, length: int, max_key: int) -> list[int]:
    while True:
        keys = [1]
        for _ in range(length - 1):
            keys.append(int(rng.integers(1, min(max(keys) + 1, max_key) + 1)))
        if max(keys) < length:
            return keys


def synth_mode_separable(
    n_pairs: int, n_items: int, seed: int = 0, min_len: int = 3, max_len: int = 6
) -> tuple[list[Pair], list[str]]:
    """Pairs split evenly between two behaviours, with dense item indices.

    ``repeat`` pairs: the prefix repeats items (at most ``len - 1`` distinct)
    and the target is its most frequent item, ties to the earliest.
    ``explore`` pairs: the prefix is all-distinct and the target is a new
    item, the successor ``last % n_items + 1`` when that is unused.
    """
    if n_items < max_len + 2:
        raise GenerationError("n_items too small")
    rng = np.random.default_rng(seed)
    pairs, groups = [], []
    for k in range(n_pairs):
        n = int(rng.integers(min_len, max_len + 1))
        if k % 2 == 0:
            keys = _random_rgs(rng, n, max_key=max(2, n - 2))
            distinct = rng.choice(np.arange(1, n_items + 1), size=max(keys), replace=False).tolist()
            prefix = [distinct[key - 1] for key in keys]
            counts = Counter(keys)
            best = min(counts, key=lambda key: (-counts[key], key))
            pairs.append((prefix, distinct[best - 1]))
            groups.append("repeat")
        else:
            prefix = rng.choice(np.arange(1, n_items + 1), size=n, replace=False).tolist()
            target = prefix[-1] % n_items + 1
            while target in prefix:
                target = target % n_items + 1
            pairs.append((prefix, target))
            groups.append("explore")
    return pairs, groups
