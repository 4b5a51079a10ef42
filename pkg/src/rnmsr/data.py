"""Interaction logs to (prefix, target) training pairs."""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MIN_ITEM_COUNT = 5
MIN_SESSION_LEN = 2
DAY = 86400


class DataError(ValueError):
    pass


class ParseError(DataError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Interaction:
    session_id: str
    item_id: str
    timestamp: int


@dataclass
class Session:
    session_id: str
    items: list
    timestamps: list = field(default_factory=list)

    def __len__(self):
        return len(self.items)

    @property
    def last_ts(self) -> int:
        return self.timestamps[-1] if self.timestamps else 0


Pair = tuple[list, int]


@dataclass
class Dataset:
    train: list[Pair]
    valid: list[Pair]
    test: list[Pair]
    item_vocab: dict[str, int]

    @property
    def n_items(self) -> int:
        return len(self.item_vocab)

    def raw_ids(self) -> list[str]:
        """Raw id per dense index; slot 0 is padding."""
        out = [""] * (self.n_items + 1)
        for raw, idx in self.item_vocab.items():
            out[idx] = raw
        return out


def parse_line(line: str, path="<input>", lineno=0) -> Interaction | None:
    line = line.rstrip("\r\n")
    if not line.strip() or line.startswith("#"):
        return None
    parts = line.split("\t")
    if len(parts) != 3:
        raise ParseError(path, lineno, f"expected 3 tab-separated fields, got {len(parts)}")
    sid, item, ts = (p.strip() for p in parts)
    if not sid:
        raise ParseError(path, lineno, "empty session_id")
    if not item:
        raise ParseError(path, lineno, "empty item_id")
    try:
        ts_val = int(ts)
    except ValueError:
        raise ParseError(path, lineno, f"bad timestamp {ts!r}") from None
    if ts_val < 0:
        raise ParseError(path, lineno, "negative timestamp")
    return Interaction(sid, item, ts_val)


def ingest(path) -> list[Session]:
    """Read a ``session<TAB>item<TAB>timestamp`` log into time-ordered sessions.

    Ties keep file order. Sessions come back ordered by their last timestamp.
    """
    grouped: dict[str, list[tuple[int, int, str]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            rec = parse_line(line, path, lineno)
            if rec is not None:
                grouped[rec.session_id].append((rec.timestamp, lineno, rec.item_id))
    if not grouped:
        raise DataError(f"{path}: no interactions")
    sessions = []
    for sid, events in grouped.items():
        events.sort()
        sessions.append(Session(sid, [e[2] for e in events], [e[0] for e in events]))
    sessions.sort(key=lambda s: s.last_ts)
    return sessions


def filter_sessions(sessions: list[Session], min_count: int = MIN_ITEM_COUNT, min_len: int = MIN_SESSION_LEN) -> list[Session]:
    """Drop rare items and short sessions until neither rule removes anything."""
    current = sessions
    while True:
        counts = Counter(i for s in current for i in s.items)
        changed = False
        nxt = []
        for s in current:
            keep = [k for k, i in enumerate(s.items) if counts[i] >= min_count]
            if len(keep) != len(s.items):
                changed = True
                s = Session(s.session_id, [s.items[k] for k in keep], [s.timestamps[k] for k in keep] if s.timestamps else [])
            if len(s.items) >= min_len:
                nxt.append(s)
            else:
                changed = True
        current = nxt
        if not changed:
            return current


def temporal_split(sessions: list[Session], holdout: float) -> tuple[list[Session], list[Session]]:
    """Sessions ending in the last ``holdout`` seconds become test.

    Test items unseen in train are removed; test sessions left shorter than
    two items are discarded.
    """
    if not sessions:
        return [], []
    if holdout <= 0:
        return list(sessions), []
    t_max = max(s.last_ts for s in sessions)
    t_min = min(min(s.timestamps) if s.timestamps else 0 for s in sessions)
    if holdout >= t_max - t_min:
        raise DataError("holdout covers the whole time span; train would be empty")
    cut = t_max - holdout
    train = [s for s in sessions if s.last_ts <= cut]
    test_raw = [s for s in sessions if s.last_ts > cut]
    if not train:
        raise DataError("empty train split")
    vocab = {i for s in train for i in s.items}
    test = []
    for s in test_raw:
        keep = [k for k, i in enumerate(s.items) if i in vocab]
        if len(keep) >= MIN_SESSION_LEN:
            test.append(Session(s.session_id, [s.items[k] for k in keep], [s.timestamps[k] for k in keep]))
    return train, test


def sequence_split(items: Sequence) -> list[Pair]:
    """``[v1..vn]`` -> ``([v1], v2), ([v1, v2], v3), ..., ([v1..v(n-1)], vn)``."""
    items = list(items.items if isinstance(items, Session) else items)
    if len(items) < 2:
        raise ValueError("sequence_split needs at least two items")
    return [(items[:k], items[k]) for k in range(1, len(items))]


def validation_split(pairs: list[Pair], fraction: float = 0.1, seed: int = 0) -> tuple[list[Pair], list[Pair]]:
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n_valid = int(math.floor(fraction * len(pairs) + 0.5))
    order = rng.permutation(len(pairs))
    valid_idx = set(order[:n_valid].tolist())
    train = [p for k, p in enumerate(pairs) if k not in valid_idx]
    valid = [p for k, p in enumerate(pairs) if k in valid_idx]
    return train, valid


def build_vocab(sessions: list[Session]) -> dict[str, int]:
    """Dense indices from 1 in order of first appearance; 0 is padding."""
    vocab: dict[str, int] = {}
    for s in sessions:
        for i in s.items:
            if i not in vocab:
                vocab[i] = len(vocab) + 1
    return vocab


def preprocess(
    sessions: list[Session],
    holdout: float = DAY,
    valid_fraction: float = 0.1,
    seed: int = 0,
    min_count: int = MIN_ITEM_COUNT,
) -> Dataset:
    """Filter, split by time, index items, expand into pairs, carve validation."""
    kept = filter_sessions(sessions, min_count=min_count)
    if not kept:
        raise DataError("no sessions survive filtering")
    train_s, test_s = temporal_split(kept, holdout)
    vocab = build_vocab(train_s)

    def expand(ss):
        return [([vocab[i] for i in p], vocab[t]) for s in ss for p, t in sequence_split(s.items)]

    train, valid = validation_split(expand(train_s), valid_fraction, seed)
    return Dataset(train, valid, expand(test_s), vocab)


# ----------------------------------------------------------- persistence


def write_pairs(path, pairs: list[Pair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for prefix, target in pairs:
            fh.write(",".join(map(str, prefix)) + "\t" + str(target) + "\n")


def read_pairs(path) -> list[Pair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                prefix, target = line.split("\t")
                out.append(([int(x) for x in prefix.split(",")], int(target)))
            except ValueError:
                raise ParseError(path, lineno, "expected 'i1,i2,...<TAB>target'") from None
    return out


def save_dataset(ds: Dataset, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "vocab.tsv", "w", encoding="utf-8") as fh:
        for raw, idx in sorted(ds.item_vocab.items(), key=lambda kv: kv[1]):
            fh.write(f"{raw}\t{idx}\n")
    write_pairs(d / "train.txt", ds.train)
    write_pairs(d / "valid.txt", ds.valid)
    write_pairs(d / "test.txt", ds.test)


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    vocab = {}
    with open(d / "vocab.tsv", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                raw, idx = line.rstrip("\n").split("\t")
                vocab[raw] = int(idx)
    return Dataset(read_pairs(d / "train.txt"), read_pairs(d / "valid.txt"), read_pairs(d / "test.txt"), vocab)


def write_log(path, sessions: list[Session]) -> None:
    """Write sessions back out in the TSV interaction format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# session_id\titem_id\ttimestamp\n")
        for s in sessions:
            for item, ts in zip(s.items, s.timestamps):
                fh.write(f"{s.session_id}\t{item}\t{ts}\n")
