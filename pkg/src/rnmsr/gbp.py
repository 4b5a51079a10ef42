"""Group-level behavior patterns.

A session is relabelled item-independently: each distinct item gets the key
1, 2, 3, ... in order of first appearance (displayed A, B, C, ...).  The
resulting key sequence is a restricted-growth string.
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

DEFAULT_L_MAX = 6
LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"

Pattern = tuple[int, ...]


def key_letter(key: int) -> str:
    return LETTERS[key - 1]


def pattern_str(pattern: Sequence[int], sep: str = "→") -> str:
    return sep.join(key_letter(k) for k in pattern)


def parse_pattern(text: str) -> Pattern:
    """Inverse of :func:`pattern_str`; accepts ``A→B``, ``A-B``, ``AB`` or ``A,B``."""
    letters = [c for c in text.upper() if c in LETTERS]
    return tuple(LETTERS.index(c) + 1 for c in letters)


def build_mapping(session: Sequence[Hashable]) -> dict:
    """Map each distinct item to its key (count of distinct items at first sight)."""
    if not session:
        raise ValueError("empty session")
    table: dict = {}
    for item in session:
        if item not in table:
            table[item] = len(table) + 1
    return table


def extract_gbp(session: Sequence[Hashable], l_max: int = DEFAULT_L_MAX) -> Pattern:
    """Pattern of the last ``l_max`` items, keyed by a table built on that suffix."""
    suffix = list(session)[-l_max:] if len(session) > l_max else list(session)
    table = build_mapping(suffix)
    return tuple(table[item] for item in suffix)


def is_restricted_growth(pattern: Sequence[int]) -> bool:
    if not pattern or pattern[0] != 1:
        return False
    top = 1
    for k in pattern[1:]:
        if k < 1 or k > top + 1:
            return False
        top = max(top, k)
    return True


def enumerate_patterns(l_max: int = DEFAULT_L_MAX) -> list[Pattern]:
    """All restricted-growth strings of length 1..l_max in lexicographic order."""
    if not 1 <= l_max <= 8:
        raise ValueError("l_max must be in 1..8")
    out: list[Pattern] = []

    def grow(prefix: list[int], top: int) -> None:
        out.append(tuple(prefix))
        if len(prefix) == l_max:
            return
        for k in range(1, top + 2):
            prefix.append(k)
            grow(prefix, max(top, k))
            prefix.pop()

    grow([1], 1)
    return out


class PatternVocab:
    """Dense indices for patterns, with a trailing UNK index."""

    def __init__(self, patterns: Iterable[Pattern]):
        self.patterns: list[Pattern] = []
        self._index: dict[Pattern, int] = {}
        for p in patterns:
            p = tuple(p)
            if not is_restricted_growth(p):
                raise ValueError(f"not a restricted-growth pattern: {p}")
            if p not in self._index:
                self._index[p] = len(self.patterns)
                self.patterns.append(p)
        self.unk = len(self.patterns)

    @classmethod
    def full(cls, l_max: int = DEFAULT_L_MAX) -> "PatternVocab":
        return cls(enumerate_patterns(l_max))

    def __len__(self) -> int:
        return len(self.patterns) + 1

    def __contains__(self, pattern) -> bool:
        return tuple(pattern) in self._index

    def index(self, pattern: Sequence[int]) -> int:
        return self._index.get(tuple(pattern), self.unk)

    def pattern(self, idx: int) -> Pattern | None:
        return None if idx == self.unk else self.patterns[idx]


@dataclass
class GBPStats:
    total: int = 0
    repeat: int = 0
    explore: int = 0
    per_key: dict[int, int] = field(default_factory=dict)


def compute_stats(pairs, l_max: int = DEFAULT_L_MAX) -> dict[Pattern, GBPStats]:
    """Next-action repeat/explore counts per pattern over (prefix, target) pairs.

    A target counts as a repeat only if it occurs in the last ``l_max`` items.
    """
    stats: dict[Pattern, GBPStats] = defaultdict(GBPStats)
    for prefix, target in pairs:
        suffix = list(prefix)[-l_max:]
        table = build_mapping(suffix)
        pattern = tuple(table[i] for i in suffix)
        st = stats[pattern]
        st.total += 1
        key = table.get(target)
        if key is None:
            st.explore += 1
        else:
            st.repeat += 1
            st.per_key[key] = st.per_key.get(key, 0) + 1
    return dict(stats)


def _pct(count: int, total: int) -> int:
    return int(100.0 * count / total + 0.5) if total else 0


def _sorted(stats):
    return sorted(stats.items(), key=lambda kv: (len(kv[0]), kv[0]))


def render_report(stats: dict[Pattern, GBPStats], fmt: str = "text", l_max: int | None = None) -> str:
    """Table-style report, one row per pattern, integer percentages of the total."""
    width = l_max or max((max(p) for p in stats), default=DEFAULT_L_MAX)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pattern"] + [f"key{key_letter(k)}%" for k in range(1, width + 1)] + ["sum%", "new%"])
        for pattern, st in _sorted(stats):
            keys = [_pct(st.per_key.get(k, 0), st.total) if k <= max(pattern) else "" for k in range(1, width + 1)]
            w.writerow([pattern_str(pattern)] + keys + [_pct(st.repeat, st.total), _pct(st.explore, st.total)])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    rows = []
    for pattern, st in _sorted(stats):
        keys = " ".join(f"{key_letter(k)} {_pct(st.per_key.get(k, 0), st.total)}%" for k in range(1, max(pattern) + 1))
        rows.append(
            f"{pattern_str(pattern)} | {keys} | Sum {_pct(st.repeat, st.total)}% | New {_pct(st.explore, st.total)}%"
        )
    header = "pattern | per-key repeat | Sum | New"
    return "\n".join([header] + rows) + "\n"
