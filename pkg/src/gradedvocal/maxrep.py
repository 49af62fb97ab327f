"""Maximal repeats of symbolic corpora via an enhanced suffix array.

Sequences are concatenated with a unique negative sentinel after each one, so
no repeat can cross a sequence boundary. Every internal node of the implicit
suffix tree (an lcp-interval) is right-maximal; it is reported when the
characters preceding its occurrences are not all identical. Occurrences are
counted with overlaps, so ``aaaa`` yields ``a`` x4, ``aa`` x3 and ``aaa`` x2.
"""

from __future__ import annotations

import csv
import gc
from collections import Counter
from dataclasses import dataclass, field

import numba
import numpy as np


@dataclass(frozen=True)
class MaximalRepeat:
    pattern: tuple
    support: int

    @property
    def length(self) -> int:
        return len(self.pattern)


@dataclass
class MrInventory:
    context: str
    repeats: list[MaximalRepeat] = field(default_factory=list)
    min_support: int = 2

    def __post_init__(self):
        self.repeats = [r for r in self.repeats if r.support >= self.min_support]
        if len({r.pattern for r in self.repeats}) != len(self.repeats):
            raise ValueError("duplicate patterns in inventory")

    def __len__(self):
        return len(self.repeats)

    def lengths(self) -> np.ndarray:
        return np.array([r.length for r in self.repeats], dtype=int)


def concatenate(corpus) -> np.ndarray:
    """Join sequences, appending sentinel ``-(k + 1)`` after sequence ``k``."""
    parts = []
    for k, seq in enumerate(corpus):
        seq = list(getattr(seq, "symbols", seq))
        if any(s < 0 for s in seq):
            raise ValueError("symbols must be non-negative integers")
        parts.append(np.asarray(seq, dtype=np.int64))
        parts.append(np.array([-(k + 1)], dtype=np.int64))
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def suffix_array(s) -> np.ndarray:
    """Prefix doubling over integer ranks, O(n log^2 n)."""
    s = np.asarray(s)
    n = len(s)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    rank = np.unique(s, return_inverse=True)[1].astype(np.int64)
    sa = np.argsort(rank, kind="stable")
    k = 1
    while True:
        # (rank[i], rank[i + k]) packed into one key; -1 (past the end) sorts first
        key = rank * (n + 1)
        key[:n - k] += rank[k:] + 1
        sa = np.argsort(key, kind="stable")
        sk = key[sa]
        new_rank = np.empty(n, dtype=np.int64)
        new_rank[sa] = np.concatenate([[0], np.cumsum(sk[1:] != sk[:-1])])
        rank = new_rank
        if rank[sa[-1]] == n - 1 or k >= n:
            return sa
        k *= 2


@numba.njit(cache=True)
def _kasai(s, sa):
    n = len(s)
    rank = np.empty(n, dtype=np.int64)
    for i in range(n):
        rank[sa[i]] = i
    lcp = np.zeros(n, dtype=np.int64)
    h = 0
    for i in range(n):
        r = rank[i]
        if r > 0:
            j = sa[r - 1]
            while i + h < n and j + h < n and s[i + h] == s[j + h]:
                h += 1
            lcp[r] = h
            if h > 0:
                h -= 1
        else:
            h = 0
    return lcp


def lcp_array(s, sa) -> np.ndarray:
    """Kasai et al.; ``lcp[i]`` is the common prefix length of suffixes ``sa[i-1]`` and ``sa[i]``."""
    s = np.ascontiguousarray(s, dtype=np.int64)
    if len(s) == 0:
        return np.empty(0, dtype=np.int64)
    return _kasai(s, np.ascontiguousarray(sa, dtype=np.int64))


# left-character states of an lcp-interval; real characters are far above these
_EMPTY = np.int64(-(2 ** 62))
_DIVERSE = np.int64(-(2 ** 62) + 1)


@numba.njit(cache=True)
def _merge(a, b):
    if a == _EMPTY:
        return b
    if b == _EMPTY or a == _DIVERSE:
        return a
    if b == _DIVERSE or a != b:
        return _DIVERSE
    return a


@numba.njit(cache=True)
def _intervals(s, sa, lcp, min_support, min_length):
    """Bottom-up lcp-interval traversal; returns (start, length, support, left bound)
    of the left-diverse intervals, i.e. the maximal repeats."""
    n = len(s)
    boundary = -(n + 10)  # "no left neighbour" at position 0; unique
    st_lcp = np.empty(n + 2, dtype=np.int64)
    st_lb = np.empty(n + 2, dtype=np.int64)
    st_state = np.empty(n + 2, dtype=np.int64)
    out_start = np.empty(n, dtype=np.int64)
    out_len = np.empty(n, dtype=np.int64)
    out_sup = np.empty(n, dtype=np.int64)
    out_lb = np.empty(n, dtype=np.int64)
    k = 0
    top = 0
    st_lcp[0], st_lb[0], st_state[0] = 0, 0, _EMPTY
    for i in range(1, n + 1):
        ell = lcp[i] if i < n else -1
        p = sa[i - 1]
        leaf = s[p - 1] if p > 0 else boundary
        st_state[top] = _merge(st_state[top], leaf)
        lb = i - 1
        have_last = False
        last_state = _EMPTY
        while top >= 0 and ell < st_lcp[top]:
            node_lcp, node_lb, state = st_lcp[top], st_lb[top], st_state[top]
            top -= 1
            if state == _DIVERSE and node_lcp >= min_length:
                support = i - node_lb
                if support >= min_support:
                    out_start[k] = sa[node_lb]
                    out_len[k] = node_lcp
                    out_sup[k] = support
                    out_lb[k] = node_lb
                    k += 1
            lb = node_lb
            have_last = True
            last_state = state
            if top >= 0 and ell <= st_lcp[top]:
                st_state[top] = _merge(st_state[top], state)
        if ell >= 0 and (top < 0 or ell > st_lcp[top]):
            top += 1
            st_lcp[top] = ell
            st_lb[top] = lb
            st_state[top] = last_state if have_last else leaf
    return out_start[:k], out_len[:k], out_sup[:k], out_lb[:k]


def maximal_repeats(corpus, min_support: int = 2, min_length: int = 1) -> list[MaximalRepeat]:
    """All maximal repeats of ``corpus`` (sequences of non-negative ints)."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus is empty")
    s = concatenate(corpus)
    sa = suffix_array(s)
    lcp = lcp_array(s, sa)
    starts, lengths, supports, lbs = _intervals(s, sa.astype(np.int64), lcp, int(min_support),
                                                max(int(min_length), 1))
    # equal-length repeats occupy disjoint suffix-array intervals, so sorting by
    # (length, left bound) is sorting by (length, pattern)
    order = np.lexsort((lbs, lengths))
    s_l = s.tolist()
    # the collector would rescan the growing list on every generation-0 sweep
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        return [MaximalRepeat(tuple(s_l[a:a + m]), c) for a, m, c in
                zip(starts[order].tolist(), lengths[order].tolist(), supports[order].tolist())]
    finally:
        if was_enabled:
            gc.enable()


def inventory(corpus, context: str = "", min_support: int = 2, min_length: int = 1) -> MrInventory:
    return MrInventory(context, maximal_repeats(corpus, min_support, min_length), min_support)


def mr_length_distribution(inv: MrInventory) -> dict[int, int]:
    """Number of repeat types per length."""
    return dict(sorted(Counter(r.length for r in inv.repeats).items()))


def mean_mr_length_by_context(corpora: dict, min_support: int = 50,
                              min_length: int = 1) -> dict[str, float | None]:
    """Mean repeat-type length per context; ``None`` where no repeat qualifies."""
    out = {}
    for ctx in sorted(corpora):
        seqs = list(corpora[ctx])
        if not seqs:
            raise ValueError(f"context {ctx!r} has an empty corpus")
        inv = inventory(seqs, ctx, min_support, min_length)
        out[ctx] = float(inv.lengths().mean()) if len(inv) else None
    return out


def pattern_str(pattern) -> str:
    return "-".join(str(int(v)) for v in pattern)


def parse_pattern(text: str) -> tuple:
    return tuple(int(v) for v in text.split("-")) if text else ()


def write_inventory_csv(path, inventories):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["context", "pattern", "length", "support"])
        for inv in inventories:
            for r in inv.repeats:
                w.writerow([inv.context, pattern_str(r.pattern), r.length, r.support])


def read_inventory_csv(path, min_support: int = 2) -> dict[str, MrInventory]:
    groups: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            groups.setdefault(row["context"], []).append(
                MaximalRepeat(parse_pattern(row["pattern"]), int(row["support"])))
    return {c: MrInventory(c, reps, min_support) for c, reps in groups.items()}
