"""Slow, definitional reference implementations used as test oracles."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np


def brute_maximal_repeats(corpus) -> set[tuple[tuple, int]]:
    """(pattern, support) for every substring occurring >= 2 times whose
    occurrences show >= 2 distinct left and >= 2 distinct right neighbours.

    Sequence ends count as neighbours that differ from everything else.
    """
    occ = defaultdict(list)
    for k, seq in enumerate(corpus):
        seq = list(seq)
        n = len(seq)
        for i in range(n):
            for j in range(i + 1, n + 1):
                left = seq[i - 1] if i > 0 else ("start", k, i)
                right = seq[j] if j < n else ("end", k, j)
                occ[tuple(seq[i:j])].append((left, right))
    out = set()
    for pat, o in occ.items():
        if len(o) < 2:
            continue
        if len({l for l, _ in o}) >= 2 and len({r for _, r in o}) >= 2:
            out.add((pat, len(o)))
    return out


def dtw_exhaustive(a, b, band=None) -> float:
    """Minimum over every monotone match/insert/delete path of summed frame costs."""
    A = np.atleast_2d(np.asarray(a, dtype=float))
    B = np.atleast_2d(np.asarray(b, dtype=float))
    n, m = A.shape[1], B.shape[1]
    w = max(n, m) if band is None else max(band, abs(n - m))
    cost = np.array([[np.linalg.norm(A[:, i] - B[:, j]) for j in range(m)] for i in range(n)])
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        if abs(i - j) > w:
            return
        acc += cost[i, j]
        if i == n - 1 and j == m - 1:
            best = min(best, acc)
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best


def silhouette_def(D, labels) -> float:
    D = np.asarray(D, dtype=float)
    labels = list(labels)
    n = len(labels)
    total = 0.0
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            continue  # singleton scores 0
        a = sum(D[i, j] for j in own) / len(own)
        b = min(sum(D[i, j] for j in range(n) if labels[j] == c) / labels.count(c)
                for c in set(labels) if c != labels[i])
        if max(a, b) > 0:
            total += (b - a) / max(a, b)
    return total / n


def ari_pairs(x, y) -> float:
    """ARI from explicit enumeration of all item pairs."""
    n = len(x)
    pairs = list(itertools.combinations(range(n), 2))
    same_x = [x[i] == x[j] for i, j in pairs]
    same_y = [y[i] == y[j] for i, j in pairs]
    index = sum(a and b for a, b in zip(same_x, same_y))
    sx, sy = sum(same_x), sum(same_y)
    expected = sx * sy / len(pairs)
    max_index = (sx + sy) / 2
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)


def nmi_def(x, y) -> float:
    n = len(x)
    px = {a: x.count(a) / n for a in set(x)}
    py = {b: y.count(b) / n for b in set(y)}
    pxy = defaultdict(float)
    for a, b in zip(x, y):
        pxy[a, b] += 1 / n
    hx = -sum(p * math.log(p) for p in px.values())
    hy = -sum(p * math.log(p) for p in py.values())
    if hx == 0 and hy == 0:
        return 1.0
    mi = sum(p * math.log(p / (px[a] * py[b])) for (a, b), p in pxy.items())
    return mi / ((hx + hy) / 2)


def brute_maximal_cliques(adj) -> set[frozenset]:
    nodes = sorted(adj)
    cliques = []
    for r in range(1, len(nodes) + 1):
        for sub in itertools.combinations(nodes, r):
            if all(v in adj[u] for u, v in itertools.combinations(sub, 2)):
                cliques.append(frozenset(sub))
    return {c for c in cliques if not any(c < d for d in cliques)}


def wilcoxon_enum(x, y) -> float:
    """Two-sided exact p by listing every assignment of ranks to the first sample."""
    n, N = len(x), len(x) + len(y)
    pooled = sorted(list(x) + list(y))
    rank = {v: i + 1 for i, v in enumerate(pooled)}
    W = sum(rank[v] for v in x)
    sums = [sum(c) for c in itertools.combinations(range(1, N + 1), n)]
    lower = sum(s <= W for s in sums) / len(sums)
    upper = sum(s >= W for s in sums) / len(sums)
    return min(1.0, 2 * min(lower, upper))


def density_def(adj) -> float:
    n = len(adj)
    edges = {frozenset((u, v)) for u in adj for v in adj[u]}
    return 2 * len(edges) / (n * (n - 1)) if n > 1 else 0.0


def clustering_def(adj) -> float:
    vals = []
    for u in adj:
        nb = sorted(adj[u])
        k = len(nb)
        if k < 2:
            vals.append(0.0)
            continue
        tri = sum(1 for v, w in itertools.combinations(nb, 2) if w in adj[v])
        vals.append(tri / (k * (k - 1) / 2))
    return sum(vals) / len(vals) if vals else 0.0


def random_graph(n, p, rng) -> dict:
    adj = {i: set() for i in range(n)}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            adj[i].add(j)
            adj[j].add(i)
    return adj


def ring_lattice(n, k) -> dict:
    adj = {i: set() for i in range(n)}
    for i in range(n):
        for d in range(1, k // 2 + 1):
            adj[i].add((i + d) % n)
            adj[(i + d) % n].add(i)
    return adj
