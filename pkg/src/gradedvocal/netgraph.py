"""Syllable-transition networks and their small-world / clique statistics.

Structural metrics use the undirected simple projection of the directed
transition counts: self-loops are dropped and the two directions of an edge
collapse into one.
"""

from __future__ import annotations

import csv
import math
from collections import Counter, deque
from dataclasses import asdict, dataclass, field

import numpy as np

METRIC_COLUMNS = ["support", "sigma", "omega", "n_big_clique", "n_all_cliques",
                  "density", "avg_clustering"]


@dataclass
class TransitionGraph:
    weights: dict  # (src, dst) -> count
    nodes: list = field(default_factory=list)
    context: str = ""

    def __post_init__(self):
        if any(w < 1 for w in self.weights.values()):
            raise ValueError("edge weights must be >= 1")
        seen = set(self.nodes) | {u for e in self.weights for u in e}
        self.nodes = sorted(seen)

    @property
    def support(self) -> int:
        return int(sum(self.weights.values()))

    @property
    def self_loop_mass(self) -> int:
        return int(sum(w for (u, v), w in self.weights.items() if u == v))

    def undirected(self) -> dict:
        """Adjacency sets of the simple undirected projection."""
        adj = {u: set() for u in self.nodes}
        for u, v in self.weights:
            if u != v:
                adj[u].add(v)
                adj[v].add(u)
        return adj


def build_transition_graph(seqs, context: str = "") -> TransitionGraph:
    """Count adjacent pairs within each sequence; nothing links consecutive sequences."""
    seqs = [list(getattr(q, "symbols", q)) for q in seqs]
    if not seqs:
        raise ValueError("need at least one sequence")
    counts = Counter()
    nodes = set()
    for s in seqs:
        nodes.update(s)
        counts.update(zip(s[:-1], s[1:]))
    return TransitionGraph(dict(counts), sorted(nodes), context)


# --- definitional metrics ---------------------------------------------------

def n_edges(adj) -> int:
    return sum(len(v) for v in adj.values()) // 2


def density(adj) -> float:
    n = len(adj)
    return 0.0 if n < 2 else 2.0 * n_edges(adj) / (n * (n - 1))


def local_clustering(adj, u) -> float:
    nb = list(adj[u])
    k = len(nb)
    if k < 2:
        return 0.0
    links = sum(1 for i in range(k) for j in range(i + 1, k) if nb[j] in adj[nb[i]])
    return 2.0 * links / (k * (k - 1))


def average_clustering(adj) -> float:
    if not adj:
        return 0.0
    return float(np.mean([local_clustering(adj, u) for u in adj]))


def bron_kerbosch(adj) -> list[frozenset]:
    """All maximal cliques (Bron-Kerbosch with Tomita pivoting); isolated nodes count."""
    out = []
    stack = [(set(), set(adj), set())]
    while stack:
        R, P, X = stack.pop()
        if not P and not X:
            out.append(frozenset(R))
            continue
        pivot = max(P | X, key=lambda u: len(adj[u] & P))
        for v in list(P - adj[pivot]):
            stack.append((R | {v}, P & adj[v], X & adj[v]))
            P.remove(v)
            X.add(v)
    return out


def largest_component(adj) -> dict:
    seen, best = set(), set()
    for s in _sorted_nodes(adj):
        if s in seen:
            continue
        comp, queue = {s}, deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        if len(comp) > len(best):
            best = comp
    return {u: adj[u] & best for u in best}


def average_shortest_path(adj) -> float:
    """Mean BFS distance over ordered pairs of a connected graph."""
    n = len(adj)
    if n < 2:
        return 0.0
    total = 0
    for s in adj:
        dist = {s: 0}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        if len(dist) != n:
            raise ValueError("graph is disconnected")
        total += sum(dist.values())
    return total / (n * (n - 1))


# --- reference graphs -------------------------------------------------------

def _sorted_nodes(nodes):
    try:
        return sorted(nodes)
    except TypeError:
        return sorted(nodes, key=repr)


def _edge_list(adj):
    rank = {u: k for k, u in enumerate(_sorted_nodes(adj))}
    return sorted(((u, v) for u in adj for v in adj[u] if rank[u] < rank[v]),
                  key=lambda e: (rank[e[0]], rank[e[1]]))


def _to_adj(nodes, edges):
    adj = {u: set() for u in nodes}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def degree_preserving_rewire(adj, n_swaps_per_edge: int = 10, rng=None, accept=None):
    """Maslov-Sneppen double-edge swaps; ``accept(old, new)`` can veto a swap.

    Self-loops and multi-edges are never created, so the degree sequence is
    conserved exactly.
    """
    rng = np.random.default_rng(rng)
    nodes = list(adj)
    edges = _edge_list(adj)
    m = len(edges)
    if m < 2:
        return _to_adj(nodes, edges)
    present = {frozenset(e) for e in edges}
    for _ in range(n_swaps_per_edge * m):
        i, j = rng.integers(m, size=2)
        if i == j:
            continue
        a, b = edges[i]
        c, d = edges[j]
        if rng.random() < 0.5:
            c, d = d, c
        if a == d or c == b or len({a, b, c, d}) < 4:
            continue
        e1, e2 = frozenset((a, d)), frozenset((c, b))
        if e1 in present or e2 in present:
            continue
        if accept is not None and not accept(((a, b), (c, d)), ((a, d), (c, b))):
            continue
        present -= {frozenset((a, b)), frozenset((c, d))}
        present |= {e1, e2}
        edges[i], edges[j] = (a, d), (c, b)
    return _to_adj(nodes, edges)


def latticize(adj, n_swaps_per_edge: int = 100, rng=None):
    """Degree-preserving swaps accepted only when they shorten edges around a ring."""
    order = {u: k for k, u in enumerate(_sorted_nodes(adj))}
    n = len(order)

    def ring(u, v):
        d = abs(order[u] - order[v])
        return min(d, n - d)

    def accept(old, new):
        return ring(*new[0]) + ring(*new[1]) < ring(*old[0]) + ring(*old[1])

    return degree_preserving_rewire(adj, n_swaps_per_edge, rng, accept)


def _c_and_l(adj):
    cc = largest_component(adj)
    return average_clustering(adj), average_shortest_path(cc)


@dataclass
class SmallWorld:
    C: float
    L: float
    C_rand: float
    L_rand: float
    C_latt: float
    sigma: float | None
    omega: float | None


def small_world(adj, n_rand: int = 20, n_swaps_per_edge: int = 10, seed=0,
                n_lattice_swaps_per_edge: int = 100) -> SmallWorld | None:
    """sigma = (C/C_rand)/(L/L_rand) and omega = L_rand/L - C/C_latt on the largest component.

    The greedy lattice search gets a larger swap budget than the random
    references because accepted moves become rare as it converges.
    Returns None when the component is too small to rewire.
    """
    g = largest_component(adj)
    if len(g) < 4 or n_edges(g) < 2:
        return None
    C, L = average_clustering(g), average_shortest_path(g)
    seeds = np.random.SeedSequence(seed).spawn(n_rand + 1)
    cs, ls = [], []
    for s in seeds[:n_rand]:
        c, l = _c_and_l(degree_preserving_rewire(g, n_swaps_per_edge, np.random.default_rng(s)))
        cs.append(c)
        ls.append(l)
    C_rand, L_rand = float(np.mean(cs)), float(np.mean(ls))
    C_latt = average_clustering(latticize(g, n_lattice_swaps_per_edge,
                                          np.random.default_rng(seeds[-1])))
    sigma = (C / C_rand) / (L / L_rand) if C_rand > 0 and L > 0 and L_rand > 0 else None
    omega = L_rand / L - C / C_latt if C_latt > 0 and L > 0 else None
    return SmallWorld(C, L, C_rand, L_rand, C_latt, sigma, omega)


@dataclass
class GraphMetrics:
    support: int
    sigma: float | None
    omega: float | None
    n_big_clique: int
    n_all_cliques: int
    density: float
    avg_clustering: float
    self_loop_mass: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def graph_metrics(g: TransitionGraph, seed=0, n_rand: int = 20, n_swaps_per_edge: int = 10,
                  n_lattice_swaps_per_edge: int = 100) -> GraphMetrics:
    adj = g.undirected()
    if len(adj) < 2:
        raise ValueError("graph metrics need at least two nodes")
    cliques = bron_kerbosch(adj)
    sw = small_world(adj, n_rand, n_swaps_per_edge, seed, n_lattice_swaps_per_edge)
    return GraphMetrics(
        support=g.support,
        sigma=None if sw is None else sw.sigma,
        omega=None if sw is None else sw.omega,
        n_big_clique=max(len(c) for c in cliques),
        n_all_cliques=len(cliques),
        density=density(adj),
        avg_clustering=average_clustering(adj),
        self_loop_mass=g.self_loop_mass,
    )


def small_world_sweep(graphs: dict, seed=0, n_rand: int = 20, n_swaps_per_edge: int = 10,
                      n_lattice_swaps_per_edge: int = 100) -> dict:
    """One metrics row per context; failures become ``None`` rows."""
    out = {}
    for k, ctx in enumerate(sorted(graphs)):
        sub_seed = np.random.SeedSequence([int(seed), k]).generate_state(1)[0]
        try:
            out[ctx] = graph_metrics(graphs[ctx], int(sub_seed), n_rand, n_swaps_per_edge,
                                     n_lattice_swaps_per_edge)
        except ValueError:
            out[ctx] = None
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 12)) if math.isfinite(v) else ""
    return str(v)


def write_metrics_csv(path, rows: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["context", *METRIC_COLUMNS])
        for ctx, m in rows.items():
            if m is None:
                w.writerow([ctx] + [""] * len(METRIC_COLUMNS))
            else:
                w.writerow([ctx, *(_fmt(getattr(m, c)) for c in METRIC_COLUMNS)])


def write_edges_csv(path, g: TransitionGraph):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for (u, v), wt in sorted(g.weights.items()):
            w.writerow([u, v, wt])
