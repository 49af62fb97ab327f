"""Small-world coefficients on reference graphs: ring lattice, Watts-Strogatz-like, random."""

import argparse

import numpy as np

from gradedvocal.netgraph import TransitionGraph, graph_metrics


def ring(n, k, p_rewire, rng):
    edges = set()
    for i in range(n):
        for d in range(1, k // 2 + 1):
            j = (i + d) % n
            if rng.random() < p_rewire:
                j = int(rng.integers(n))
                while j == i or (min(i, j), max(i, j)) in edges:
                    j = int(rng.integers(n))
            edges.add((min(i, j), max(i, j)))
    return TransitionGraph({e: 1 for e in edges}, list(range(n)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=50)
    ap.add_argument("-k", type=int, default=4)
    ap.add_argument("--n-rand", type=int, default=20)
    args = ap.parse_args()
    print("rewire_p   sigma    omega   density  avg_C")
    for p in (0.0, 0.01, 0.05, 0.1, 0.3, 1.0):
        g = ring(args.n, args.k, p, np.random.default_rng(int(p * 1000)))
        m = graph_metrics(g, seed=0, n_rand=args.n_rand)
        print(f"{p:8.2f}  {m.sigma:6.3f}  {m.omega:+.3f}   {m.density:.3f}    {m.avg_clustering:.3f}")


if __name__ == "__main__":
    main()
