"""Mean maximal-repeat length with and without planted motifs, and runtime scaling."""

import argparse
import time

import numpy as np

from gradedvocal import maxrep
from gradedvocal.synth import gen_planted_repeats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--min-support", type=int, default=50)
    ap.add_argument("--motif-len", type=int, default=8)
    args = ap.parse_args()
    print("insertions  mean_len  n_repeats  motif_found")
    for n_ins in (0, 20, 50, 60, 100, 200):
        seqs, motif = gen_planted_repeats(20, args.motif_len, n_ins, seed=n_ins, n_seqs=max(n_ins, 80))
        inv = maxrep.inventory(seqs, "x", args.min_support)
        found = tuple(motif) in {r.pattern for r in inv.repeats}
        mean = inv.lengths().mean() if len(inv) else float("nan")
        print(f"{n_ins:10d}  {mean:8.3f}  {len(inv):9d}  {found}")

    print("\nn_seqs  symbols   seconds  ratio")
    rng = np.random.default_rng(0)
    prev = None
    for n in (500, 1000, 2000, 4000, 8000):
        corpus = [rng.integers(0, 10, 50).tolist() for _ in range(n)]
        best = min(_timed(corpus) for _ in range(3))
        ratio = "" if prev is None else f"{best / prev:.2f}"
        print(f"{n:6d}  {50 * n:7d}  {best:8.3f}  {ratio}")
        prev = best


def _timed(corpus):
    t0 = time.perf_counter()
    maxrep.maximal_repeats(corpus)
    return time.perf_counter() - t0


if __name__ == "__main__":
    main()
