import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradedvocal import maxrep
from gradedvocal.maxrep import MaximalRepeat, MrInventory
from gradedvocal.synth import gen_planted_repeats
from oracles import brute_maximal_repeats


def as_set(reps):
    return {(r.pattern, r.support) for r in reps}


def occurrences(corpus, pattern):
    k = len(pattern)
    return sum(1 for s in corpus for i in range(len(s) - k + 1) if tuple(s[i:i + k]) == pattern)


def test_examples():
    assert as_set(maxrep.maximal_repeats([[0, 1, 0, 1]])) == {((0, 1), 2)}
    assert as_set(maxrep.maximal_repeats([[0, 0, 0, 0]])) == {((0,), 4), ((0, 0), 3), ((0, 0, 0), 2)}
    assert maxrep.maximal_repeats([[0, 1, 2, 3, 4]]) == []
    with pytest.raises(ValueError):
        maxrep.maximal_repeats([])


def test_suffix_array_and_lcp_against_sorting():
    s = np.random.default_rng(0).integers(0, 3, 200)
    sa = maxrep.suffix_array(s)
    assert sa.tolist() == sorted(range(len(s)), key=lambda i: s[i:].tolist())
    lcp = maxrep.lcp_array(s, sa)
    for r in range(1, len(s)):
        a, b = s[sa[r - 1]:].tolist(), s[sa[r]:].tolist()
        k = 0
        while k < min(len(a), len(b)) and a[k] == b[k]:
            k += 1
        assert lcp[r] == k


corpora = st.lists(st.lists(st.integers(0, 3), min_size=0, max_size=15), min_size=1, max_size=5)


@settings(max_examples=150, deadline=None)
@given(corpora)
def test_matches_brute_force(corpus):
    assert as_set(maxrep.maximal_repeats(corpus)) == brute_maximal_repeats(corpus)


@settings(max_examples=60, deadline=None)
@given(corpora)
def test_no_cross_boundary_and_support_monotone(corpus):
    for r in maxrep.maximal_repeats(corpus):
        assert all(v >= 0 for v in r.pattern)
        assert occurrences(corpus, r.pattern) == r.support
        for k in range(1, r.length):
            assert occurrences(corpus, r.pattern[:k]) >= r.support


def test_min_support_and_min_length_filters():
    corpus = [[0, 0, 0, 0]]
    assert as_set(maxrep.maximal_repeats(corpus, min_support=3)) == {((0,), 4), ((0, 0), 3)}
    assert as_set(maxrep.maximal_repeats(corpus, min_length=2)) == {((0, 0), 3), ((0, 0, 0), 2)}


def test_inventory_invariants():
    inv = MrInventory("Fighting", [MaximalRepeat((1,), 5), MaximalRepeat((2,), 1)], min_support=2)
    assert len(inv) == 1
    with pytest.raises(ValueError):
        MrInventory("Fighting", [MaximalRepeat((1,), 5), MaximalRepeat((1,), 5)])


def test_length_distribution():
    inv = maxrep.inventory([[0, 0, 0, 0]], "x")
    assert maxrep.mr_length_distribution(inv) == {1: 1, 2: 1, 3: 1}
    assert maxrep.mr_length_distribution(MrInventory("x")) == {}


def test_planted_motif():
    seqs, motif = gen_planted_repeats(base_alphabet=20, motif_len=8, n_insertions=60, seed=0)
    reps = maxrep.maximal_repeats(seqs)
    hit = [r for r in reps if r.pattern == tuple(motif)]
    assert hit and hit[0].support >= 60
    inv = maxrep.inventory(seqs, "x", min_support=60, min_length=3)
    hist = maxrep.mr_length_distribution(inv)
    assert max(hist, key=hist.get) == 8
    single, motif1 = gen_planted_repeats(base_alphabet=50, motif_len=8, n_insertions=1, seed=0, n_seqs=5)
    assert tuple(motif1) not in {r.pattern for r in maxrep.maximal_repeats(single)}


def test_background_repeats_are_short():
    seqs, _ = gen_planted_repeats(base_alphabet=20, n_insertions=0, n_seqs=100, seed=1)
    longest = max(r.length for r in maxrep.maximal_repeats(seqs))
    total = sum(map(len, seqs))
    # chance repeats grow like log_20(total^2)
    assert longest <= 2 * np.log(total) / np.log(20) + 2


def test_mean_length_by_context():
    out = maxrep.mean_mr_length_by_context({"a": [[0, 0, 0, 0]]}, min_support=2)
    assert out == {"a": 2.0}
    assert maxrep.mean_mr_length_by_context({"a": [[0, 0, 0, 0]]}, min_support=10) == {"a": None}
    planted, _ = gen_planted_repeats(20, 8, 60, seed=2)
    plain, _ = gen_planted_repeats(20, 8, 0, seed=3, n_seqs=60)
    means = maxrep.mean_mr_length_by_context({"planted": planted, "plain": plain}, min_support=2)
    assert means["planted"] > means["plain"]


def test_inventory_csv_roundtrip(tmp_path):
    inv = maxrep.inventory([[3, 10, 3, 10, 4]], "Fighting")
    maxrep.write_inventory_csv(tmp_path / "i.csv", [inv])
    text = (tmp_path / "i.csv").read_text().splitlines()
    assert text[0] == "context,pattern,length,support" and "3-10" in text[1]
    back = maxrep.read_inventory_csv(tmp_path / "i.csv")
    assert back["Fighting"].repeats == inv.repeats


def _best_time(corpus, reps=3):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        maxrep.maximal_repeats(corpus)
        best = min(best, time.perf_counter() - t0)
    return best


@pytest.mark.slow
def test_runtime_scales_near_linearly():
    rng = np.random.default_rng(4)
    small = [rng.integers(0, 10, 50).tolist() for _ in range(1000)]
    big = small + [rng.integers(0, 10, 50).tolist() for _ in range(1000)]
    assert _best_time(big) <= 2.5 * _best_time(small)
