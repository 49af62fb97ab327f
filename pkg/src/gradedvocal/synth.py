"""Seeded synthetic data with known ground truth.

Every generator is a pure function of its arguments and ``seed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip
from .seq import CONTEXTS, SymbolSequence


def _rng(seed):
    return np.random.default_rng(seed)


def _check_distribution(p, name):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-9):
        raise ValueError(f"{name} must be a probability vector")
    return p


def gen_markov(P, init, n_seqs: int, len_range: tuple[int, int], seed=0) -> list[list[int]]:
    """First-order Markov chains; lengths drawn uniformly from ``len_range`` (inclusive)."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("transition matrix rows must be probability vectors")
    init = _check_distribution(init, "init")
    lo, hi = len_range
    if not 1 <= lo <= hi:
        raise ValueError("len_range must satisfy 1 <= lo <= hi")
    rng = _rng(seed)
    k = len(init)
    cum = np.cumsum(P, axis=1)
    out = []
    for _ in range(n_seqs):
        n = int(rng.integers(lo, hi + 1))
        u = rng.random(n)
        s = int(rng.choice(k, p=init))
        seq = [s]
        for t in range(1, n):
            s = int(min(np.searchsorted(cum[s], u[t], side="right"), k - 1))
            seq.append(s)
        out.append(seq)
    return out


def gen_powerlaw_ints(alpha: float, xmin: int = 1, n: int = 10_000, seed=0) -> np.ndarray:
    """Approximate discrete power law by rounding a continuous Pareto draw."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if xmin < 1:
        raise ValueError("xmin must be >= 1")
    u = _rng(seed).random(n)
    x = np.floor((xmin - 0.5) * (1.0 - u) ** (-1.0 / (alpha - 1.0)) + 0.5)
    # the rounding can only land at or above xmin; the clip guards against float overflow
    return np.clip(x, xmin, np.iinfo(np.int64).max // 2).astype(np.int64)


def gen_geometric_ints(lam: float, xmin: int = 1, n: int = 10_000, seed=0) -> np.ndarray:
    """Discrete exponential tail P(x) proportional to exp(-lam * x), x >= xmin."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return xmin - 1 + _rng(seed).geometric(1.0 - np.exp(-lam), size=n)


def _full_cycle(k, rng):
    """Successor map of a random cyclic permutation through all ``k`` symbols."""
    order = rng.permutation(k)
    succ = np.empty(k, dtype=int)
    succ[order] = np.roll(order, -1)
    return succ


def combinatorial_matrices(n_contexts: int, alphabet: int, seed=0) -> list[np.ndarray]:
    """Doubly stochastic bigram matrices, one per context.

    Context ``c`` mixes ``2**c`` random single-cycle permutation matrices (capped
    at the alphabet size). Each is irreducible, so every context has the unique
    uniform stationary distribution but differs in how predictable the next
    symbol is.
    """
    rng = _rng(seed)
    mats = []
    for c in range(n_contexts):
        m = min(2 ** c, alphabet)
        P = np.zeros((alphabet, alphabet))
        for _ in range(m):
            P[np.arange(alphabet), _full_cycle(alphabet, rng)] += 1.0 / m
        mats.append(P)
    return mats


def associative_unigrams(n_contexts: int, alphabet: int, seed=0) -> list[np.ndarray]:
    """Per-context unigram distributions with distinct supports and entropies.

    Context ``c`` is uniform over a random subset of symbols; subset sizes are
    spaced geometrically between 2 and ``alphabet``, so contexts differ in which
    symbols and how many are used.
    """
    if alphabet < 4 or n_contexts < 2:
        raise ValueError("associative corpus needs alphabet >= 4 and n_contexts >= 2")
    sizes = np.round(np.geomspace(2, alphabet, n_contexts)).astype(int)
    if len(np.unique(sizes)) < n_contexts:
        raise ValueError(f"alphabet {alphabet} too small for {n_contexts} distinct contexts")
    rng = _rng(seed)
    dists = []
    for size in sizes:
        p = np.zeros(alphabet)
        p[rng.choice(alphabet, size=size, replace=False)] = 1.0 / size
        dists.append(p)
    return dists


def gen_context_corpus(mode: str, n_contexts: int = 4, alphabet: int = 8, n_seqs: int = 800,
                       len_range: tuple[int, int] = (20, 40), seed=0,
                       emitters_per_context: int = 4) -> list[SymbolSequence]:
    """Labelled corpus whose contexts differ only in unigram mix (``associative``)
    or only in symbol order (``combinatorial``)."""
    if alphabet < 4 or n_contexts < 2:
        raise ValueError("need alphabet >= 4 and n_contexts >= 2")
    if n_contexts > len(CONTEXTS):
        raise ValueError(f"at most {len(CONTEXTS)} contexts are available")
    ss = np.random.SeedSequence(seed)
    param_seed, data_seed = ss.spawn(2)
    rng = _rng(data_seed)
    lo, hi = len_range
    uniform = np.full(alphabet, 1.0 / alphabet)
    if mode == "associative":
        unigrams = associative_unigrams(n_contexts, alphabet, param_seed)
    elif mode == "combinatorial":
        mats = combinatorial_matrices(n_contexts, alphabet, param_seed)
    else:
        raise ValueError(f"unknown corpus mode {mode!r}")
    seqs = []
    for i in range(n_seqs):
        c = i % n_contexts
        n = int(rng.integers(lo, hi + 1))
        if mode == "associative":
            symbols = rng.choice(alphabet, size=n, p=unigrams[c])
        else:
            cum = np.cumsum(mats[c], axis=1)
            u = rng.random(n)
            s = int(rng.choice(alphabet, p=uniform))
            symbols = [s]
            for t in range(1, n):
                s = int(min(np.searchsorted(cum[s], u[t], side="right"), alphabet - 1))
                symbols.append(s)
        emitter = f"e{c}{i // n_contexts % emitters_per_context}"
        seqs.append(SymbolSequence(f"s{i:05d}", emitter, CONTEXTS[c], [int(v) for v in symbols]))
    return seqs


def gen_planted_repeats(base_alphabet: int = 20, motif_len: int = 8, n_insertions: int = 60,
                        seed=0, n_seqs: int | None = None, background_len: tuple[int, int] = (10, 30),
                        motif=None) -> tuple[list[list[int]], list[int]]:
    """Random i.i.d. background with one fixed motif inserted ``n_insertions`` times.

    Each insertion goes into its own sequence at a random offset. Returns the
    sequences and the motif.
    """
    rng = _rng(seed)
    if motif is None:
        motif = [int(v) for v in rng.integers(0, base_alphabet, size=motif_len)]
    n_seqs = n_insertions if n_seqs is None else n_seqs
    if n_seqs < n_insertions:
        raise ValueError("need at least one sequence per insertion")
    out = []
    for i in range(n_seqs):
        n = int(rng.integers(background_len[0], background_len[1] + 1))
        bg = [int(v) for v in rng.integers(0, base_alphabet, size=n)]
        if i < n_insertions:
            pos = int(rng.integers(0, n + 1))
            bg = bg[:pos] + list(motif) + bg[pos:]
        out.append(bg)
    return out, list(motif)


@dataclass
class Burst:
    onset_s: float
    duration_s: float
    f0_hz: float
    f1_hz: float | None = None  # end frequency of a linear sweep
    amplitude: float = 0.5
    ramp_s: float = 0.0005


@dataclass
class TestAudioSpec:
    __test__ = False  # not a pytest class

    duration_s: float
    bursts: list[Burst] = field(default_factory=list)
    noise_db: float | None = -60.0  # white-noise RMS in dBFS; None for no noise


def gen_test_audio(spec: TestAudioSpec, sr: int = 250_000, seed=0) -> AudioClip:
    """Tone bursts (optionally swept) over a white-noise floor."""
    rng = _rng(seed)
    n = int(round(spec.duration_s * sr))
    x = np.zeros(n)
    if spec.noise_db is not None:
        x += rng.normal(0.0, 10 ** (spec.noise_db / 20), n)
    for b in spec.bursts:
        i0 = int(round(b.onset_s * sr))
        m = int(round(b.duration_s * sr))
        i1 = min(n, i0 + m)
        t = np.arange(i1 - i0) / sr
        f1 = b.f0_hz if b.f1_hz is None else b.f1_hz
        phase = 2 * np.pi * (b.f0_hz * t + 0.5 * (f1 - b.f0_hz) / b.duration_s * t ** 2)
        env = np.ones_like(t)
        r = int(round(b.ramp_s * sr))
        if r > 0 and 2 * r < len(t):
            ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(r) / r)
            env[:r] = ramp
            env[-r:] = ramp[::-1]
        x[i0:i1] += b.amplitude * env * np.sin(phase)
    return AudioClip(x, sr)


# acoustic prototypes for the end-to-end fixture: (f0, f1, duration)
SYLLABLE_TYPES = [
    (15_000, 15_000, 0.030),
    (25_000, 40_000, 0.025),
    (45_000, 20_000, 0.035),
    (8_000, 12_000, 0.040),
    (35_000, 35_000, 0.020),
    (52_000, 30_000, 0.030),
]


def sequence_audio(symbols, sr: int = 250_000, gap_s: float = 0.04, lead_s: float = 0.12,
                   noise_db: float = -60.0, seed=0, jitter: float = 0.03):
    """Render a symbol sequence with the ``SYLLABLE_TYPES`` prototypes.

    Returns the clip and the ground-truth ``(onset_s, offset_s)`` of every syllable.
    """
    rng = _rng(seed)
    bursts, truth = [], []
    t = lead_s
    for s in symbols:
        f0, f1, dur = SYLLABLE_TYPES[int(s) % len(SYLLABLE_TYPES)]
        scale = 1.0 + jitter * rng.uniform(-1, 1)
        bursts.append(Burst(t, dur, f0 * scale, f1 * scale, amplitude=0.3))
        truth.append((t, t + dur))
        t += dur + gap_s
    spec = TestAudioSpec(t - gap_s + lead_s, bursts, noise_db)
    return gen_test_audio(spec, sr, seed), truth
