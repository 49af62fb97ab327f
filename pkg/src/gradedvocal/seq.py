"""Symbolic syllable sequences, context n-gram models and sequence predictors.

The 18 predictors (ids ``a`` to ``r``) summarise a sequence by its richness,
entropy and how probable its unigrams, bigrams and 2-step chains are under the
context-level and corpus-level models. Product-form predictors are returned as
base-2 log values.
"""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, fields

import numpy as np

from .stats import shannon_entropy

CONTEXTS = ("MatingProtest", "Fighting", "ThreatLike", "Biting",
            "Feeding", "Grooming", "Kissing", "Isolation")
EXCLUDED_CONTEXTS = ("Generic", "Sleeping", "Unknown")
CONFLICT_CONTEXTS = ("MatingProtest", "Fighting", "ThreatLike")
COOPERATIVE_CONTEXTS = ("Feeding", "Grooming", "Kissing")
GLOBAL = "__global__"


def canonical_context(name: str) -> str:
    """Map spellings such as ``"Mating Protest"`` or ``"threat-like"`` to the canonical id."""
    key = "".join(ch for ch in str(name).lower() if ch.isalnum())
    for c in CONTEXTS + EXCLUDED_CONTEXTS:
        if c.lower() == key:
            return c
    if key in ("motherpup", "isolationcall"):
        return "Isolation"
    raise ValueError(f"unknown behavioural context {name!r}")


@dataclass
class SymbolSequence:
    seq_id: str
    emitter_id: str
    context: str
    symbols: list[int]

    def __post_init__(self):
        if len(self.symbols) == 0:
            raise ValueError(f"sequence {self.seq_id!r} is empty")
        if self.context not in CONTEXTS:
            raise ValueError(f"sequence {self.seq_id!r}: context {self.context!r} is not analysed")
        self.symbols = [int(s) for s in self.symbols]

    def __len__(self):
        return len(self.symbols)

    def with_symbols(self, symbols) -> "SymbolSequence":
        return SymbolSequence(self.seq_id, self.emitter_id, self.context, list(symbols))


def encode(labels) -> list[SymbolSequence]:
    """One sequence per recording, symbols in onset order.

    ``labels`` is a :class:`~gradedvocal.label.LabelTable` or any iterable of rows
    with ``recording_id``, ``onset_s``, ``emitter_id``, ``context`` and
    ``cluster_label`` attributes.
    """
    by_rec = defaultdict(list)
    for row in labels:
        by_rec[row.recording_id].append(row)
    out = []
    for rid in sorted(by_rec):
        rows = sorted(by_rec[rid], key=lambda r: (r.onset_s, r.syllable_id))
        contexts = {r.context for r in rows}
        if len(contexts) > 1:
            raise ValueError(f"recording {rid!r} mixes contexts {sorted(contexts)}")
        emitters = {r.emitter_id for r in rows}
        if len(emitters) > 1:
            raise ValueError(f"recording {rid!r} mixes emitters {sorted(emitters)}")
        out.append(SymbolSequence(rid, rows[0].emitter_id, rows[0].context,
                                  [r.cluster_label for r in rows]))
    return out


class NgramTable:
    """Add-alpha smoothed unigram, bigram and 2-step tables over a fixed alphabet."""

    def __init__(self, seqs, alphabet, alpha: float):
        self.alpha = float(alpha)
        self.alphabet = list(alphabet)
        self.index = {s: i for i, s in enumerate(self.alphabet)}
        V = len(self.alphabet)
        self.uni_counts = np.zeros(V)
        self.bi_counts = np.zeros((V, V))
        self.tri_counts: Counter = Counter()
        self.tri_prefix: Counter = Counter()
        for seq in seqs:
            idx = [self.index[s] for s in seq]
            np.add.at(self.uni_counts, idx, 1)
            if len(idx) > 1:
                np.add.at(self.bi_counts, (idx[:-1], idx[1:]), 1)
            for t in range(2, len(idx)):
                self.tri_counts[idx[t - 2], idx[t - 1], idx[t]] += 1
                self.tri_prefix[idx[t - 2], idx[t - 1]] += 1
        self.out_counts = self.bi_counts.sum(axis=1)
        self.n_uni = self.uni_counts.sum()
        self.n_bi = self.bi_counts.sum()

    @property
    def V(self) -> int:
        return len(self.alphabet)

    @property
    def n_transition_types(self) -> int:
        return int(np.count_nonzero(self.bi_counts))

    @staticmethod
    def _ratio(num, den):
        if den <= 0 or num <= 0:
            raise ValueError("zero probability (unseen event with alpha=0)")
        return num / den

    def _i(self, s):
        return self.index.get(s)

    def p_uni(self, s) -> float:
        i = self._i(s)
        n = 0.0 if i is None else self.uni_counts[i]
        return self._ratio(n + self.alpha, self.n_uni + self.alpha * self.V)

    def p_trans(self, a, b) -> float:
        i, j = self._i(a), self._i(b)
        n = 0.0 if i is None or j is None else self.bi_counts[i, j]
        return self._ratio(n + self.alpha, self.n_bi + self.alpha * self.V ** 2)

    def p_cond(self, b, a) -> float:
        """P(next = b | current = a)."""
        i, j = self._i(a), self._i(b)
        n = 0.0 if i is None or j is None else self.bi_counts[i, j]
        out = 0.0 if i is None else self.out_counts[i]
        return self._ratio(n + self.alpha, out + self.alpha * self.V)

    def p_step2(self, c, a, b) -> float:
        """P(next = c | previous two = a, b), i.e. P(B_i | B_{i-1}) for overlapping bigrams."""
        i, j, k = self._i(a), self._i(b), self._i(c)
        if None in (i, j, k):
            n = 0.0
            pre = 0.0 if i is None or j is None else self.tri_prefix[i, j]
        else:
            n = self.tri_counts[i, j, k]
            pre = self.tri_prefix[i, j]
        return self._ratio(n + self.alpha, pre + self.alpha * self.V)

    def unigram(self) -> np.ndarray:
        return (self.uni_counts + self.alpha) / (self.n_uni + self.alpha * self.V)

    def transition(self) -> np.ndarray:
        return (self.bi_counts + self.alpha) / (self.n_bi + self.alpha * self.V ** 2)

    def conditional(self) -> np.ndarray:
        """Row-stochastic P(next | current); rows without data are zero when alpha == 0."""
        num = self.bi_counts + self.alpha
        den = (self.out_counts + self.alpha * self.V)[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(den > 0, num / np.where(den > 0, den, 1), 0.0)
        return out


@dataclass
class ContextModel:
    alpha: float
    alphabet: list[int]
    tables: dict  # context name (or GLOBAL) -> NgramTable

    def context(self, name) -> NgramTable:
        try:
            return self.tables[name]
        except KeyError:
            raise KeyError(f"context {name!r} is not covered by the model") from None

    @property
    def global_table(self) -> NgramTable:
        return self.tables[GLOBAL]


def build_context_model(seqs, alpha: float = 0.5) -> ContextModel:
    seqs = list(seqs)
    if not seqs:
        raise ValueError("cannot build a context model from an empty corpus")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    alphabet = sorted({s for q in seqs for s in q.symbols})
    by_ctx = defaultdict(list)
    for q in seqs:
        by_ctx[q.context].append(q.symbols)
    tables = {c: NgramTable(v, alphabet, alpha) for c, v in sorted(by_ctx.items())}
    tables[GLOBAL] = NgramTable([q.symbols for q in seqs], alphabet, alpha)
    return ContextModel(alpha, alphabet, tables)


@dataclass
class FeatureVector:
    a: float  # distinct syllable types
    b: float  # sequence length
    c: float  # bigram tokens
    d: float  # a / c
    e: float  # distinct transition types in the context corpus
    f: float  # unigram entropy of the sequence (bits)
    g: float  # log2 prod p_ctx(s_i)
    h: float  # log2 prod p_trans,ctx(B_i)
    i: float  # a / b
    j: float  # entropy of the sequence's bigram distribution (bits)
    k: float  # log2 prod p_cond,global(s_i+1 | s_i)
    l: float  # mean p_cond log2 p_cond (context)
    m: float  # mean p_trans log2 p_trans (global)
    n: float  # log2 prod_i p_cond,ctx(s_i), first symbol via unigram
    o: float  # log2 prod p_cond,ctx over bigrams
    p: float  # log2 prod p_trans,global(B_i)
    q: float  # log2 prod p(B_i | B_i-1), context 2-step table
    r: float  # perplexity, 2 ** (-mean log2 p_cond,i)

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    def as_dict(self) -> dict:
        return asdict(self)


FEATURE_IDS = tuple(f.name for f in fields(FeatureVector))


def _entropy_of_counts(counts) -> float:
    counts = np.asarray(list(counts), dtype=float)
    if counts.size == 0:
        return 0.0
    return shannon_entropy(counts / counts.sum())


def features(seq: SymbolSequence, model: ContextModel) -> FeatureVector:
    s = seq.symbols
    ctx = model.context(seq.context)
    glob = model.global_table
    N = len(s)
    bigrams = list(zip(s[:-1], s[1:]))
    uni = sorted(Counter(s).items())  # symbol order makes f, g exactly permutation-invariant
    a = len(uni)
    c = len(bigrams)

    p_cond_chain = [ctx.p_uni(s[0])] + [ctx.p_cond(y, x) for x, y in bigrams]
    log_cond_chain = np.log2(p_cond_chain)
    p_trans_glob = np.array([glob.p_trans(x, y) for x, y in bigrams])
    step2 = [ctx.p_step2(s[t], s[t - 2], s[t - 1]) for t in range(2, N)]

    return FeatureVector(
        a=float(a),
        b=float(N),
        c=float(c),
        d=a / max(c, 1),
        e=float(ctx.n_transition_types),
        f=_entropy_of_counts(n for _, n in uni),
        g=float(sum(n * np.log2(ctx.p_uni(x)) for x, n in uni)),
        h=float(sum(np.log2(ctx.p_trans(x, y)) for x, y in bigrams)),
        i=a / N,
        j=_entropy_of_counts(Counter(bigrams).values()),
        k=float(sum(np.log2(glob.p_cond(y, x)) for x, y in bigrams)),
        l=float(np.mean(np.asarray(p_cond_chain) * log_cond_chain)),
        m=float(np.mean(p_trans_glob * np.log2(p_trans_glob))) if c else 0.0,
        n=float(log_cond_chain.sum()),
        o=float(log_cond_chain[1:].sum()),
        p=float(np.log2(p_trans_glob).sum()) if c else 0.0,
        q=float(np.log2(step2).sum()) if step2 else 0.0,
        r=float(2.0 ** (-log_cond_chain.mean())),
    )


def feature_matrix(seqs, model: ContextModel) -> np.ndarray:
    seqs = list(seqs)
    if not seqs:
        return np.empty((0, len(FEATURE_IDS)))
    return np.vstack([features(q, model).to_array() for q in seqs])


@dataclass
class FrequencyTable:
    contexts: list[str]
    alphabet: list[int]
    counts: np.ndarray  # [n_contexts, n_symbols]

    @property
    def freqs(self) -> np.ndarray:
        tot = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, tot, out=np.zeros_like(self.counts), where=tot > 0)

    def row(self, context) -> dict:
        i = self.contexts.index(context)
        return {s: int(n) for s, n in zip(self.alphabet, self.counts[i]) if n}


def syllable_frequency_table(groups) -> FrequencyTable:
    """Per-context syllable counts over the union alphabet.

    ``groups`` maps a context name to its sequences (``SymbolSequence`` or plain lists).
    """
    groups = {k: [getattr(q, "symbols", q) for q in v] for k, v in groups.items()}
    if not groups or any(len(v) == 0 for v in groups.values()):
        raise ValueError("every context group needs at least one sequence")
    contexts = sorted(groups)
    alphabet = sorted({s for v in groups.values() for q in v for s in q})
    index = {s: i for i, s in enumerate(alphabet)}
    counts = np.zeros((len(contexts), len(alphabet)))
    for ci, ctx in enumerate(contexts):
        for q in groups[ctx]:
            for s in q:
                counts[ci, index[s]] += 1
    return FrequencyTable(contexts, alphabet, counts)


def group_by_context(seqs) -> dict:
    out = defaultdict(list)
    for q in seqs:
        out[q.context].append(q)
    return dict(sorted(out.items()))


def write_jsonl(path, seqs):
    with open(path, "w") as fh:
        for q in seqs:
            fh.write(json.dumps({"seq_id": q.seq_id, "emitter_id": q.emitter_id,
                                 "context": q.context, "symbols": list(q.symbols)}) + "\n")


def read_jsonl(path) -> list[SymbolSequence]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                out.append(SymbolSequence(d["seq_id"], d["emitter_id"], d["context"], d["symbols"]))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_feature_csv(path, seqs, X):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seq_id", "emitter_id", "context", *FEATURE_IDS])
        for q, row in zip(seqs, X):
            w.writerow([q.seq_id, q.emitter_id, q.context, *(repr(float(v)) for v in row)])


def read_feature_csv(path):
    """Returns ``(meta rows, X)`` where meta rows are ``(seq_id, emitter_id, context)``."""
    meta, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(FEATURE_IDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing feature columns {sorted(missing)}")
        for r in reader:
            meta.append((r["seq_id"], r["emitter_id"], r["context"]))
            rows.append([float(r[k]) for k in FEATURE_IDS])
    return meta, np.array(rows).reshape(-1, len(FEATURE_IDS))
