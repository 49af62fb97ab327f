"""Unsupervised syllable labels from acoustic similarity, and partition metrics."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numba
import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

LABEL_HEADER = ["syllable_id", "recording_id", "onset_s", "offset_s",
                "emitter_id", "context", "cluster_label"]


@dataclass
class DistanceMatrix:
    values: np.ndarray
    item_ids: list

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("distance matrix must be square")
        if len(self.item_ids) != v.shape[0]:
            raise ValueError("item_ids length does not match the matrix")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("distances must be finite and non-negative")
        if np.any(np.diag(v) != 0) or not np.array_equal(v, v.T):
            raise ValueError("distance matrix must be symmetric with a zero diagonal")
        self.values = v

    def __len__(self):
        return len(self.item_ids)

    def save(self, path):
        """Row-major little-endian float64 at ``path`` plus ``path + '.ids'``."""
        self.values.astype("<f8").tofile(path)
        with open(f"{path}.ids", "w") as fh:
            fh.writelines(f"{i}\n" for i in self.item_ids)

    @classmethod
    def load(cls, path) -> "DistanceMatrix":
        with open(f"{path}.ids") as fh:
            ids = [line.rstrip("\n") for line in fh if line.strip()]
        v = np.fromfile(path, dtype="<f8")
        n = len(ids)
        if v.size != n * n:
            raise ValueError(f"{path}: expected {n * n} values, found {v.size}")
        return cls(v.reshape(n, n), ids)


@dataclass
class LabelRow:
    syllable_id: str
    recording_id: str
    onset_s: float
    offset_s: float
    emitter_id: str
    context: str
    cluster_label: int


class LabelTable(list):
    """List of :class:`LabelRow` with unique syllable ids and non-negative labels."""

    def validate(self) -> "LabelTable":
        ids = Counter(r.syllable_id for r in self)
        dup = [k for k, c in ids.items() if c > 1]
        if dup:
            raise ValueError(f"duplicate syllable ids: {dup[:5]}")
        bad = [r.syllable_id for r in self if r.cluster_label < 0]
        if bad:
            raise ValueError(f"negative cluster labels for {bad[:5]}")
        return self


def write_labels(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_HEADER)
        for r in table:
            w.writerow([r.syllable_id, r.recording_id, repr(float(r.onset_s)), repr(float(r.offset_s)),
                        r.emitter_id, r.context, int(r.cluster_label)])


def read_labels(path) -> LabelTable:
    out = LabelTable()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(LABEL_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, r in enumerate(reader, 2):
            try:
                out.append(LabelRow(r["syllable_id"], r["recording_id"], float(r["onset_s"]),
                                    float(r["offset_s"]), r["emitter_id"], r["context"],
                                    int(r["cluster_label"])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out.validate()


# --- dynamic time warping -------------------------------------------------

@numba.njit(cache=True)
def _dtw(a, b, band):
    # a: [n_coeffs, n], b: [n_coeffs, m]
    n = a.shape[1]
    m = b.shape[1]
    inf = np.inf
    D = np.full((n + 1, m + 1), inf)
    D[0, 0] = 0.0
    w = max(band, abs(n - m)) if band >= 0 else max(n, m)
    for i in range(1, n + 1):
        lo = max(1, i - w)
        hi = min(m, i + w)
        for j in range(lo, hi + 1):
            c = 0.0
            for k in range(a.shape[0]):
                d = a[k, i - 1] - b[k, j - 1]
                c += d * d
            c = np.sqrt(c)
            best = D[i - 1, j - 1]
            if D[i - 1, j] < best:
                best = D[i - 1, j]
            if D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = c + best
    return D[n, m]


def _as_frames(x) -> np.ndarray:
    x = getattr(x, "coeffs", x)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    return np.ascontiguousarray(x)


def dtw_distance(a, b, band: int | None = None) -> float:
    """Minimal cumulative Euclidean frame cost over match/insert/delete alignments.

    ``a`` and ``b`` are ``[n_coeffs, n_frames]`` matrices (or 1-D series).
    ``band`` is the Sakoe-Chiba half-width; it is widened to the length
    difference so that an alignment always exists.
    """
    A, B = _as_frames(a), _as_frames(b)
    if A.shape[1] == 0 or B.shape[1] == 0:
        raise ValueError("DTW inputs must be non-empty")
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"coefficient count mismatch: {A.shape[0]} vs {B.shape[0]}")
    return float(_dtw(A, B, -1 if band is None else int(band)))


@numba.njit(cache=True)
def _pairwise(flat, offsets, pairs_i, pairs_j, band):
    out = np.empty(len(pairs_i))
    for p in range(len(pairs_i)):
        i, j = pairs_i[p], pairs_j[p]
        out[p] = _dtw(flat[:, offsets[i]:offsets[i + 1]], flat[:, offsets[j]:offsets[j + 1]], band)
    return out


def pairwise_dtw(items, band: int | None = None, item_ids=None, n_jobs: int = 1) -> DistanceMatrix:
    """Symmetric DTW distance matrix; pairs may be split across ``n_jobs`` processes."""
    mats = [_as_frames(x) for x in items]
    n = len(mats)
    if n < 2:
        raise ValueError("pairwise_dtw needs at least two items")
    for idx, m in enumerate(mats):
        if m.shape[1] == 0:
            raise ValueError(f"item {idx}: DTW inputs must be non-empty")
        if m.shape[0] != mats[0].shape[0]:
            raise ValueError(f"item {idx}: coefficient count mismatch "
                             f"({m.shape[0]} vs {mats[0].shape[0]})")
    flat = np.ascontiguousarray(np.concatenate(mats, axis=1))
    offsets = np.concatenate([[0], np.cumsum([m.shape[1] for m in mats])]).astype(np.int64)
    iu, ju = np.triu_indices(n, k=1)
    b = -1 if band is None else int(band)
    if n_jobs == 1:
        vals = _pairwise(flat, offsets, iu, ju, b)
    else:
        from joblib import Parallel, delayed
        chunks = np.array_split(np.arange(len(iu)), max(1, n_jobs * 4))
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_pairwise)(flat, offsets, iu[c], ju[c], b) for c in chunks)
        vals = np.concatenate(parts)
    D = np.zeros((n, n))
    D[iu, ju] = vals
    D[ju, iu] = vals
    return DistanceMatrix(D, list(item_ids) if item_ids is not None else list(range(n)))


# --- clustering -----------------------------------------------------------

def dense_labels(raw) -> np.ndarray:
    """Relabel to 0..k-1 in order of first appearance."""
    mapping = {}
    return np.array([mapping.setdefault(v, len(mapping)) for v in raw], dtype=int)


def agglomerative_cluster(d: DistanceMatrix, q: float = 0.05, method: str = "average") -> np.ndarray:
    """Hierarchical clustering cut at the ``q``-quantile of the off-diagonal distances.

    Merges at heights <= the threshold are kept.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    D = d.values if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=float)
    n = D.shape[0]
    if n == 1:
        return np.zeros(1, dtype=int)
    condensed = squareform(D, checks=False)
    threshold = float(np.quantile(condensed, q))
    if not np.any(condensed > 0):
        return np.zeros(n, dtype=int)
    Z = linkage(condensed, method=method)
    return dense_labels(fcluster(Z, t=threshold, criterion="distance"))


def pca(X, k: int):
    """Returns ``(projection [n, k], components [k, d], explained_variance [k])``.

    Components are ordered by decreasing variance and signed so that the
    largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=float)
    n, dim = X.shape
    if not 1 <= k <= min(n, dim):
        raise ValueError(f"k must lie in [1, {min(n, dim)}], got {k}")
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    comps = Vt[:k]
    signs = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    signs[signs == 0] = 1.0
    comps = comps * signs[:, None]
    var = s[:k] ** 2 / max(n - 1, 1)
    return Xc @ comps.T, comps, var


def pca_project(X, k: int) -> np.ndarray:
    return pca(X, k)[0]


# --- partition metrics ----------------------------------------------------

def silhouette(d, labels) -> float:
    """Mean silhouette from precomputed distances; singletons score 0."""
    D = d.values if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=float)
    labels = np.asarray(labels)
    if len(labels) != D.shape[0]:
        raise ValueError("labels length does not match the distance matrix")
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValueError("silhouette is undefined for a single cluster")
    masks = [labels == u for u in uniq]
    sums = np.stack([D[:, m].sum(axis=1) for m in masks], axis=1)
    sizes = np.array([m.sum() for m in masks], dtype=float)
    own = np.searchsorted(uniq, labels)
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(len(labels)), own] / np.maximum(own_size - 1, 1), 0.0)
    means = sums / sizes
    means[np.arange(len(labels)), own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_size > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1), 0.0)
    return float(s.mean())


def contingency(labels_a, labels_b) -> np.ndarray:
    a, b = np.asarray(labels_a), np.asarray(labels_b)
    if len(a) != len(b):
        raise ValueError(f"label length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise ValueError("need at least two items")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2.0


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index (pair counting, chance corrected)."""
    table = contingency(labels_a, labels_b)
    n = table.sum()
    sum_ij = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def _entropy_nats(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(labels_a, labels_b) -> float:
    """Mutual information normalised by the arithmetic mean of the two entropies."""
    table = contingency(labels_a, labels_b).astype(float)
    n = table.sum()
    ha = _entropy_nats(table.sum(axis=1))
    hb = _entropy_nats(table.sum(axis=0))
    if ha == 0 and hb == 0:
        return 1.0
    pij = table / n
    pa = pij.sum(axis=1, keepdims=True)
    pb = pij.sum(axis=0, keepdims=True)
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / (pa @ pb)[nz])).sum())
    return float(min(1.0, max(0.0, mi / ((ha + hb) / 2))))
