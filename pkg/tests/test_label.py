import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradedvocal import label
from gradedvocal.label import DistanceMatrix
from oracles import ari_pairs, dtw_exhaustive, nmi_def, silhouette_def

series = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6)


# --- DTW ------------------------------------------------------------------------

def test_dtw_examples():
    assert label.dtw_distance([1, 2, 3], [1, 3]) == 1.0
    x = np.random.default_rng(0).normal(size=(13, 7))
    assert label.dtw_distance(x, x) == 0.0


@settings(max_examples=60, deadline=None)
@given(series, series)
def test_dtw_matches_exhaustive_and_is_symmetric(a, b):
    d = label.dtw_distance(a, b)
    assert d == pytest.approx(dtw_exhaustive(a, b), abs=1e-9)
    assert d == label.dtw_distance(b, a)


@settings(max_examples=30, deadline=None)
@given(series, series, st.integers(0, 3))
def test_dtw_band_matches_exhaustive(a, b, band):
    assert label.dtw_distance(a, b, band) == pytest.approx(dtw_exhaustive(a, b, band), abs=1e-9)


def test_dtw_errors():
    with pytest.raises(ValueError, match="non-empty"):
        label.dtw_distance(np.zeros((3, 0)), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="mismatch"):
        label.dtw_distance(np.zeros((3, 2)), np.zeros((4, 2)))


def test_pairwise_dtw_oracles():
    rng = np.random.default_rng(1)
    items = [rng.normal(size=(4, n)) for n in (3, 5, 4)]
    d = label.pairwise_dtw(items)
    for i in range(3):
        for j in range(3):
            assert d.values[i, j] == (0.0 if i == j else label.dtw_distance(items[i], items[j]))
    same = label.pairwise_dtw([items[0]] * 4)
    assert not same.values.any()
    with pytest.raises(ValueError, match="item 1"):
        label.pairwise_dtw([items[0], np.zeros((4, 0))])


def test_pairwise_dtw_workers_bit_exact():
    rng = np.random.default_rng(2)
    items = [rng.normal(size=(5, int(n))) for n in rng.integers(2, 12, size=20)]
    a = label.pairwise_dtw(items, n_jobs=1)
    b = label.pairwise_dtw(items, n_jobs=2)
    assert np.array_equal(a.values, b.values)


def test_distance_matrix_validation_and_io(tmp_path):
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[0, 1], [2, 0]]), ["a", "b"])
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[1.0, 1], [1, 0]]), ["a", "b"])
    d = DistanceMatrix(np.array([[0, 1.5], [1.5, 0]]), ["a", "b"])
    d.save(tmp_path / "d.f8")
    assert (tmp_path / "d.f8").stat().st_size == 4 * 8
    back = DistanceMatrix.load(tmp_path / "d.f8")
    assert np.array_equal(back.values, d.values) and back.item_ids == ["a", "b"]


# --- clustering ------------------------------------------------------------------

def two_blocks(n1=4, n2=5, far=10.0):
    n = n1 + n2
    D = np.full((n, n), far)
    D[:n1, :n1] = 0
    D[n1:, n1:] = 0
    return DistanceMatrix(D, list(range(n)))


def test_two_groups():
    labs = label.agglomerative_cluster(two_blocks(), q=0.05)
    assert list(labs) == [0] * 4 + [1] * 5


def test_hand_traced_average_linkage():
    # A-B merge at 1, C-D at 2, then {AB}-{CD} at mean(6, 8, 7, 9) = 7.5
    D = np.array([[0, 1, 6, 8], [1, 0, 7, 9], [6, 7, 0, 2], [8, 9, 2, 0]], float)
    d = DistanceMatrix(D, list("ABCD"))
    # off-diagonal distances 1, 2, 6, 7, 8, 9
    assert list(label.agglomerative_cluster(d, q=0.05)) == [0, 0, 1, 2]   # cut 1.25
    assert list(label.agglomerative_cluster(d, q=0.3)) == [0, 0, 1, 1]    # cut 4.0
    assert list(label.agglomerative_cluster(d, q=0.95)) == [0, 0, 0, 0]   # cut 8.75 > 7.5


def test_cluster_edge_cases():
    assert list(label.agglomerative_cluster(DistanceMatrix(np.zeros((3, 3)), [0, 1, 2]))) == [0, 0, 0]
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(12, 2))
    D = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert len(set(label.agglomerative_cluster(DistanceMatrix(D, list(range(12))), q=0.999))) == 1
    with pytest.raises(ValueError):
        label.agglomerative_cluster(DistanceMatrix(D, list(range(12))), q=1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_cluster_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(15, 3))
    D = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    perm = rng.permutation(15)
    a = label.agglomerative_cluster(DistanceMatrix(D, list(range(15))), q=0.2)
    b = label.agglomerative_cluster(DistanceMatrix(D[np.ix_(perm, perm)], list(range(15))), q=0.2)
    inverse = np.argsort(perm)
    assert label.ari(a, b[inverse]) == 1.0
    assert sorted(set(a)) == list(range(len(set(a))))


# --- PCA --------------------------------------------------------------------------

def test_pca_collinear():
    X = np.outer(np.arange(6.0), [1.0, 2.0, -1.0])
    _, comps, var = label.pca(X, 2)
    assert var[0] / var.sum() == pytest.approx(1.0)
    assert comps[0, np.argmax(np.abs(comps[0]))] > 0


def test_pca_full_rank_reconstruction():
    X = np.random.default_rng(4).normal(size=(8, 4))
    proj, comps, _ = label.pca(X, 4)
    assert np.allclose(proj @ comps, X - X.mean(axis=0), atol=1e-8)


def test_pca_matches_covariance_eigenvalues():
    X = np.random.default_rng(5).normal(size=(5, 3))
    _, _, var = label.pca(X, 3)
    eig = np.sort(np.linalg.eigvalsh(np.cov(X, rowvar=False)))[::-1]
    assert np.allclose(var, eig, atol=1e-10)


def test_pca_k_range():
    with pytest.raises(ValueError):
        label.pca_project(np.zeros((3, 2)), 3)


# --- partition metrics ---------------------------------------------------------------

def test_silhouette_examples():
    pts = np.concatenate([np.random.default_rng(6).normal(0, 0.01, (10, 2)),
                          np.random.default_rng(7).normal(100, 0.01, (10, 2))])
    D = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert label.silhouette(D, [0] * 10 + [1] * 10) >= 0.9
    with pytest.raises(ValueError, match="undefined"):
        label.silhouette(D, [0] * 20)


def test_silhouette_hand_case():
    pts = np.array([0.0, 1.0, 4.0, 5.0, 9.0])
    D = np.abs(pts[:, None] - pts[None])
    labels = [0, 0, 1, 1, 2]
    # by hand: a = [1, 1, 1, 1, -], b = [4.5, 3.5, 3.5, 4, 4.5]; singleton -> 0
    expected = np.mean([(4.5 - 1) / 4.5, (3.5 - 1) / 3.5, (3.5 - 1) / 3.5, (4 - 1) / 4, 0.0])
    assert label.silhouette(D, labels) == pytest.approx(expected, abs=1e-12)
    assert silhouette_def(D, labels) == pytest.approx(expected, abs=1e-12)


def test_silhouette_random_labels_near_zero():
    rng = np.random.default_rng(8)
    D = rng.uniform(size=(200, 200))
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0)
    assert abs(label.silhouette(D, rng.integers(0, 3, 200))) < 0.1


def test_ari_nmi_examples():
    x = [0, 0, 1, 1, 2, 2]
    y = [0, 0, 0, 1, 1, 1]
    assert label.ari(x, x) == 1.0 and label.nmi(x, x) == pytest.approx(1.0)
    assert label.ari(x, [5] * 6) == 0.0
    assert label.ari(x, y) == pytest.approx(ari_pairs(x, y), abs=1e-12)
    assert label.ari(x, y) == pytest.approx(0.24242424242424243, abs=1e-12)
    assert label.nmi(x, y) == pytest.approx(nmi_def(x, y), abs=1e-12)
    with pytest.raises(ValueError):
        label.ari([0, 1], [0, 1, 2])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), min_size=2, max_size=30))
def test_metrics_match_oracles_and_rename_invariance(pairs):
    x = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    assert label.ari(x, y) == pytest.approx(ari_pairs(x, y), abs=1e-9)
    assert label.nmi(x, y) == pytest.approx(nmi_def(x, y), abs=1e-9)
    renamed = [10 - v for v in x]
    assert label.ari(renamed, y) == pytest.approx(label.ari(x, y), abs=1e-12)
    assert label.nmi(renamed, y) == pytest.approx(label.nmi(x, y), abs=1e-12)


# --- label table ------------------------------------------------------------------------

def test_label_table_roundtrip_and_validation(tmp_path):
    rows = label.LabelTable([label.LabelRow("s1", "r1", 0.1, 0.2, "e1", "Fighting", 0),
                             label.LabelRow("s2", "r1", 0.3, 0.4, "e1", "Fighting", 3)])
    label.write_labels(tmp_path / "l.csv", rows)
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == ",".join(label.LABEL_HEADER)
    assert label.read_labels(tmp_path / "l.csv") == rows
    with pytest.raises(ValueError, match="duplicate"):
        label.LabelTable([rows[0], rows[0]]).validate()
    with pytest.raises(ValueError, match="negative"):
        label.LabelTable([label.LabelRow("s", "r", 0, 1, "e", "Fighting", -1)]).validate()
