"""Random-forest context classifier and the syllable-order permutation experiment."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .seq import FEATURE_IDS, build_context_model, feature_matrix


@dataclass
class ForestParams:
    n_trees: int = 300
    max_features: int = 5
    min_samples_leaf: int = 1
    max_depth: int | None = None
    bootstrap: bool = True
    n_jobs: int = 1


@dataclass
class ForestModel:
    estimator: RandomForestClassifier
    classes: list
    n_features: int
    seed: int

    def predict(self, X) -> np.ndarray:
        return self.estimator.predict(np.asarray(X, dtype=float))


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be [n_rows, n_features] with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains NaN or Inf")
    return X, y


def train_forest(X, y, params: ForestParams | None = None, seed: int = 0) -> ForestModel:
    """Bootstrap forest of Gini trees grown to purity; deterministic for a fixed seed."""
    p = params or ForestParams()
    X, y = _check_xy(X, y)
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise ValueError("need at least two classes to train a classifier")
    est = RandomForestClassifier(
        n_estimators=p.n_trees, criterion="gini", max_features=min(p.max_features, X.shape[1]),
        min_samples_leaf=p.min_samples_leaf, max_depth=p.max_depth, bootstrap=p.bootstrap,
        n_jobs=p.n_jobs, random_state=int(seed))
    est.fit(X, y)
    return ForestModel(est, classes, X.shape[1], int(seed))


def feature_importance(model: ForestModel) -> np.ndarray:
    """Normalised mean decrease in Gini impurity; all zeros (with a warning) if no split was made."""
    imp = np.asarray(model.estimator.feature_importances_, dtype=float)
    total = imp.sum()
    if total <= 0:
        warnings.warn("no tree made a split; feature importances are all zero")
        return np.zeros_like(imp)
    return imp / total


def stratified_folds(y, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin into ``k`` folds."""
    y = np.asarray(y)
    folds = np.empty(len(y), dtype=int)
    rng = np.random.default_rng(seed)
    offset = 0
    for cls in sorted(set(y.tolist())):
        idx = np.flatnonzero(y == cls)
        if len(idx) < k:
            raise ValueError(f"class {cls!r} has {len(idx)} rows, fewer than k={k}")
        idx = rng.permutation(idx)
        folds[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return folds


def confusion(y_true, y_pred, classes) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[index[t], index[p]] += 1
    return cm


def f1_from_confusion(cm) -> np.ndarray:
    """Per-class F1 = 2TP / (2TP + FP + FN); rows are true classes."""
    cm = np.asarray(cm, dtype=float)
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    den = 2 * tp + fp + fn
    return np.divide(2 * tp, den, out=np.zeros_like(tp), where=den > 0)


@dataclass
class EvalReport:
    macro_f1: float
    per_class_f1: dict
    confusion_matrix: list
    classes: list
    fold_seeds: list
    fold_f1: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def cross_validate(X, y, k: int = 5, seed: int = 0, params: ForestParams | None = None,
                   folds: np.ndarray | None = None) -> EvalReport:
    """Stratified k-fold CV; F1 is macro-averaged over the pooled out-of-fold predictions."""
    X, y = _check_xy(X, y)
    classes = sorted(set(y.tolist()))
    if folds is None:
        folds = stratified_folds(y, k, seed)
    fold_seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(k)]
    pred = np.empty(len(y), dtype=object)
    fold_f1 = []
    for f in range(k):
        test = folds == f
        model = train_forest(X[~test], y[~test], params, fold_seeds[f])
        pred[test] = model.predict(X[test])
        fold_f1.append(float(f1_from_confusion(confusion(y[test], pred[test], classes)).mean()))
    cm = confusion(y, pred, classes)
    per_class = f1_from_confusion(cm)
    return EvalReport(float(per_class.mean()), {str(c): float(v) for c, v in zip(classes, per_class)},
                      cm.tolist(), [str(c) for c in classes], fold_seeds, fold_f1)


def permute_sequences(seqs, seed: int = 0, scope: str = "within") -> list:
    """Shuffle symbol order within each sequence, or (``scope='corpus'``) pool every
    symbol and redeal them keeping sequence lengths."""
    rng = np.random.default_rng(seed)
    if scope == "within":
        return [q.with_symbols(rng.permutation(q.symbols).tolist()) for q in seqs]
    if scope == "corpus":
        pool = rng.permutation(np.concatenate([q.symbols for q in seqs])).tolist()
        out, pos = [], 0
        for q in seqs:
            out.append(q.with_symbols(pool[pos:pos + len(q)]))
            pos += len(q)
        return out
    raise ValueError(f"unknown permutation scope {scope!r}")


@dataclass
class PermutationResult:
    f1_original: float
    f1_permuted: float
    delta: float  # original - permuted
    original: EvalReport
    permuted: EvalReport
    importance_original: list
    importance_permuted: list

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature_ids"] = list(FEATURE_IDS)
        return d


def permutation_experiment(seqs, params: ForestParams | None = None, seed: int = 0, k: int = 5,
                           alpha: float = 0.5, scope: str = "within") -> PermutationResult:
    """Compare CV macro-F1 on the original sequences and on order-shuffled copies.

    The context model and all predictors are rebuilt from the shuffled corpus;
    folds and tree seeds are identical in both conditions.
    """
    seqs = list(seqs)
    y = np.array([q.context for q in seqs])
    folds = stratified_folds(y, k, seed)
    shuffle_seed, fit_seed = np.random.SeedSequence(seed).generate_state(2)

    def run(corpus):
        X = feature_matrix(corpus, build_context_model(corpus, alpha))
        report = cross_validate(X, y, k, int(fit_seed), params, folds)
        imp = feature_importance(train_forest(X, y, params, int(fit_seed)))
        return report, imp

    orig, imp_o = run(seqs)
    perm, imp_p = run(permute_sequences(seqs, int(shuffle_seed), scope))
    return PermutationResult(orig.macro_f1, perm.macro_f1, orig.macro_f1 - perm.macro_f1,
                             orig, perm, imp_o.tolist(), imp_p.tolist())
