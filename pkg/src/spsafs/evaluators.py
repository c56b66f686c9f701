"""Cross-validated loss measurements for candidate feature subsets.

A loss evaluator maps ``(mask, noise_seed)`` to a real loss. The noise seed
picks the fold partition, so repeated calls with one seed are deterministic
and different seeds give different noisy measurements of the same subset.
Classification loss is the mean misclassification rate over folds;
regression loss is ``1 - R^2`` of the pooled out-of-fold predictions and may
exceed 1 when the model predicts worse than the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import derive_seed, make_rng
from .types import CLASSIFICATION, REGRESSION, Dataset, FeatureMask

VARIANCE_FLOOR = 1e-9
RIDGE_JITTER = 1e-8
MODEL_KINDS = ("knn", "gnb", "cart", "ols")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "knn"
    k: int = 5
    max_depth: int = 5
    min_leaf: int = 1

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"model kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.k < 1:
            raise ValueError("knn needs k >= 1")
        if self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("cart needs max_depth >= 1 and min_leaf >= 1")

    @property
    def task_kind(self) -> str:
        return REGRESSION if self.kind == "ols" else CLASSIFICATION

    def label(self) -> str:
        if self.kind == "knn":
            return f"knn{self.k}"
        if self.kind == "cart":
            return f"cart{self.max_depth}"
        return self.kind


@dataclass(frozen=True)
class CvConfig:
    folds: int = 5
    stratified: bool = True
    shuffle_seed_base: int = 0

    def __post_init__(self):
        if self.folds < 1:
            raise ValueError("folds must be >= 1 (1 = training-fit diagnostic)")


def fold_ids(n: int, folds: int, seed: int, y=None) -> np.ndarray:
    """Assign each of ``n`` rows to one of ``folds`` validation folds.

    With labels ``y`` the assignment is stratified: each class is shuffled
    and dealt round-robin, continuing the deal across classes, so every
    fold's class counts differ by at most one.
    """
    if folds > n:
        raise ValueError(f"{folds} folds requested for only {n} observations")
    rng = make_rng(seed)
    ids = np.empty(n, dtype=np.int64)
    if y is None:
        perm = rng.permutation(n)
        ids[perm] = np.arange(n) % folds
        return ids
    y = np.asarray(y)
    offset = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(len(members))]
        ids[members] = (offset + np.arange(len(members))) % folds
        offset += len(members)
    return ids


def _standardize(train, test):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return (train - mu) / sd, (test - mu) / sd


def fit_predict_knn(x_train, y_train, x_test, k: int) -> np.ndarray:
    """Majority vote among the ``k`` nearest training rows (Euclidean).

    Equal distances favour the lower training index; tied votes favour the
    smaller label code.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    x_test = np.asarray(x_test, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    n_train = len(y_train)
    if n_train == 0:
        raise ValueError("knn needs a non-empty training set")
    if k > n_train:
        raise ValueError(f"k={k} exceeds training size {n_train}")
    diff = x_test[:, None, :] - x_train[None, :, :]
    dist = np.einsum("ijk,ijk->ij", diff, diff)
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1 : k]
    # strictly closer rows, then rows tied at the k-th distance by ascending index
    closer = dist < kth
    tied = dist == kth
    room = k - closer.sum(axis=1, keepdims=True)
    chosen = closer | (tied & (np.cumsum(tied, axis=1) <= room))
    onehot = np.eye(int(y_train.max()) + 1, dtype=np.int64)[y_train]
    return (chosen.astype(np.int64) @ onehot).argmax(axis=1)


def fit_predict_gnb(x_train, y_train, x_test) -> np.ndarray:
    x_train = np.asarray(x_train, dtype=np.float64)
    x_test = np.asarray(x_test, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    classes = np.unique(y_train)
    scores = np.empty((len(x_test), len(classes)))
    for i, cls in enumerate(classes):
        xc = x_train[y_train == cls]
        mu = xc.mean(axis=0)
        var = np.maximum(xc.var(axis=0), VARIANCE_FLOOR)
        loglik = -0.5 * (np.log(2 * np.pi * var) + (x_test - mu) ** 2 / var).sum(axis=1)
        scores[:, i] = loglik + np.log(len(xc) / len(y_train))
    return classes[scores.argmax(axis=1)]


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "label")

    def __init__(self, label, feature=-1, threshold=0.0, left=None, right=None):
        self.label = label
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right


def _gini_split(x, y, n_classes, min_leaf):
    """Best (gain, feature, threshold) over all axis-aligned midpoint splits.

    Zero-gain splits are allowed (needed to break XOR-type ties); the
    caller decides whether to split at all.
    """
    n = len(y)
    onehot = np.eye(n_classes, dtype=np.float64)[y]
    total = onehot.sum(axis=0)
    parent = 1.0 - (total**2).sum() / (n * n)
    best = (-np.inf, -1, 0.0)
    n_left = np.arange(1, n)
    valid_size = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        valid = valid_size & (xs[1:] > xs[:-1])
        if not valid.any():
            continue
        nl = n_left.astype(np.float64)
        nr = n - nl
        weighted = (nl - (left**2).sum(axis=1) / nl + nr - (right**2).sum(axis=1) / nr) / n
        gain = np.where(valid, parent - weighted, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best[0]:
            best = (float(gain[i]), j, 0.5 * (xs[i] + xs[i + 1]))
    return best


def _grow(x, y, n_classes, depth, max_depth, min_leaf):
    counts = np.bincount(y, minlength=n_classes)
    node = _Node(int(counts.argmax()))
    if depth >= max_depth or np.count_nonzero(counts) <= 1 or len(y) < 2 * min_leaf:
        return node
    gain, feature, threshold = _gini_split(x, y, n_classes, min_leaf)
    if feature < 0:
        return node
    go_left = x[:, feature] <= threshold
    node.feature, node.threshold = feature, threshold
    node.left = _grow(x[go_left], y[go_left], n_classes, depth + 1, max_depth, min_leaf)
    node.right = _grow(x[~go_left], y[~go_left], n_classes, depth + 1, max_depth, min_leaf)
    return node


def _route(node, x, out, rows):
    if node.feature < 0:
        out[rows] = node.label
        return
    left = x[rows, node.feature] <= node.threshold
    _route(node.left, x, out, rows[left])
    _route(node.right, x, out, rows[~left])


def fit_cart(x_train, y_train, max_depth: int, min_leaf: int = 1) -> _Node:
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    y_train = np.asarray(y_train, dtype=np.int64)
    return _grow(np.asarray(x_train, dtype=np.float64), y_train, int(y_train.max()) + 1, 0, max_depth, min_leaf)


def tree_depth(node: _Node) -> int:
    if node.feature < 0:
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def fit_predict_cart(x_train, y_train, x_test, max_depth: int, min_leaf: int = 1) -> np.ndarray:
    """Gini CART; equal gains favour the lower feature, then the lower threshold."""
    root = fit_cart(x_train, y_train, max_depth, min_leaf)
    x_test = np.asarray(x_test, dtype=np.float64)
    out = np.empty(len(x_test), dtype=np.int64)
    _route(root, x_test, out, np.arange(len(x_test)))
    return out


def fit_predict_ols(x_train, y_train, x_test) -> np.ndarray:
    """Least squares with intercept via the normal equations.

    A ridge jitter of 1e-8 is added when the (standardized) Gram matrix is
    numerically singular, e.g. with duplicated columns.
    """
    x_train, x_test = _standardize(np.asarray(x_train, dtype=np.float64), np.asarray(x_test, dtype=np.float64))
    a = np.column_stack([np.ones(len(x_train)), x_train])
    gram = a.T @ a
    if np.linalg.cond(gram) > 1e10:
        gram = gram + RIDGE_JITTER * np.eye(gram.shape[0])
    beta = np.linalg.solve(gram, a.T @ np.asarray(y_train, dtype=np.float64))
    return np.column_stack([np.ones(len(x_test)), x_test]) @ beta


def r_squared(actual, predicted) -> float:
    actual = np.asarray(actual, dtype=np.float64)
    ss_tot = float(((actual - actual.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 0.0
    ss_res = float(((actual - np.asarray(predicted, dtype=np.float64)) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def _fit_predict(model: ModelSpec, x_train, y_train, x_test):
    if model.kind == "knn":
        x_train, x_test = _standardize(x_train, x_test)
        return fit_predict_knn(x_train, y_train, x_test, min(model.k, len(y_train)))
    if model.kind == "gnb":
        return fit_predict_gnb(x_train, y_train, x_test)
    if model.kind == "cart":
        return fit_predict_cart(x_train, y_train, x_test, model.max_depth, model.min_leaf)
    return fit_predict_ols(x_train, y_train, x_test)


def cv_loss(dataset: Dataset, mask: FeatureMask, model: ModelSpec, cv: CvConfig, noise_seed: int) -> float:
    """Cross-validated loss of ``model`` restricted to the features in ``mask``."""
    if mask.is_empty:
        raise ValueError("cv_loss needs a non-empty feature mask")
    if model.task_kind != dataset.task_kind:
        raise ValueError(f"model {model.kind!r} cannot fit a {dataset.task_kind} dataset")
    x = dataset.columns(mask)
    y = dataset.y
    if cv.folds == 1:
        pred = _fit_predict(model, x, y, x)
        if dataset.is_classification:
            return float(np.mean(pred != y))
        return 1.0 - r_squared(y, pred)

    seed = derive_seed(cv.shuffle_seed_base, "folds", noise_seed)
    strat = y if (dataset.is_classification and cv.stratified) else None
    ids = fold_ids(dataset.n, cv.folds, seed, strat)
    if dataset.is_classification:
        rates = []
        for f in range(cv.folds):
            test = ids == f
            pred = _fit_predict(model, x[~test], y[~test], x[test])
            rates.append(np.mean(pred != y[test]))
        return float(np.mean(rates))
    pooled = np.empty(dataset.n)
    for f in range(cv.folds):
        test = ids == f
        pooled[test] = _fit_predict(model, x[~test], y[~test], x[test])
    return 1.0 - r_squared(y, pooled)


class CvEvaluator:
    """Loss evaluator backed by :func:`cv_loss`; counts its invocations."""

    def __init__(self, dataset: Dataset, model: ModelSpec | None = None, cv: CvConfig | None = None):
        self.dataset = dataset
        self.model = model or (ModelSpec("ols") if dataset.task_kind == REGRESSION else ModelSpec())
        self.cv = cv or CvConfig()
        if self.model.task_kind != dataset.task_kind:
            raise ValueError(f"model {self.model.kind!r} cannot fit a {dataset.task_kind} dataset")
        self.calls = 0

    @property
    def p(self) -> int:
        return self.dataset.p

    def evaluate(self, mask: FeatureMask, noise_seed: int) -> float:
        self.calls += 1
        return cv_loss(self.dataset, mask, self.model, self.cv, noise_seed)

    __call__ = evaluate
