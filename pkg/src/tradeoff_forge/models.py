"""Model families: weighted logistic regression and a weighted random forest.

Both are scikit-learn compatible estimators operating on the numeric matrix
produced by :class:`TabularEncoder`; :func:`train_logreg` and
:func:`train_forest` wrap encoder + classifier into a fitted ``Pipeline``
that consumes a :class:`~tradeoff_forge.data.Dataset` frame directly.
"""

from __future__ import annotations

import math

import numpy as np
import pandas as pd
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.pipeline import Pipeline
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .errors import DegenerateData, SchemaMismatch

OTHER = "__other__"


def _check_weights(sample_weight, n):
    if sample_weight is None:
        return np.ones(n)
    w = np.asarray(sample_weight, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError("sample_weight must have one entry per row")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("sample_weight must be finite and nonnegative")
    return w


def _check_binary_target(y):
    y = np.asarray(y)
    classes = np.unique(y)
    if not set(classes.tolist()) <= {0, 1}:
        raise ValueError("labels must be binary 0/1")
    if len(classes) < 2:
        raise DegenerateData("training data contains a single class")
    return y.astype(np.float64)


class TabularEncoder(BaseEstimator, TransformerMixin):
    """One-hot categoricals, standardized numerics, dates as day ordinals.

    Each categorical keeps its ``max_categories`` most frequent training
    values; everything else (including values unseen at fit time) lands in an
    explicit ``__other__`` column. Numeric columns that are constant on the
    training data are dropped.
    """

    def __init__(self, categorical=(), numeric=(), dates=(), max_categories=20):
        self.categorical = categorical
        self.numeric = numeric
        self.dates = dates
        self.max_categories = max_categories

    @staticmethod
    def _date_values(series):
        return pd.to_datetime(series).to_numpy("datetime64[D]").astype(np.int64).astype(np.float64)

    def _numeric_block(self, X):
        cols = []
        for name in self.numeric:
            cols.append(X[name].to_numpy(dtype=np.float64))
        for name in self.dates:
            cols.append(self._date_values(X[name]))
        return np.column_stack(cols) if cols else np.empty((len(X), 0))

    def fit(self, X, y=None):
        if not isinstance(X, pd.DataFrame):
            raise TypeError("TabularEncoder expects a DataFrame")
        self.categories_ = {}
        for name in self.categorical:
            counts = X[name].astype(str).value_counts()
            ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
            self.categories_[name] = [v for v, _ in ordered[: self.max_categories]]
        block = self._numeric_block(X)
        names = list(self.numeric) + list(self.dates)
        mean = block.mean(axis=0) if block.size else np.zeros(0)
        std = block.std(axis=0) if block.size else np.zeros(0)
        keep = std > 0
        self.numeric_kept_ = [n for n, k in zip(names, keep) if k]
        self.mean_ = mean[keep]
        self.scale_ = std[keep]
        self._numeric_mask = keep
        self.n_features_in_ = len(self.categorical) + len(names)
        return self

    def transform(self, X):
        check_is_fitted(self, "categories_")
        missing = [c for c in list(self.categorical) + list(self.numeric) + list(self.dates)
                   if c not in X.columns]
        if missing:
            raise SchemaMismatch(f"columns missing at inference: {missing}")
        parts = []
        for name in self.categorical:
            cats = self.categories_[name]
            values = X[name].astype(str).to_numpy()
            lookup = {v: i for i, v in enumerate(cats)}
            codes = np.array([lookup.get(v, len(cats)) for v in values])
            onehot = np.zeros((len(values), len(cats) + 1))
            onehot[np.arange(len(values)), codes] = 1.0
            parts.append(onehot)
        block = self._numeric_block(X)[:, self._numeric_mask]
        parts.append((block - self.mean_) / self.scale_)
        return np.hstack(parts) if parts else np.empty((len(X), 0))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "categories_")
        names = []
        for name in self.categorical:
            names += [f"{name}={v}" for v in self.categories_[name]] + [f"{name}={OTHER}"]
        return np.array(names + list(self.numeric_kept_), dtype=object)

    def to_dict(self):
        return {
            "categories": self.categories_,
            "numeric": list(self.numeric_kept_),
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
        }


class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """Binary logistic regression fit by full-batch gradient descent.

    Minimizes ``(1/n) * sum_i w_i * CE_i + (l2 / 2) * ||coef||^2``; the
    intercept is not penalized. Starts from zeros, so fitting is
    deterministic given the data and hyperparameters.
    """

    def __init__(self, learning_rate=0.1, epochs=2000, l2=1e-4):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2

    def loss_and_grad(self, params, X, y, sample_weight):
        """Weighted penalized log-loss and its gradient at ``params`` = [coef..., intercept]."""
        coef, intercept = params[:-1], params[-1]
        z = X @ coef + intercept
        n = X.shape[0]
        # log(1 + e^z) - y z, computed stably
        ce = np.logaddexp(0.0, z) - y * z
        loss = float(sample_weight @ ce) / n + 0.5 * self.l2 * float(coef @ coef)
        r = sample_weight * (expit(z) - y) / n
        grad = np.empty_like(params)
        grad[:-1] = X.T @ r + self.l2 * coef
        grad[-1] = r.sum()
        return loss, grad

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, dtype=np.float64)
        check_consistent_length(X, y)
        y = _check_binary_target(y)
        w = _check_weights(sample_weight, X.shape[0])
        params = np.zeros(X.shape[1] + 1)
        losses = []
        for _ in range(int(self.epochs)):
            loss, grad = self.loss_and_grad(params, X, y, w)
            losses.append(loss)
            params -= self.learning_rate * grad
        final, _ = self.loss_and_grad(params, X, y, w)
        losses.append(final)
        self.coef_ = params[:-1].copy()
        self.intercept_ = float(params[-1])
        self.loss_curve_ = losses
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.coef_.shape[0]:
            raise SchemaMismatch(f"expected {self.coef_.shape[0]} columns, got {X.shape[1]}")
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)

    def to_dict(self):
        return {"coefficients": self.coef_.tolist(), "intercept": self.intercept_}


class _Tree:
    """Flat-array binary tree; ``value`` holds P(label = 1) at each node."""

    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.depth = []

    def add(self, value, depth):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.depth.append(depth)
        return len(self.value) - 1

    def freeze(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)
        self.max_depth_reached = int(max(self.depth))
        del self.depth
        return self

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        for _ in range(self.max_depth_reached):
            internal = self.feature[node] >= 0
            if not internal.any():
                break
            f = self.feature[node]
            go_left = X[rows, np.where(internal, f, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)
        return node

    def predict_positive(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf": [[1.0 - v, v] for v in self.value.tolist()],
        }


def _best_split(X, y, w, rows, feats, min_leaf, binary_low):
    """Lowest weighted-Gini split over ``feats`` for the rows of one node.

    ``binary_low[f]`` is the smaller of the two values of a two-valued
    column (NaN otherwise); such columns have a single candidate threshold
    and skip the sort. Returns (impurity, feature, threshold) or None when no
    split leaves at least ``min_leaf`` rows on both sides.
    """
    m = rows.shape[0]
    wr = w[rows]
    wyr = wr * y[rows]
    W, WY = wr.sum(), wyr.sum()
    best = None
    # For 0/1 targets the weighted Gini of a child is 2 * (wy - wy^2 / w).
    tiny = 1e-300

    is_bin = ~np.isnan(binary_low[feats])
    bfeats = feats[is_bin]
    if bfeats.size:
        low = X[np.ix_(rows, bfeats)] == binary_low[bfeats]
        nl = low.sum(axis=0)
        cw = wr @ low
        cwy = wyr @ low
        rw, rwy = W - cw, WY - cwy
        score = cwy * cwy / np.maximum(cw, tiny) + rwy * rwy / np.maximum(rw, tiny)
        impurity = np.where((nl >= min_leaf) & (m - nl >= min_leaf), 2.0 * (WY - score), np.inf)
        j = int(np.argmin(impurity))
        if np.isfinite(impurity[j]):
            best = (float(impurity[j]), int(bfeats[j]), float(binary_low[bfeats[j]]))

    nfeats = feats[~is_bin]
    lo, hi = min_leaf - 1, m - min_leaf
    if nfeats.size and lo < hi:
        Xn = X[np.ix_(rows, nfeats)]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        cw = np.cumsum(wr[order], axis=0)[:-1]
        cwy = np.cumsum(wyr[order], axis=0)[:-1]
        rw, rwy = W - cw, WY - cwy
        score = cwy * cwy / np.maximum(cw, tiny) + rwy * rwy / np.maximum(rw, tiny)
        valid = xs[1:] > xs[:-1]
        valid[:lo] = False
        valid[hi:] = False
        if valid.any():
            impurity = np.where(valid, 2.0 * (WY - score), np.inf)
            i, j = divmod(int(np.argmin(impurity)), len(nfeats))
            cand = (float(impurity[i, j]), int(nfeats[j]), float((xs[i, j] + xs[i + 1, j]) / 2.0))
            if best is None or (cand[0], cand[1]) < (best[0], best[1]):
                best = cand
    return best


def _n_subsample(spec, d):
    if spec in (None, "all"):
        return d
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    if isinstance(spec, float) and 0 < spec <= 1:
        return max(1, int(round(spec * d)))
    if isinstance(spec, int) and spec >= 1:
        return min(spec, d)
    raise ValueError(f"bad feature_subsample {spec!r}")


def _binary_low(X):
    """Per column: the lower value if the column is exactly two-valued, else NaN."""
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    two = np.all((X == lo) | (X == hi), axis=0) & (hi > lo)
    return np.where(two, lo, np.nan)


def build_tree(X, y, w, rows, max_depth, min_leaf, n_sub, rng, binary_low=None) -> _Tree:
    """Grow one CART tree by weighted Gini impurity decrease."""
    tree = _Tree()
    d = X.shape[1]
    if binary_low is None:
        binary_low = _binary_low(X)
    stack = [(rows, 0, None, None)]
    while stack:
        idx, depth, parent, side = stack.pop()
        W = w[idx].sum()
        p = float((w[idx] * y[idx]).sum() / W) if W > 0 else 0.0
        node = tree.add(p, depth)
        if parent is not None:
            (tree.left if side == 0 else tree.right)[parent] = node
        if depth >= max_depth or len(idx) < 2 * min_leaf or p in (0.0, 1.0):
            continue
        feats = np.sort(rng.choice(d, size=n_sub, replace=False))
        found = _best_split(X, y, w, idx, feats, min_leaf, binary_low)
        if found is None:
            continue
        impurity, f, thr = found
        parent_impurity = W * 2 * p * (1 - p)
        if impurity >= parent_impurity - 1e-12 * max(W, 1.0):
            continue
        tree.feature[node] = f
        tree.threshold[node] = thr
        go_left = X[idx, f] <= thr
        stack.append((idx[~go_left], depth + 1, node, 1))
        stack.append((idx[go_left], depth + 1, node, 0))
    return tree.freeze()


class RandomForestGini(ClassifierMixin, BaseEstimator):
    """Bagged CART trees with weight-proportional bootstrap.

    Each tree draws ``n`` rows with probability proportional to the sample
    weights (so repeated rows carry the weight), then grows splits by Gini
    impurity decrease over a random feature subset per node. With
    ``bootstrap=False`` every tree sees all rows and uses the sample weights
    directly. Tree ``t`` uses an RNG stream seeded by (random_state, t), so
    results do not depend on build order.
    """

    def __init__(self, n_trees=200, max_depth=8, min_leaf=5, feature_subsample="sqrt",
                 bootstrap=True, random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_subsample = feature_subsample
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, dtype=np.float64)
        check_consistent_length(X, y)
        y = _check_binary_target(y)
        w = _check_weights(sample_weight, X.shape[0])
        if self.n_trees < 1:
            raise ValueError("n_trees must be ≥ 1")
        n, d = X.shape
        n_sub = _n_subsample(self.feature_subsample, d)
        binary_low = _binary_low(X)
        self.trees_ = []
        for t in range(int(self.n_trees)):
            rng = np.random.default_rng(np.random.SeedSequence([int(self.random_state), t]))
            if self.bootstrap:
                rows = np.sort(rng.choice(n, size=n, replace=True, p=w / w.sum()))
                tw = np.ones(n)
            else:
                rows = np.arange(n)
                tw = w
            self.trees_.append(
                build_tree(X, y, tw, rows, self.max_depth, self.min_leaf, n_sub, rng, binary_low))
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = d
        return self

    def tree_probabilities(self, X):
        check_is_fitted(self, "trees_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatch(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return np.array([t.predict_positive(X) for t in self.trees_])

    def predict_proba(self, X):
        p = self.tree_probabilities(X).mean(axis=0)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)

    def to_dict(self):
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "feature_subsample": self.feature_subsample,
            "seed": self.random_state,
            "trees": [t.to_dict() for t in self.trees_],
        }


# --------------------------------------------------------------------------
# Dataset-level wrappers

def encoder_for(dataset, max_categories=20) -> TabularEncoder:
    feats = dataset.visible_features
    return TabularEncoder(
        categorical=tuple(f.name for f in feats if f.kind == "categorical"),
        numeric=tuple(f.name for f in feats if f.kind == "numeric"),
        dates=tuple(f.name for f in feats if f.kind == "date"),
        max_categories=max_categories,
    )


def _fit_pipeline(clf, train, weights, max_categories):
    pipe = Pipeline([("encode", encoder_for(train, max_categories)), ("clf", clf)])
    pipe.fit(train.frame, train.labels, clf__sample_weight=weights)
    return pipe


def train_logreg(train, weights=None, hyper=None, max_categories=20) -> Pipeline:
    hyper = dict(hyper or {})
    clf = LogisticRegressionGD(
        learning_rate=hyper.get("learning_rate", 0.1),
        epochs=hyper.get("epochs", 2000),
        l2=hyper.get("l2", 1e-4),
    )
    return _fit_pipeline(clf, train, weights, max_categories)


def train_forest(train, weights=None, hyper=None, max_categories=20) -> Pipeline:
    hyper = dict(hyper or {})
    clf = RandomForestGini(
        n_trees=hyper.get("n_trees", 200),
        max_depth=hyper.get("max_depth", 8),
        min_leaf=hyper.get("min_leaf", 5),
        feature_subsample=hyper.get("feature_subsample", "sqrt"),
        bootstrap=hyper.get("bootstrap", True),
        random_state=hyper.get("seed", 0),
    )
    return _fit_pipeline(clf, train, weights, max_categories)


def train_model(family, train, weights=None, hyper=None, max_categories=20) -> Pipeline:
    if family == "logreg":
        return train_logreg(train, weights, hyper, max_categories)
    if family == "forest":
        return train_forest(train, weights, hyper, max_categories)
    raise ValueError(f"unknown model family {family!r}")


def predict_proba(model, rows) -> np.ndarray:
    """P(label = 1) for each row of a Dataset (or DataFrame)."""
    frame = rows.frame if hasattr(rows, "frame") else rows
    return model.predict_proba(frame)[:, 1]


def model_to_dict(model: Pipeline) -> dict:
    clf = model.named_steps["clf"]
    family = "logreg" if isinstance(clf, LogisticRegressionGD) else "forest"
    return {"family": family, "encoding": model.named_steps["encode"].to_dict(), **clf.to_dict()}
