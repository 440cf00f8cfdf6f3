"""Mondrian-style greedy multidimensional k-anonymity.

The fitted partition is a binary tree over the quasi-identifiers. Each leaf
holds at least ``k`` training rows and carries one generalized label per
quasi-identifier: an interval ``[lo, hi]`` for numeric columns, a value group
for categorical ones. ``transform`` routes any frame (train, validation or
test) through the same tree, so held-out rows are generalized with the
training partition and never refit. Out-of-range numerics fall to the nearest
side of each cut; unseen categories follow the larger child.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import FeatureDef
from .data import Dataset
from .errors import InfeasibleK, UnknownFeature


def _fmt(v):
    return np.format_float_positional(float(v), trim="-")


def group_label(values):
    values = sorted(str(v) for v in values)
    if len(values) == 1:
        return values[0]
    if len(values) <= 3:
        return "{" + "|".join(values) + "}"
    digest = hashlib.sha1("\x1f".join(values).encode("utf-8")).hexdigest()[:8]
    return f"group-{len(values)}-{digest}"


def interval_label(lo, hi):
    return _fmt(lo) if lo == hi else f"[{_fmt(lo)}, {_fmt(hi)}]"


@dataclass
class _Node:
    qi: int = -1
    numeric: bool = True
    threshold: float = 0.0
    strict: bool = False
    left_values: frozenset = frozenset()
    left: int = -1
    right: int = -1
    bigger: int = -1
    leaf: int = -1


class MondrianAnonymizer(BaseEstimator, TransformerMixin):
    """Generalize quasi-identifier columns of a DataFrame to k-anonymous groups.

    ``numeric`` names the quasi-identifiers treated as ordered numbers; all
    others are treated as categorical.
    """

    def __init__(self, quasi_identifiers=(), k=7, numeric=()):
        self.quasi_identifiers = quasi_identifiers
        self.k = k
        self.numeric = numeric

    def _columns(self, X):
        cols = []
        for name in self.quasi_identifiers:
            if name in self.numeric:
                cols.append(X[name].to_numpy(dtype=np.float64))
            else:
                cols.append(X[name].astype(str).to_numpy())
        return cols

    def fit(self, X, y=None):
        if self.k < 2:
            raise ValueError("k must be ≥ 2")
        if not self.quasi_identifiers:
            raise ValueError("quasi_identifiers must be non-empty")
        missing = [q for q in self.quasi_identifiers if q not in X.columns]
        if missing:
            raise UnknownFeature(f"unknown quasi-identifier(s): {missing}")
        n = len(X)
        if n < self.k:
            raise InfeasibleK(f"{n} rows cannot be {self.k}-anonymous")
        cols = self._columns(X)
        is_num = [q in self.numeric for q in self.quasi_identifiers]
        # categorical columns as integer codes over the sorted global domain
        codes, domains, spans = [], [], []
        for c, num in zip(cols, is_num):
            if num:
                codes.append(c)
                domains.append(None)
                spans.append(float(c.max() - c.min()))
            else:
                dom, inv = np.unique(c, return_inverse=True)
                codes.append(inv)
                domains.append(dom)
                spans.append(float(len(dom)))

        self.nodes_ = []
        self.leaf_labels_ = []
        self.leaf_sizes_ = []
        root = self._grow(np.arange(n), codes, domains, spans, is_num)
        self.root_ = root
        self.is_numeric_ = is_num
        self.domains_ = domains
        return self

    def _width(self, rows, code, dom, span, num):
        if num:
            vals = code[rows]
            return 0.0 if span == 0 else float(vals.max() - vals.min()) / span
        present = np.bincount(code[rows], minlength=len(dom)) > 0
        return float(present.sum() - 1) / max(span - 1, 1.0)

    def _try_split(self, rows, code, num):
        k = self.k
        vals = code[rows]
        if num:
            s = np.sort(vals)
            median = s[(len(s) - 1) // 2]
            for strict in (False, True):
                left = vals < median if strict else vals <= median
                nl = int(left.sum())
                if nl >= k and len(rows) - nl >= k:
                    return left, {"numeric": True, "threshold": float(median), "strict": strict}
            return None
        counts = np.bincount(vals)
        present = np.flatnonzero(counts)
        if len(present) < 2:
            return None
        cum = np.cumsum(counts[present])
        half = len(rows) / 2.0
        cut = int(np.searchsorted(cum, half))
        for c in (cut, cut - 1, cut + 1):
            if 0 <= c < len(present) - 1:
                nl = int(cum[c])
                if nl >= k and len(rows) - nl >= k:
                    left_codes = present[: c + 1]
                    return np.isin(vals, left_codes), {"numeric": False, "left_codes": left_codes}
        return None

    def _grow(self, rows, codes, domains, spans, is_num):
        node_id = len(self.nodes_)
        self.nodes_.append(_Node())
        widths = [self._width(rows, c, d, s, num) for c, d, s, num in zip(codes, domains, spans, is_num)]
        for qi in sorted(range(len(widths)), key=lambda i: (-widths[i], i)):
            if widths[qi] <= 0:
                break
            found = self._try_split(rows, codes[qi], is_num[qi])
            if found is None:
                continue
            left_mask, info = found
            node = self.nodes_[node_id]
            node.qi = qi
            node.numeric = info["numeric"]
            if node.numeric:
                node.threshold = info["threshold"]
                node.strict = info["strict"]
            else:
                node.left_values = frozenset(domains[qi][info["left_codes"]].tolist())
            lrows, rrows = rows[left_mask], rows[~left_mask]
            node.left = self._grow(lrows, codes, domains, spans, is_num)
            node.right = self._grow(rrows, codes, domains, spans, is_num)
            node.bigger = node.left if len(lrows) >= len(rrows) else node.right
            return node_id
        # no allowable cut: this partition is a leaf
        labels = []
        for c, d, num in zip(codes, domains, is_num):
            vals = c[rows]
            if num:
                labels.append(interval_label(vals.min(), vals.max()))
            else:
                labels.append(group_label(d[np.unique(vals)]))
        self.nodes_[node_id].leaf = len(self.leaf_labels_)
        self.leaf_labels_.append(labels)
        self.leaf_sizes_.append(len(rows))
        return node_id

    def apply(self, X):
        """Leaf index for every row of ``X``."""
        check_is_fitted(self, "nodes_")
        cols = self._columns(X)
        out = np.empty(len(X), dtype=np.int64)
        stack = [(self.root_, np.arange(len(X)))]
        while stack:
            nid, rows = stack.pop()
            node = self.nodes_[nid]
            if node.leaf >= 0:
                out[rows] = node.leaf
                continue
            vals = cols[node.qi][rows]
            if node.numeric:
                left = vals < node.threshold if node.strict else vals <= node.threshold
            else:
                left = np.isin(vals, list(node.left_values))
                known = np.isin(vals, self.domains_[node.qi])
                if node.bigger == node.left:
                    left |= ~known
            stack.append((node.left, rows[left]))
            stack.append((node.right, rows[~left]))
        return out

    def transform(self, X):
        leaves = self.apply(X)
        out = X.copy()
        labels = np.asarray(self.leaf_labels_, dtype=object)
        for j, name in enumerate(self.quasi_identifiers):
            out[name] = labels[leaves, j]
        return out

    def to_dict(self):
        check_is_fitted(self, "nodes_")
        return {
            "k": self.k,
            "quasi_identifiers": list(self.quasi_identifiers),
            "numeric": [q for q in self.quasi_identifiers if q in self.numeric],
            "partitions": [
                {"size": size, "labels": dict(zip(self.quasi_identifiers, labels))}
                for size, labels in zip(self.leaf_sizes_, self.leaf_labels_)
            ],
        }


def verify_k_anonymity(dataset, quasi_identifiers) -> int:
    """Smallest equivalence-class size over the quasi-identifier projection."""
    frame = dataset.frame if isinstance(dataset, Dataset) else dataset
    missing = [q for q in quasi_identifiers if q not in frame.columns]
    if missing:
        raise UnknownFeature(f"unknown quasi-identifier(s): {missing}")
    if len(frame) == 0:
        return 0
    sizes = frame.groupby(list(quasi_identifiers), sort=False, dropna=False).size()
    return int(sizes.min())


def _generalized_schema(schema, qis):
    return tuple(FeatureDef(f.name, "categorical", f.role, None) if f.name in qis else f
                 for f in schema)


def fit_anonymizer(dataset: Dataset, quasi_identifiers, k) -> MondrianAnonymizer:
    numeric = tuple(q for q in quasi_identifiers if dataset.feature(q).kind == "numeric")
    return MondrianAnonymizer(tuple(quasi_identifiers), k, numeric).fit(dataset.frame)


def apply_anonymizer(anonymizer: MondrianAnonymizer, dataset: Dataset) -> Dataset:
    frame = anonymizer.transform(dataset.frame)
    schema = _generalized_schema(dataset.schema, anonymizer.quasi_identifiers)
    return Dataset(schema, frame, dataset.provenance + (f"anonymized k={anonymizer.k}",))


def k_anonymize(dataset: Dataset, quasi_identifiers, k):
    """Return (generalized dataset, generalization map) with every QI class ≥ k."""
    if k < 2:
        raise ValueError("k must be ≥ 2")
    if not quasi_identifiers:
        raise ValueError("quasi_identifiers must be non-empty")
    unknown = [q for q in quasi_identifiers if not dataset.has(q)]
    if unknown:
        raise UnknownFeature(f"unknown quasi-identifier(s): {unknown}")
    if len(dataset) < k:
        raise InfeasibleK(f"{len(dataset)} rows cannot be {k}-anonymous")
    anonymizer = fit_anonymizer(dataset, quasi_identifiers, k)
    return apply_anonymizer(anonymizer, dataset), anonymizer.to_dict()
