"""Data-level operationalizations: unawareness, class weights, minimization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DegenerateData, NoPositives, UnknownFeature


def drop_features(dataset: Dataset, names) -> Dataset:
    """Hide ``names`` from models by flipping their role to ``excluded``.

    Values stay in the frame so evaluation can still read them (the dropped
    protected feature is needed for disparity metrics).
    """
    names = list(names)
    unknown = [n for n in names if not dataset.has(n)]
    if unknown:
        raise UnknownFeature(f"unknown feature(s): {unknown}")
    if not names:
        return dataset
    schema = tuple(f.with_role("excluded") if f.name in names else f for f in dataset.schema)
    return Dataset(schema, dataset.frame, dataset.provenance + (f"dropped {','.join(names)}",))


def class_weights(labels, policy) -> np.ndarray:
    """Per-row training weights; negatives always weigh 1.0.

    ``policy`` is ``{"policy": "fixed", "positive_weight": w}`` or
    ``{"policy": "balanced"}`` (w = n_neg / n_pos).
    """
    y = np.asarray(labels)
    if not set(np.unique(y).tolist()) <= {0, 1}:
        raise ValueError("labels must be binary 0/1")
    kind = policy.get("policy", "fixed")
    if kind == "balanced":
        n_pos = int((y == 1).sum())
        if n_pos == 0:
            raise NoPositives("balanced weighting needs at least one positive")
        w_pos = (len(y) - n_pos) / n_pos
    elif kind == "fixed":
        w_pos = float(policy["positive_weight"])
    else:
        raise ValueError(f"unknown weighting policy {kind!r}")
    return np.where(y == 1, w_pos, 1.0)


def log_loss(labels, probs, eps=1e-12, sample_weight=None) -> float:
    p = np.clip(np.asarray(probs, dtype=np.float64), eps, 1 - eps)
    y = np.asarray(labels)
    return float(-np.average(y * np.log(p) + (1 - y) * np.log1p(-p), weights=sample_weight))


@dataclass
class MinimizationTrace:
    batch_sizes: list = field(default_factory=list)
    sizes: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    slopes: list = field(default_factory=list)
    stop_step: int = 0
    stopped_by: str = "exhausted"
    fraction_used: float = 1.0
    threshold: float = -1e-7
    window: int = 3
    pool_size: int = 0

    @property
    def steps(self):
        return len(self.losses)

    @property
    def slope_at_stop(self):
        return self.slopes[self.stop_step - 1] if self.stop_step else None

    def to_dict(self):
        return {
            "batch_sizes": self.batch_sizes,
            "sizes": self.sizes,
            "validation_loss": self.losses,
            "slopes": self.slopes,
            "stop_step": self.stop_step,
            "stopped_by": self.stopped_by,
            "fraction_used": self.fraction_used,
            "threshold": "-inf" if math.isinf(self.threshold) else self.threshold,
            "window": self.window,
            "pool_size": self.pool_size,
        }


def _batches(n, batch_size, rng, groups):
    """Yield index arrays to append, one per step.

    Without ``groups`` rows are shuffled and cut into ``batch_size`` chunks.
    With ``groups`` whole groups are shuffled and appended until a chunk
    reaches ``batch_size`` rows, so every accumulated subset is a union of
    complete groups.
    """
    if groups is None:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start:start + batch_size]
        return
    groups = np.asarray(groups)
    ids = np.unique(groups)
    members = {g: np.flatnonzero(groups == g) for g in ids}
    chunk = []
    size = 0
    for g in rng.permutation(ids):
        chunk.append(members[g])
        size += len(members[g])
        if size >= batch_size:
            yield np.concatenate(chunk)
            chunk, size = [], 0
    if chunk:
        yield np.concatenate(chunk)


def minimize_data(train_pool: Dataset, proto, threshold, batch_size, seed, valid: Dataset,
                  window=3, groups=None, valid_weights=None):
    """Performance-based data minimization.

    Shuffles the pool, then adds ``batch_size`` rows at a time. After each
    batch ``proto.fit`` trains on everything accumulated so far and the
    validation log-loss is recorded. From step ``window + 1`` on, the
    per-sample loss slope over the last ``window`` steps is compared with
    ``threshold``: the loop stops at the first step whose slope is
    ``>= threshold``, i.e. once an extra sample improves the loss by less than
    ``|threshold|``. ``threshold = -inf`` disables the rule, so the whole pool
    is used. ``groups`` (e.g. k-anonymity equivalence classes) makes whole
    groups the unit of accumulation. ``valid_weights`` turns the validation
    loss into the weighted loss the model is trained on.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be ≥ 1")
    if not threshold < 0:
        raise ValueError("threshold must be negative")
    n = len(train_pool)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xD47A]))
    trace = MinimizationTrace(threshold=threshold, window=window, pool_size=n)
    never_stop = math.isinf(threshold)
    y_valid = valid.labels
    taken = []
    used = 0
    for batch in _batches(n, batch_size, rng, groups):
        step = len(batch)
        used += step
        taken.append(batch)
        chosen = np.sort(np.concatenate(taken))
        subset = train_pool.take(chosen)
        try:
            model = proto.fit(subset)
            probs = model.predict_proba(valid.frame)[:, 1]
        except DegenerateData:
            # single-class prefix: score the constant prior predictor instead
            probs = np.full(len(valid), subset.labels.mean())
            probs = np.clip(probs, 1e-3, 1 - 1e-3)
        trace.batch_sizes.append(step)
        trace.sizes.append(used)
        trace.losses.append(log_loss(y_valid, probs, sample_weight=valid_weights))
        t = len(trace.losses)
        if t > window:
            delta_n = trace.sizes[-1] - trace.sizes[-1 - window]
            slope = (trace.losses[-1] - trace.losses[-1 - window]) / delta_n
        else:
            slope = None
        trace.slopes.append(slope)
        if slope is not None and not never_stop and slope >= threshold:
            trace.stopped_by = "threshold"
            trace.stop_step = t
            break
    else:
        trace.stop_step = len(trace.losses)
    trace.fraction_used = used / n if n else 1.0
    tag = f"minimized {round(100 * trace.fraction_used)}%"
    return train_pool.take(chosen, tag=tag), trace
