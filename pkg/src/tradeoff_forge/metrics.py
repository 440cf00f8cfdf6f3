"""Evaluation panel: predictive metrics, conditional demographic disparity,
data-usage accounting, and the qualitative category mappings."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
import pandas as pd

from .errors import LengthMismatch, NoProtectedVariation


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn


def confusion(true_labels, pred_labels) -> ConfusionCounts:
    y = np.asarray(true_labels)
    p = np.asarray(pred_labels)
    if y.shape != p.shape:
        raise LengthMismatch(f"{y.shape[0]} labels vs {p.shape[0]} predictions")
    for arr in (y, p):
        if not set(np.unique(arr).tolist()) <= {0, 1}:
            raise ValueError("labels must be binary 0/1")
    return ConfusionCounts(
        tp=int(((y == 1) & (p == 1)).sum()),
        fp=int(((y == 0) & (p == 1)).sum()),
        tn=int(((y == 0) & (p == 0)).sum()),
        fn=int(((y == 1) & (p == 0)).sum()),
    )


def perf_panel(counts: ConfusionCounts) -> dict:
    """Accuracy, precision, recall and F1 (positive = alert).

    A ratio with a zero denominator is reported as 0.0 and named in
    ``undefined``.
    """
    if counts.n == 0:
        raise ValueError("no rows to evaluate")
    undefined = []

    def ratio(num, den, name):
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    precision = ratio(counts.tp, counts.tp + counts.fp, "precision")
    recall = ratio(counts.tp, counts.tp + counts.fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    return {
        "accuracy": (counts.tp + counts.tn) / counts.n,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "undefined": undefined,
    }


@dataclass(frozen=True)
class StratumDisparity:
    key: str
    n: int
    dd: float
    flagged: bool = False


@dataclass(frozen=True)
class CddResult:
    strata: tuple[StratumDisparity, ...]
    cdd: float
    protected_group: str
    n: int = 0
    flagged: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self):
        return {
            "cdd": self.cdd,
            "protected_group": self.protected_group,
            "n": self.n,
            "strata": [
                {"key": s.key, "n": s.n, "dd": s.dd, "flagged": s.flagged} for s in self.strata
            ],
        }


def _defined(values):
    s = pd.Series(values, dtype=object)
    return (~s.isna() & (s.astype(str) != "")).to_numpy()


def cdd(pred_labels, protected_values, strata_keys, protected_group=None) -> CddResult:
    """Conditional demographic disparity.

    Per stratum, DD = (share of ``protected_group`` among adverse = 1
    predictions) - (its share among favorable = 0 predictions); the overall
    value is the stratum-size weighted sum. Strata with no adverse or no
    favorable rows contribute 0 and are flagged. Rows with a missing protected
    value are ignored. ``protected_group`` defaults to the first value in
    sorted order.
    """
    pred = np.asarray(pred_labels)
    prot = np.asarray(protected_values, dtype=object)
    keys = np.asarray(strata_keys, dtype=object)
    if not (len(pred) == len(prot) == len(keys)):
        raise LengthMismatch("pred_labels, protected_values and strata_keys differ in length")
    keep = _defined(prot)
    pred, prot, keys = pred[keep], prot[keep], keys[keep]
    groups = sorted(set(map(str, prot)))
    if len(groups) < 2:
        raise NoProtectedVariation("the protected feature takes a single value")
    if protected_group is None:
        protected_group = groups[0]
    in_group = np.array([str(v) == str(protected_group) for v in prot])
    n = len(pred)

    adverse = pred == 1
    frame = pd.DataFrame({"key": keys.astype(str), "adverse": adverse, "g": in_group,
                          "g_adv": adverse & in_group})
    stats = frame.groupby("key", sort=True).agg(
        n=("g", "size"), n_adv=("adverse", "sum"), g_adv=("g_adv", "sum"), g_all=("g", "sum"),
    )
    strata = []
    total = 0.0
    for key, row in stats.iterrows():
        n_s, n_adv = int(row.n), int(row.n_adv)
        n_fav = n_s - n_adv
        if n_adv == 0 or n_fav == 0:
            strata.append(StratumDisparity(key, n_s, 0.0, True))
            continue
        g_adv = int(row.g_adv)
        g_fav = int(row.g_all) - g_adv
        dd = g_adv / n_adv - g_fav / n_fav
        strata.append(StratumDisparity(key, n_s, dd, False))
        total += (n_s / n) * dd
    return CddResult(
        strata=tuple(strata),
        cdd=float(total),
        protected_group=str(protected_group),
        n=n,
        flagged=tuple(s.key for s in strata if s.flagged),
    )


def quantile_bins(values, n_bins=5) -> np.ndarray:
    """Bin index 0..n_bins-1 by quantile edges of ``values`` themselves."""
    x = np.asarray(values, dtype=np.float64)
    if n_bins <= 1:
        return np.zeros(len(x), dtype=np.int64)
    edges = np.quantile(x, np.linspace(0, 1, n_bins + 1)[1:-1])
    return np.searchsorted(edges, x, side="right")


def strata_keys(frame: pd.DataFrame, features, numeric=(), n_bins=5) -> np.ndarray:
    """One key per row; numeric strata features are quantile-binned on ``frame``."""
    parts = []
    for name in features:
        if name in numeric:
            bins = quantile_bins(frame[name].to_numpy(dtype=np.float64), n_bins)
            parts.append(np.array([f"{name}:Q{b + 1}" for b in bins], dtype=object))
        else:
            parts.append(frame[name].astype(str).to_numpy(dtype=object))
    if not parts:
        return np.full(len(frame), "all", dtype=object)
    return np.array([" | ".join(t) for t in zip(*parts)], dtype=object)


def data_usage(fraction_used) -> tuple[str, float]:
    """(rounded percentage label, raw percentage); rounding is half-up."""
    raw = Decimal(repr(float(fraction_used))) * 100
    pct = int(raw.quantize(Decimal("1"), rounding=ROUND_HALF_UP))
    return f"{pct}%", float(raw)


RISK_RULES = {
    "k-anonymity": "Very Low",
    "internal": "Low",
    "shared": "Moderate",
}


def applies_k_anonymity(opset, spec=None) -> bool:
    """True when any chosen operationalization (or one it includes) is k-anonymity."""
    for op in opset.choices.values():
        if op.kind == "k-anonymity":
            return True
        if spec is not None:
            for idx in op.includes:
                if spec.op(op.requirement, idx).kind == "k-anonymity":
                    return True
    return False


def risk_category(opset, spec=None, shared_externally=None, override=None) -> tuple[str, str]:
    """(re-identification risk category, provenance of the decision)."""
    if override is None and spec is not None:
        override = spec.risk_override
    if override is not None:
        return override, "override"
    if shared_externally is None:
        shared_externally = bool(spec.model_shared_externally) if spec is not None else False
    if applies_k_anonymity(opset, spec):
        return RISK_RULES["k-anonymity"], "rule: k-anonymity applied"
    if shared_externally:
        return RISK_RULES["shared"], "rule: shared externally without k-anonymity"
    return RISK_RULES["internal"], "rule: internal model without k-anonymity"


EXPLAINABILITY = {"logreg": "Moderate", "forest": "High"}


def explainability_category(family) -> str:
    return EXPLAINABILITY[family]
