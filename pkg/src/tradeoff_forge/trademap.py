"""Trade-off table, Pareto front, and model selection."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from .core import DIMENSIONS, EXPLAINABILITY_SCALE, RISK_SCALE, SelectionPolicy

PLACEHOLDER = "—"

TABLE_COLUMNS = (
    ("set_id", "Number Set"),
    ("accuracy", "Accuracy"),
    ("precision", "Precision"),
    ("f1", "F1 Score"),
    ("data_used_pct", "% Data Used"),
    ("k_anon", "K-Anonymity"),
    ("cdd", "CDD (Gender)"),
    ("risk_category", "Likelihood re-identification"),
    ("explainability_category", "Explainability"),
    ("recall", "Recall"),
)


@dataclass
class TradeoffRecord:
    set_id: int
    accuracy: float = math.nan
    precision: float = math.nan
    f1: float = math.nan
    recall: float = math.nan
    data_used_pct: float = math.nan
    k_anon: bool = False
    k_min_class: int | None = None
    cdd: float = math.nan
    risk_category: str = ""
    explainability_category: str = ""
    status: str = "ok"
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return self.status == "ok"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("accuracy", "precision", "f1", "recall", "data_used_pct", "cdd"):
            if d.get(key) is None:
                d[key] = math.nan
        return cls(**d)


def ordinal(dimension, value):
    """Numeric value used for comparisons; categories map onto their scale."""
    if dimension == "risk_category":
        return RISK_SCALE.index(value)
    if dimension == "explainability_category":
        return EXPLAINABILITY_SCALE.index(value)
    if dimension == "k_anon":
        return 1 if value else 0
    if dimension == "cdd":
        return abs(value)
    return value


def _value(record, dimension):
    return ordinal(dimension, getattr(record, dimension))


# --------------------------------------------------------------------------
# table

def _cells(r: TradeoffRecord):
    if not r.ok:
        return [f"Set {r.set_id}"] + [PLACEHOLDER] * (len(TABLE_COLUMNS) - 1)
    from .metrics import data_usage

    return [
        f"Set {r.set_id}",
        f"{r.accuracy:.2f}",
        f"{r.precision:.2f}",
        f"{r.f1:.2f}",
        data_usage(r.data_used_pct / 100.0)[0],
        "Yes" if r.k_anon else "No",
        f"{r.cdd:.2f}",
        r.risk_category,
        r.explainability_category,
        f"{r.recall:.2f}",
    ]


@dataclass
class TradeoffTable:
    records: list

    def rows(self):
        return [_cells(r) for r in self.records]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow([c for c, _ in TABLE_COLUMNS] + ["status", "k_min_class", "notes"])
        for r in self.records:
            def num(v, digits=6):
                return "" if v != v else f"{v:.{digits}f}"
            writer.writerow([
                r.set_id, num(r.accuracy), num(r.precision), num(r.f1), num(r.data_used_pct, 2),
                "Yes" if r.k_anon else "No", num(r.cdd), r.risk_category,
                r.explainability_category, num(r.recall), r.status,
                "" if r.k_min_class is None else r.k_min_class, "; ".join(r.notes),
            ])
        return buf.getvalue()

    def to_markdown(self):
        """Grouped header: Predictive Performance | Legal Requirements."""
        lines = [
            "| | Predictive Performance | | | Legal Requirements | | | | | |",
            "| | | | | Data Minimization | | Non-discrimination | Personal Data Qualification"
            " | AML Requirements | |",
            "| " + " | ".join(title for _, title in TABLE_COLUMNS) + " |",
            "|" + "|".join(["---"] + [":---:"] * (len(TABLE_COLUMNS) - 1)) + "|",
        ]
        for cells in self.rows():
            lines.append("| " + " | ".join(cells) + " |")
        notes = [f"- Set {r.set_id}: {'; '.join(r.notes)}" for r in self.records if not r.ok and r.notes]
        if notes:
            lines += ["", "Failed sets:"] + notes
        return "\n".join(lines) + "\n"

    def to_json(self):
        def clean(d):
            return {k: (None if isinstance(v, float) and v != v else v) for k, v in d.items()}
        return json.dumps([clean(r.to_dict()) for r in self.records], indent=2, sort_keys=True) + "\n"


def build_table(records) -> TradeoffTable:
    if not records:
        raise ValueError("at least one record is required")
    return TradeoffTable(sorted(records, key=lambda r: r.set_id))


# --------------------------------------------------------------------------
# Pareto front

def dominates(a, b, directions) -> bool:
    strict = False
    for dim, direction in directions.items():
        if direction == "ignore":
            continue
        va, vb = _value(a, dim), _value(b, dim)
        if direction == "minimize":
            va, vb = -va, -vb
        if va < vb:
            return False
        if va > vb:
            strict = True
    return strict


def pareto_front(records, directions) -> list[int]:
    """Set ids of the ok records not dominated by any other ok record."""
    active = {d: s for d, s in directions.items() if s != "ignore"}
    if not active:
        raise ValueError("at least one non-ignored dimension is required")
    unknown = [d for d in active if d not in DIMENSIONS]
    if unknown:
        raise ValueError(f"unknown dimension(s): {unknown}")
    ok = [r for r in records if r.ok]
    if not ok:
        raise ValueError("no ok records")
    # sort so that a dominating record is always seen before records it dominates
    def key(r):
        return tuple(-_value(r, d) if s == "maximize" else _value(r, d) for d, s in active.items())

    ranked = sorted(ok, key=key)
    front = []
    for r in ranked:
        if not any(dominates(f, r, active) for f in front):
            front.append(r)
    return sorted(r.set_id for r in front)


# --------------------------------------------------------------------------
# selection

@dataclass
class Selection:
    chosen: int | None
    feasible: list
    matrix: dict
    ranking: list
    rationale: dict = field(default_factory=dict)
    binding: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _passes(record, threshold):
    dim = threshold.dimension
    if not record.ok:
        return False
    value = getattr(record, dim)
    if threshold.op == "in":
        return value in threshold.value
    v = ordinal(dim, value)
    t = ordinal(dim, threshold.value)
    if threshold.op == ">=":
        return v >= t
    if threshold.op == "<=":
        return v <= t
    return v == t


def describe_threshold(t):
    value = list(t.value) if isinstance(t.value, tuple) else t.value
    if isinstance(value, bool):
        value = "true" if value else "false"
    name = "|cdd|" if t.dimension == "cdd" else t.dimension
    return f"{name} {t.op} {value}"


def _weighted_scores(records, policy):
    """Weighted sum of min-max normalized dimensions (larger is better)."""
    scores = {r.set_id: 0.0 for r in records}
    for dim, weight in policy.weights.items():
        if weight == 0:
            continue
        direction = policy.directions.get(dim, DIMENSIONS[dim])
        values = {r.set_id: float(_value(r, dim)) for r in records}
        lo, hi = min(values.values()), max(values.values())
        for sid, v in values.items():
            norm = 0.0 if hi == lo else (v - lo) / (hi - lo)
            if direction == "minimize":
                norm = 1.0 - norm
            scores[sid] += weight * norm
    return scores


def select(records, policy: SelectionPolicy) -> Selection:
    matrix = {}
    for r in records:
        matrix[r.set_id] = {describe_threshold(t): _passes(r, t) for t in policy.thresholds}
        if not r.ok:
            matrix[r.set_id]["status == ok"] = False
    feasible = [r for r in records if r.ok and all(matrix[r.set_id].values())]
    binding = []
    if not feasible:
        for t in policy.thresholds:
            label = describe_threshold(t)
            if not any(m.get(label, True) for m in matrix.values()):
                binding.append(label)
        if not binding:
            binding = [label for label in (describe_threshold(t) for t in policy.thresholds)]
        return Selection(None, [], matrix, [], binding=binding)

    if policy.rule == "lexicographic":
        def key(r):
            parts = []
            for dim, direction in policy.order:
                v = _value(r, dim)
                parts.append(-v if direction == "maximize" else v)
            return tuple(parts) + (r.set_id,)
        ranked = sorted(feasible, key=key)
    else:
        total = sum(policy.weights.values())
        scores = {k: v / total for k, v in _weighted_scores(feasible, policy).items()}
        ranked = sorted(feasible, key=lambda r: (-round(scores[r.set_id], 12), r.set_id))
    chosen = ranked[0]
    return Selection(
        chosen=chosen.set_id,
        feasible=sorted(r.set_id for r in feasible),
        matrix=matrix,
        ranking=[r.set_id for r in ranked],
    )
