"""Tabular dataset container, the case-study schema, and CSV I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .core import FEATURE_KINDS, FEATURE_ROLES, FeatureDef, RunSpec

LABEL = "Money Laundering"

ACCOUNT_HOLDER_FEATURES = (
    "Gender",
    "Legal Domicile",
    "Tax Residency",
    "Source of Wealth Industry",
    "Total Estimated Assets",
    "Profession",
    "PEP Status",
)
TRANSACTION_FEATURES = (
    "Direction",
    "Sender Account Number",
    "Sender Country",
    "Receiver Account Number",
    "Receiver Country",
    "Transaction Date",
    "Transaction Type",
    "Amount",
    "Transaction Currency",
)
# Account-holder personal information plus the transaction amount.
DEFAULT_QUASI_IDENTIFIERS = ACCOUNT_HOLDER_FEATURES + ("Amount",)


@dataclass(frozen=True)
class Dataset:
    """Typed table: ordered schema, a DataFrame of values, lineage tags.

    Columns whose role is ``excluded`` stay in the frame (e.g. a dropped
    protected feature kept for evaluation) but are invisible to models.
    """

    schema: tuple[FeatureDef, ...]
    frame: pd.DataFrame
    provenance: tuple[str, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.frame)

    @property
    def names(self):
        return [f.name for f in self.schema]

    def feature(self, name):
        for f in self.schema:
            if f.name == name:
                return f
        raise KeyError(name)

    def has(self, name):
        return any(f.name == name for f in self.schema)

    @property
    def label_name(self):
        return next(f.name for f in self.schema if f.role == "label")

    @property
    def labels(self) -> np.ndarray:
        return self.frame[self.label_name].to_numpy(dtype=np.int64)

    @property
    def visible_features(self):
        """Schema entries a model may consume (everything but label/excluded)."""
        return [f for f in self.schema if f.role not in ("label", "excluded")]

    def take(self, index, tag=None):
        frame = self.frame.iloc[np.asarray(index)].reset_index(drop=True)
        prov = self.provenance + ((tag,) if tag else ())
        return Dataset(self.schema, frame, prov)

    def with_tag(self, tag):
        return replace(self, provenance=self.provenance + (tag,))


def case_study_schema(domains=None):
    """The 16 feature columns plus the binary label, in CSV column order."""
    domains = domains or {}
    kinds = {
        "Total Estimated Assets": "numeric",
        "Amount": "numeric",
        "Transaction Date": "date",
        "Sender Account Number": "account-id",
        "Receiver Account Number": "account-id",
    }
    schema = []
    for name in ACCOUNT_HOLDER_FEATURES + TRANSACTION_FEATURES:
        kind = kinds.get(name, "categorical")
        role = "protected" if name == "Gender" else "feature"
        dom = tuple(domains[name]) if name in domains else None
        schema.append(FeatureDef(name, kind, role, dom))
    schema.append(FeatureDef(LABEL, "categorical", "label", (0, 1)))
    return tuple(schema)


def validate_dataset(dataset: Dataset, spec: RunSpec | None = None) -> list[str]:
    """Return every invariant violation found; an empty list means valid."""
    problems = []
    names = dataset.names
    if list(dataset.frame.columns) != names:
        problems.append("row arity does not match schema")
    labels = [f for f in dataset.schema if f.role == "label"]
    if len(labels) != 1:
        problems.append("schema must have exactly one label feature")
    if sum(f.role == "protected" for f in dataset.schema) > 1:
        problems.append("more than one protected feature")
    for f in dataset.schema:
        if f.kind not in FEATURE_KINDS or f.role not in FEATURE_ROLES:
            problems.append(f"invalid kind/role for {f.name}")
    if len(labels) == 1 and labels[0].name in dataset.frame.columns:
        values = set(pd.unique(dataset.frame[labels[0].name]))
        if len(values - {0, 1}) > 0 or len(values) > 2:
            problems.append("label not binary")
    for f in dataset.schema:
        if f.kind == "categorical" and f.domain and f.role != "label" and f.name in dataset.frame.columns:
            extra = set(pd.unique(dataset.frame[f.name])) - set(f.domain)
            if extra:
                problems.append(f"value outside domain for {f.name}")
    if spec is not None:
        if not dataset.has(spec.protected_feature) or spec.protected_feature not in dataset.frame.columns:
            problems.append("protected feature absent")
        for s in spec.strata_features:
            if not dataset.has(s):
                problems.append(f"strata feature absent: {s}")
    return problems


def _sidecar(path):
    path = Path(path)
    return path.with_name(path.name + ".provenance.json")


def write_csv(dataset: Dataset, path, sidecar: dict | None = None):
    """Write RFC-4180 CSV (amounts as 2-decimal strings, ISO dates)."""
    frame = dataset.frame.copy()
    for f in dataset.schema:
        if f.kind == "numeric" and pd.api.types.is_float_dtype(frame[f.name]):
            frame[f.name] = frame[f.name].map(lambda v: f"{v:.2f}")
    frame.to_csv(path, index=False, lineterminator="\r\n")
    if sidecar is not None:
        doc = dict(sidecar)
        doc["schema"] = [
            {"name": f.name, "kind": f.kind, "role": f.role,
             "domain": list(f.domain) if f.domain is not None else None}
            for f in dataset.schema
        ]
        doc["provenance"] = list(dataset.provenance)
        _sidecar(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_csv(path, schema=None) -> Dataset:
    """Read a dataset CSV, taking the schema from the sidecar when present."""
    provenance = ()
    side = _sidecar(path)
    if schema is None and side.exists():
        doc = json.loads(side.read_text(encoding="utf-8"))
        schema = tuple(
            FeatureDef(s["name"], s["kind"], s["role"],
                       tuple(s["domain"]) if s.get("domain") is not None else None)
            for s in doc["schema"]
        )
        provenance = tuple(doc.get("provenance", ()))
    if schema is None:
        schema = case_study_schema()
    dtypes = {}
    for f in schema:
        if f.kind == "numeric":
            dtypes[f.name] = np.float64
        elif f.role == "label":
            dtypes[f.name] = np.int64
        else:
            dtypes[f.name] = str
    frame = pd.read_csv(path, dtype=dtypes, keep_default_na=False)
    missing = [f.name for f in schema if f.name not in frame.columns]
    kept = [f for f in schema if f.name not in missing]
    frame = frame[[f.name for f in kept]]
    return Dataset(tuple(kept), frame, provenance + (f"loaded {Path(path).name}",))
