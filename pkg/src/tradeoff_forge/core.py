"""Domain types and the run-spec schema.

A run spec is the declarative output of the legal analysis: the legal
requirements, the candidate operationalizations for each, the compatibility
rules between them, and the engine settings needed to train and evaluate one
model per operationalization set. ``validate_spec`` turns the raw JSON document
into an immutable :class:`RunSpec`; ``spec_to_dict`` is its inverse.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import SpecError

FEATURE_KINDS = ("categorical", "numeric", "date", "account-id")
FEATURE_ROLES = ("feature", "quasi-identifier", "protected", "label", "excluded")

EVALUATIONS = (
    "perf-panel",
    "cdd",
    "data-usage+k-anon",
    "risk-category",
    "explainability-category",
    "recall",
)

OP_KINDS = (
    "feature-drop",
    "reject-option",
    "data-minimization",
    "k-anonymity",
    "no-op",
    "model-family",
    "class-weighting",
)

MODEL_FAMILIES = ("logreg", "forest")
RULE_KINDS = ("implies", "excludes")

RISK_SCALE = ("Very Low", "Low", "Moderate", "High", "Very High")
EXPLAINABILITY_SCALE = ("Low", "Moderate", "High")

# Dimension name -> default direction for Pareto/selection.
DIMENSIONS = {
    "accuracy": "maximize",
    "precision": "maximize",
    "recall": "maximize",
    "f1": "maximize",
    "data_used_pct": "minimize",
    "k_anon": "maximize",
    "cdd": "minimize",
    "risk_category": "minimize",
    "explainability_category": "maximize",
}

DEFAULT_HYPER = {
    "logreg": {"learning_rate": 0.1, "epochs": 2000, "l2": 1e-4},
    "forest": {"n_trees": 200, "max_depth": 8, "min_leaf": 5, "feature_subsample": "sqrt"},
}

# Lighter prototypes for the minimization loop, which retrains once per batch.
DEFAULT_MINIMIZATION_PROTO = {
    "logreg": {"epochs": 300},
    "forest": {"n_trees": 25},
}


@dataclass(frozen=True)
class FeatureDef:
    name: str
    kind: str
    role: str = "feature"
    domain: tuple | None = None

    def with_role(self, role):
        return FeatureDef(self.name, self.kind, role, self.domain)


@dataclass(frozen=True)
class LegalRequirement:
    id: str
    name: str
    evaluation: str


@dataclass(frozen=True)
class Operationalization:
    id: str
    requirement: str
    index: int
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    label: str = ""
    includes: tuple[int, ...] = ()

    @property
    def key(self):
        return (self.requirement, self.index)


@dataclass(frozen=True)
class CompatibilityRule:
    kind: str
    antecedent: tuple[str, int]
    consequent: tuple[str, int]

    def describe(self):
        a, c = self.antecedent, self.consequent
        return f"{a[0]}({a[1]}) {self.kind} {c[0]}({c[1]})"


@dataclass(frozen=True)
class OperationalizationSet:
    set_id: int
    choices: Mapping[str, Operationalization]

    def index_of(self, requirement):
        return self.choices[requirement].index

    def indices(self):
        return {req: op.index for req, op in self.choices.items()}


@dataclass(frozen=True)
class Threshold:
    dimension: str
    op: str
    value: Any


@dataclass(frozen=True)
class SelectionPolicy:
    thresholds: tuple[Threshold, ...] = ()
    rule: str = "lexicographic"
    order: tuple[tuple[str, str], ...] = (("recall", "maximize"),)
    weights: Mapping[str, float] = field(default_factory=dict)
    directions: Mapping[str, str] = field(default_factory=dict)
    cdd_soft_limit: float = 0.1


@dataclass(frozen=True)
class RunSpec:
    requirements: tuple[LegalRequirement, ...]
    operationalizations: tuple[Operationalization, ...]
    rules: tuple[CompatibilityRule, ...]
    protected_feature: str
    strata_features: tuple[str, ...]
    split: tuple[float, float, float]
    seed: int
    selection: SelectionPolicy
    name: str = ""
    hyper: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    minimization_proto: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    max_categories: int = 20
    cdd_bins: int = 5
    model_shared_externally: bool = False
    risk_override: str | None = None
    transform_order: str = "anonymize-first"
    prune: Mapping[str, Any] | None = None

    def ops_for(self, requirement):
        return [op for op in self.operationalizations if op.requirement == requirement]

    def op(self, requirement, index):
        for op in self.operationalizations:
            if op.requirement == requirement and op.index == index:
                return op
        raise KeyError((requirement, index))

    def requirement(self, rid):
        for req in self.requirements:
            if req.id == rid:
                return req
        raise KeyError(rid)


# --------------------------------------------------------------------------
# validation

def _require(cond, message, path):
    if not cond:
        raise SpecError(message, path)


def _number(value, path, *, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if integer:
        ok = ok and float(value).is_integer()
    _require(ok, "must be an integer" if integer else "must be a number", path)
    return int(value) if integer else float(value)


def _parse_threshold_value(value, path):
    # JSON has no -inf literal; accept the string sentinel.
    if isinstance(value, str) and value.strip().lower() in ("-inf", "-infinity", "never"):
        return -math.inf
    return _number(value, path)


def _validate_params(kind, params, path):
    """Check and normalize the parameter map for one operationalization kind."""
    p = dict(params)
    if kind == "feature-drop":
        feats = p.get("features")
        _require(isinstance(feats, list) and all(isinstance(f, str) for f in feats),
                 "must be a list of feature names", f"{path}.features")
        p["features"] = list(feats)
    elif kind == "reject-option":
        p["epsilon"] = _number(p.get("epsilon", 0.02), f"{path}.epsilon")
        _require(p["epsilon"] >= 0, "must be ≥ 0", f"{path}.epsilon")
        if p.get("theta") is not None:
            theta = _number(p["theta"], f"{path}.theta")
            _require(0.5 <= theta <= 1.0, "must be in [0.5, 1]", f"{path}.theta")
            p["theta"] = theta
        else:
            p.pop("theta", None)
    elif kind == "data-minimization":
        thr = _parse_threshold_value(p.get("stopping_threshold"), f"{path}.stopping_threshold")
        _require(thr < 0, "must be < 0", f"{path}.stopping_threshold")
        p["stopping_threshold"] = "-inf" if math.isinf(thr) else thr
        p["batch_size"] = _number(p.get("batch_size", 500), f"{path}.batch_size", integer=True)
        _require(p["batch_size"] >= 1, "must be ≥ 1", f"{path}.batch_size")
        p["window"] = _number(p.get("window", 3), f"{path}.window", integer=True)
        _require(p["window"] >= 1, "must be ≥ 1", f"{path}.window")
    elif kind == "k-anonymity":
        _require("k" in p, "is required", f"{path}.k")
        k = _number(p["k"], f"{path}.k", integer=True)
        _require(k >= 2, "params.k must be ≥ 2", f"{path}.k")
        p["k"] = k
        qis = p.get("quasi_identifiers")
        if qis is not None:
            _require(isinstance(qis, list) and qis and all(isinstance(q, str) for q in qis),
                     "must be a non-empty list of feature names", f"{path}.quasi_identifiers")
            p["quasi_identifiers"] = list(qis)
    elif kind == "no-op":
        pass
    elif kind == "model-family":
        _require(p.get("family") in MODEL_FAMILIES,
                 f"must be one of {list(MODEL_FAMILIES)}", f"{path}.family")
        if "hyper" in p:
            _require(isinstance(p["hyper"], dict), "must be an object", f"{path}.hyper")
            p["hyper"] = dict(p["hyper"])
    elif kind == "class-weighting":
        policy = p.get("policy", "fixed")
        _require(policy in ("fixed", "balanced"), "must be 'fixed' or 'balanced'", f"{path}.policy")
        p["policy"] = policy
        if policy == "fixed":
            w = _number(p.get("positive_weight"), f"{path}.positive_weight")
            _require(w > 0, "must be > 0", f"{path}.positive_weight")
            p["positive_weight"] = w
        else:
            p.pop("positive_weight", None)
    return p


def _parse_selection(raw, path="selection"):
    raw = raw or {}
    _require(isinstance(raw, dict), "must be an object", path)
    thresholds = []
    for i, t in enumerate(raw.get("thresholds", [])):
        tp = f"{path}.thresholds[{i}]"
        dim = t.get("dimension")
        _require(dim in DIMENSIONS, f"unknown dimension {dim!r}", f"{tp}.dimension")
        op = t.get("op", ">=")
        _require(op in (">=", "<=", "==", "in"), f"unknown operator {op!r}", f"{tp}.op")
        value = t.get("value")
        if dim == "risk_category":
            allowed = RISK_SCALE
        elif dim == "explainability_category":
            allowed = EXPLAINABILITY_SCALE
        else:
            allowed = None
        if op == "in":
            _require(isinstance(value, list), "must be a list for 'in'", f"{tp}.value")
            value = tuple(value)
            if allowed:
                _require(all(v in allowed for v in value), "unknown category", f"{tp}.value")
        elif allowed:
            _require(value in allowed, "unknown category", f"{tp}.value")
        elif dim == "k_anon":
            _require(isinstance(value, bool), "must be a boolean", f"{tp}.value")
        else:
            value = _number(value, f"{tp}.value")
        thresholds.append(Threshold(dim, op, value))

    ranking = raw.get("ranking", {"rule": "lexicographic", "order": [{"dimension": "recall"}]})
    rule = ranking.get("rule", "lexicographic")
    _require(rule in ("lexicographic", "weighted"), f"unknown rule {rule!r}", f"{path}.ranking.rule")
    order = []
    weights = {}
    directions = {}
    if rule == "lexicographic":
        entries = ranking.get("order", [])
        _require(len(entries) > 0, "must list at least one dimension", f"{path}.ranking.order")
        for i, entry in enumerate(entries):
            if isinstance(entry, str):
                entry = {"dimension": entry}
            dim = entry.get("dimension")
            ep = f"{path}.ranking.order[{i}]"
            _require(dim in DIMENSIONS, f"unknown dimension {dim!r}", f"{ep}.dimension")
            direction = entry.get("direction", DIMENSIONS[dim])
            _require(direction in ("maximize", "minimize"), "bad direction", f"{ep}.direction")
            order.append((dim, direction))
    else:
        raw_w = ranking.get("weights", {})
        _require(isinstance(raw_w, dict) and raw_w, "must be a non-empty object", f"{path}.ranking.weights")
        for dim, w in raw_w.items():
            wp = f"{path}.ranking.weights.{dim}"
            _require(dim in DIMENSIONS, f"unknown dimension {dim!r}", wp)
            weights[dim] = _number(w, wp)
            _require(weights[dim] >= 0, "must be ≥ 0", wp)
        _require(any(w > 0 for w in weights.values()), "must not all be zero", f"{path}.ranking.weights")
        for dim, d in ranking.get("directions", {}).items():
            dp = f"{path}.ranking.directions.{dim}"
            _require(dim in DIMENSIONS, f"unknown dimension {dim!r}", dp)
            _require(d in ("maximize", "minimize"), "bad direction", dp)
            directions[dim] = d
    soft = _number(raw.get("cdd_soft_limit", 0.1), f"{path}.cdd_soft_limit")
    return SelectionPolicy(
        thresholds=tuple(thresholds),
        rule=rule,
        order=tuple(order),
        weights=weights,
        directions=directions,
        cdd_soft_limit=soft,
    )


def selection_to_dict(policy: SelectionPolicy) -> dict:
    out = {
        "thresholds": [
            {"dimension": t.dimension, "op": t.op,
             "value": list(t.value) if isinstance(t.value, tuple) else t.value}
            for t in policy.thresholds
        ],
        "cdd_soft_limit": policy.cdd_soft_limit,
    }
    if policy.rule == "lexicographic":
        out["ranking"] = {
            "rule": "lexicographic",
            "order": [{"dimension": d, "direction": s} for d, s in policy.order],
        }
    else:
        out["ranking"] = {"rule": "weighted", "weights": dict(policy.weights),
                          "directions": dict(policy.directions)}
    return out


def validate_selection(raw) -> SelectionPolicy:
    return _parse_selection(raw)


def validate_spec(raw: Mapping[str, Any]) -> RunSpec:
    """Validate a raw spec document and return an immutable RunSpec."""
    _require(isinstance(raw, Mapping), "spec must be a JSON object", "")

    reqs = []
    seen = set()
    raw_reqs = raw.get("requirements")
    _require(isinstance(raw_reqs, list) and raw_reqs, "must be a non-empty list", "requirements")
    for i, r in enumerate(raw_reqs):
        path = f"requirements[{i}]"
        rid = r.get("id")
        _require(isinstance(rid, str) and rid, "must be a non-empty string", f"{path}.id")
        _require(rid not in seen, f"duplicate requirement id {rid!r}", f"{path}.id")
        seen.add(rid)
        ev = r.get("evaluation")
        _require(ev in EVALUATIONS, f"unknown evaluation {ev!r}", f"{path}.evaluation")
        reqs.append(LegalRequirement(rid, r.get("name", rid), ev))
    req_ids = [r.id for r in reqs]

    ops = []
    next_index = {rid: 1 for rid in req_ids}
    op_ids = set()
    keys = set()
    for i, o in enumerate(raw.get("operationalizations", [])):
        path = f"operationalizations[{i}]"
        rid = o.get("requirement")
        _require(rid in seen, f"unknown requirement {rid!r}", f"{path}.requirement")
        index = o.get("index", next_index[rid])
        index = _number(index, f"{path}.index", integer=True)
        _require(index >= 1, "must be ≥ 1 (indices are 1-based)", f"{path}.index")
        next_index[rid] = max(next_index[rid], index + 1)
        _require((rid, index) not in keys, f"duplicate operationalization ({rid}, {index})", f"{path}.index")
        keys.add((rid, index))
        oid = o.get("id") or f"{rid}:{index}"
        _require(oid not in op_ids, f"duplicate operationalization id {oid!r}", f"{path}.id")
        op_ids.add(oid)
        kind = o.get("kind")
        _require(kind in OP_KINDS, f"unknown kind {kind!r}", f"{path}.kind")
        params = _validate_params(kind, o.get("params", {}), f"{path}.params")
        includes = tuple(int(x) for x in o.get("includes", []))
        ops.append(Operationalization(oid, rid, index, kind, params, o.get("label", ""), includes))

    for i, op in enumerate(ops):
        for inc in op.includes:
            _require((op.requirement, inc) in keys and inc != op.index,
                     f"includes unknown operationalization ({op.requirement}, {inc})",
                     f"operationalizations[{i}].includes")
    for rid in req_ids:
        _require(any(op.requirement == rid for op in ops),
                 f"requirement {rid!r} has no operationalization", "operationalizations")
    ops.sort(key=lambda op: (req_ids.index(op.requirement), op.index))

    rules = []
    for i, r in enumerate(raw.get("rules", [])):
        path = f"rules[{i}]"
        kind = r.get("kind")
        _require(kind in RULE_KINDS, f"unknown rule kind {kind!r}", f"{path}.kind")
        pair = []
        for side in ("antecedent", "consequent"):
            v = r.get(side)
            _require(isinstance(v, (list, tuple)) and len(v) == 2, "must be [requirement, index]", f"{path}.{side}")
            _require(v[0] in seen, f"unknown requirement {v[0]!r}", f"{path}.{side}")
            key = (v[0], _number(v[1], f"{path}.{side}", integer=True))
            _require(key in keys, f"unknown operationalization {key}", f"{path}.{side}")
            pair.append(key)
        rules.append(CompatibilityRule(kind, pair[0], pair[1]))
    for i, a in enumerate(rules):
        for b in rules[i + 1:]:
            if {a.kind, b.kind} == {"implies", "excludes"} and a.antecedent == b.antecedent \
                    and a.consequent == b.consequent:
                raise SpecError(f"rule {a.describe()} contradicts {b.describe()}", f"rules[{i}]")

    split = raw.get("split", [0.6, 0.2, 0.2])
    _require(isinstance(split, (list, tuple)) and len(split) == 3, "must be [train, valid, test]", "split")
    split = tuple(_number(x, f"split[{j}]") for j, x in enumerate(split))
    _require(all(x > 0 for x in split), "fractions must be positive", "split")
    _require(abs(sum(split) - 1.0) <= 1e-9, "fractions must sum to 1.0", "split")

    seed = _number(raw.get("seed", 0), "seed", integer=True)
    _require(0 <= seed < 2**64, "must be a 64-bit unsigned integer", "seed")

    protected = raw.get("protected_feature", "Gender")
    _require(isinstance(protected, str) and protected, "must be a feature name", "protected_feature")
    strata = tuple(raw.get("strata_features", []))
    if any(r.evaluation == "cdd" for r in reqs):
        _require(len(strata) > 0, "must be non-empty when a requirement uses cdd", "strata_features")

    hyper = {fam: dict(DEFAULT_HYPER[fam]) for fam in MODEL_FAMILIES}
    for fam, values in (raw.get("hyper") or {}).items():
        _require(fam in MODEL_FAMILIES, f"unknown family {fam!r}", f"hyper.{fam}")
        hyper[fam].update(values)
    proto = {fam: dict(DEFAULT_MINIMIZATION_PROTO[fam]) for fam in MODEL_FAMILIES}
    for fam, values in (raw.get("minimization_proto") or {}).items():
        _require(fam in MODEL_FAMILIES, f"unknown family {fam!r}", f"minimization_proto.{fam}")
        proto[fam].update(values)

    max_categories = _number(raw.get("max_categories", 20), "max_categories", integer=True)
    _require(max_categories >= 1, "must be ≥ 1", "max_categories")
    cdd_bins = _number(raw.get("cdd_bins", 5), "cdd_bins", integer=True)
    _require(cdd_bins >= 1, "must be ≥ 1", "cdd_bins")
    risk_override = raw.get("risk_override")
    _require(risk_override is None or risk_override in RISK_SCALE, "unknown risk category", "risk_override")
    order = raw.get("transform_order", "anonymize-first")
    _require(order in ("anonymize-first", "minimize-first"), "unknown order", "transform_order")

    prune = raw.get("prune")
    if prune is not None:
        mc = _number(prune.get("max_count"), "prune.max_count", integer=True)
        _require(mc >= 1, "must be ≥ 1", "prune.max_count")
        scores = {int(k): _number(v, f"prune.scores.{k}") for k, v in (prune.get("scores") or {}).items()}
        prune = {"max_count": mc, "scores": scores}

    return RunSpec(
        requirements=tuple(reqs),
        operationalizations=tuple(ops),
        rules=tuple(rules),
        protected_feature=protected,
        strata_features=strata,
        split=split,
        seed=seed,
        selection=_parse_selection(raw.get("selection")),
        name=raw.get("name", ""),
        hyper=hyper,
        minimization_proto=proto,
        max_categories=max_categories,
        cdd_bins=cdd_bins,
        model_shared_externally=bool(raw.get("model_shared_externally", False)),
        risk_override=risk_override,
        transform_order=order,
        prune=prune,
    )


def spec_to_dict(spec: RunSpec) -> dict:
    """Serialize a RunSpec back into the JSON document shape."""
    out = {
        "name": spec.name,
        "requirements": [
            {"id": r.id, "name": r.name, "evaluation": r.evaluation} for r in spec.requirements
        ],
        "operationalizations": [
            {
                "id": op.id,
                "requirement": op.requirement,
                "index": op.index,
                "kind": op.kind,
                "label": op.label,
                "params": dict(op.params),
                "includes": list(op.includes),
            }
            for op in spec.operationalizations
        ],
        "rules": [
            {"kind": r.kind, "antecedent": list(r.antecedent), "consequent": list(r.consequent)}
            for r in spec.rules
        ],
        "protected_feature": spec.protected_feature,
        "strata_features": list(spec.strata_features),
        "split": list(spec.split),
        "seed": spec.seed,
        "selection": selection_to_dict(spec.selection),
        "hyper": {k: dict(v) for k, v in spec.hyper.items()},
        "minimization_proto": {k: dict(v) for k, v in spec.minimization_proto.items()},
        "max_categories": spec.max_categories,
        "cdd_bins": spec.cdd_bins,
        "model_shared_externally": spec.model_shared_externally,
        "risk_override": spec.risk_override,
        "transform_order": spec.transform_order,
    }
    if spec.prune is not None:
        out["prune"] = {"max_count": spec.prune["max_count"],
                        "scores": {str(k): v for k, v in spec.prune["scores"].items()}}
    return out


def load_spec(path) -> RunSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from exc
    return validate_spec(raw)


def resource_path(name) -> Path:
    return Path(__file__).parent / "resources" / name


def case_study_spec() -> RunSpec:
    """The shipped five-requirement AML case-study spec."""
    return load_spec(resource_path("case_study.json"))
