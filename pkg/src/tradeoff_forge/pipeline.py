"""Per-set orchestration and run artifacts.

``execute_set`` applies one operationalization set in the canonical order
(drop, anonymize, minimize, weight, train, post-process) and evaluates on the
test split. ``execute_run`` splits the data once, executes every feasible set
and persists everything under one content-addressed run directory.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .anonymity import apply_anonymizer, fit_anonymizer, verify_k_anonymity
from .core import RunSpec, spec_to_dict
from .data import DEFAULT_QUASI_IDENTIFIERS, Dataset, validate_dataset
from .errors import DegenerateData, NoPositives, SpecError, TradeoffForgeError
from .metrics import (
    cdd,
    confusion,
    data_usage,
    explainability_category,
    perf_panel,
    risk_category,
    strata_keys,
)
from .models import model_to_dict, predict_proba, train_model
from .postprocess import apply_reject_option, tune_theta, unprivileged_group
from .setform import enumerate_sets, prune_sets
from .synthgen import split
from .trademap import TradeoffRecord, build_table, select
from .transforms import class_weights, drop_features, minimize_data

SET_ARTIFACTS = ("model", "metrics", "trace", "genmap")


def set_seed(global_seed, set_id) -> int:
    """Per-set seed, independent of execution order."""
    return int(np.random.SeedSequence([int(global_seed), int(set_id)]).generate_state(1)[0])


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, NaN as null, numpy scalars as Python numbers."""
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, np.generic):
            o = o.item()
        if isinstance(o, np.ndarray):
            return clean(o.tolist())
        if isinstance(o, float) and not math.isfinite(o):
            return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
        return o
    return json.dumps(clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class SetResult:
    record: TradeoffRecord
    artifacts: dict = field(default_factory=dict)


class _Proto:
    """Lightweight retraining prototype for the minimization loop."""

    def __init__(self, family, hyper, weighting, max_categories):
        self.family = family
        self.hyper = hyper
        self.weighting = weighting
        self.max_categories = max_categories

    def fit(self, dataset):
        y = dataset.labels
        if len(np.unique(y)) < 2:
            raise DegenerateData("single-class training prefix")
        try:
            w = class_weights(y, self.weighting) if self.weighting else None
        except NoPositives as exc:
            raise DegenerateData(str(exc)) from exc
        return train_model(self.family, dataset, w, self.hyper, self.max_categories)


def _expand(opset, spec):
    """Chosen operationalizations plus the ones they include, included first."""
    out = []
    for rid, op in opset.choices.items():
        for idx in op.includes:
            out.append(spec.op(rid, idx))
        out.append(op)
    return out


def _kinds(ops, kind):
    return [op for op in ops if op.kind == kind]


def execute_set(opset, data, spec: RunSpec, seed=None) -> SetResult:
    """Train and evaluate one set; any error becomes a failed record."""
    seed = set_seed(spec.seed, opset.set_id) if seed is None else int(seed)
    try:
        return _execute(opset, data, spec, seed)
    except (TradeoffForgeError, ValueError, KeyError) as exc:
        note = f"set {opset.set_id}: {type(exc).__name__}: {exc}"
        return SetResult(TradeoffRecord(opset.set_id, status="failed", notes=[note]),
                         {"metrics": {"set_id": opset.set_id, "status": "failed", "error": note}})


_HANDLED = {"feature-drop", "reject-option", "data-minimization", "k-anonymity", "no-op",
            "model-family", "class-weighting"}


def _execute(opset, data, spec, seed):
    train, valid, test = data
    ops = _expand(opset, spec)
    unknown = sorted({op.kind for op in ops} - _HANDLED)
    if unknown:
        raise ValueError(f"unimplemented operationalization kind(s): {unknown}")
    families = _kinds(ops, "model-family")
    if len(families) != 1:
        raise ValueError("a set must choose exactly one model family")
    family = families[0].params["family"]
    hyper = {**spec.hyper.get(family, {}), **families[0].params.get("hyper", {})}
    if family == "forest":
        hyper["seed"] = seed
    weighting = next((dict(op.params) for op in _kinds(ops, "class-weighting")), None)
    notes = []
    prot_name = spec.protected_feature

    # evaluation context comes from untouched rows
    numeric = {f.name for f in test.schema if f.kind == "numeric"}
    strata_valid = strata_keys(valid.frame, spec.strata_features, numeric, spec.cdd_bins)
    strata_test = strata_keys(test.frame, spec.strata_features, numeric, spec.cdd_bins)
    prot_valid = valid.frame[prot_name].to_numpy(dtype=object)
    prot_test = test.frame[prot_name].to_numpy(dtype=object)
    unpriv = unprivileged_group(train.frame[prot_name].to_numpy(dtype=object), train.labels)

    # (1) feature drop
    dropped = sorted({f for op in _kinds(ops, "feature-drop") for f in op.params["features"]})
    if dropped:
        train, valid, test = (drop_features(d, dropped) for d in (train, valid, test))

    # (2) k-anonymity settings (several k-anonymity choices merge: max k, union of QIs)
    kanon = _kinds(ops, "k-anonymity")
    k = max((op.params["k"] for op in kanon), default=None)
    visible = {f.name for f in train.visible_features}
    qis = []
    for op in kanon:
        for q in op.params.get("quasi_identifiers", DEFAULT_QUASI_IDENTIFIERS):
            if q in visible and q not in qis:
                qis.append(q)
    if kanon and not qis:
        raise ValueError("k-anonymity chosen but no quasi-identifier is visible to the model")

    minim = _kinds(ops, "data-minimization")
    genmap = None
    trace = None
    anonymizer = None

    def anonymize(pool):
        nonlocal anonymizer
        anonymizer = fit_anonymizer(pool, qis, k)
        return anonymizer

    def minimize(pool, groups):
        p = minim[0].params
        thr = p["stopping_threshold"]
        thr = -math.inf if thr == "-inf" else float(thr)
        proto_hyper = {**hyper, **spec.minimization_proto.get(family, {})}
        proto = _Proto(family, proto_hyper, weighting, spec.max_categories)
        vw = class_weights(valid.labels, weighting) if weighting else None
        return minimize_data(pool, proto, thr, p["batch_size"], seed, valid,
                             window=p["window"], groups=groups, valid_weights=vw)

    if spec.transform_order == "anonymize-first":
        groups = None
        if kanon:
            anonymize(train)
            # equivalence classes keep minimized subsets k-anonymous
            groups = anonymizer.apply(train.frame)
            train, valid, test = (apply_anonymizer(anonymizer, d) for d in (train, valid, test))
        if minim:
            train, trace = minimize(train, groups)
    else:
        if minim:
            train, trace = minimize(train, None)
        if kanon:
            anonymize(train)
            train, valid, test = (apply_anonymizer(anonymizer, d) for d in (train, valid, test))
    if kanon:
        genmap = anonymizer.to_dict()
        notes.append(f"k-anonymity k={k} on {len(qis)} quasi-identifiers")
    k_min = verify_k_anonymity(train, qis) if kanon else None

    # (4) weights, (5) training
    weights = class_weights(train.labels, weighting) if weighting else None
    model = train_model(family, train, weights, hyper, spec.max_categories)
    p_valid = predict_proba(model, valid)
    p_test = predict_proba(model, test)

    # (6) reject option, tuned on validation only
    ro = _kinds(ops, "reject-option")
    theta_doc = None
    if ro:
        params = ro[0].params
        if params.get("theta") is not None:
            from .postprocess import RejectOptionRule
            rule, table = RejectOptionRule(float(params["theta"]), unpriv), []
        else:
            rule, table = tune_theta(p_valid, prot_valid, valid.labels, strata_valid,
                                     params["epsilon"], unpriv)
        pred = apply_reject_option(p_test, prot_test, rule)
        theta_doc = {"theta": rule.theta, "unprivileged": rule.unprivileged,
                     "epsilon": params.get("epsilon"), "validation_grid": table}
        notes.append(f"reject-option theta={rule.theta:g}")
    else:
        pred = (p_test > 0.5).astype(np.int64)

    perf = perf_panel(confusion(test.labels, pred))
    disparity = cdd(pred, prot_test, strata_test, unpriv)
    fraction = trace.fraction_used if trace is not None else 1.0
    _, raw_pct = data_usage(fraction)
    risk, risk_source = risk_category(opset, spec)
    record = TradeoffRecord(
        set_id=opset.set_id,
        accuracy=perf["accuracy"],
        precision=perf["precision"],
        f1=perf["f1"],
        recall=perf["recall"],
        data_used_pct=raw_pct,
        k_anon=bool(kanon) and k_min is not None and k_min >= k,
        k_min_class=k_min,
        cdd=disparity.cdd,
        risk_category=risk,
        explainability_category=explainability_category(family),
        notes=notes,
    )
    metrics_doc = {
        "set_id": opset.set_id,
        "status": "ok",
        "seed": seed,
        "choices": {rid: op.index for rid, op in opset.choices.items()},
        "performance": perf,
        "cdd": disparity.to_dict(),
        "data_usage": {"fraction_used": fraction, "percent": raw_pct,
                       "training_rows": len(train)},
        "k_anonymity": {"applied": bool(kanon), "k": k, "quasi_identifiers": qis,
                        "min_class_size": k_min},
        "risk": {"category": risk, "source": risk_source},
        "explainability": {"family": family, "category": record.explainability_category},
        "reject_option": theta_doc,
        "dropped_features": dropped,
        "provenance": list(train.provenance),
        "record": record.to_dict(),
    }
    artifacts = {
        "model": model_to_dict(model),
        "metrics": metrics_doc,
        "trace": trace.to_dict() if trace is not None else None,
        "genmap": genmap,
    }
    return SetResult(record, artifacts)


# --------------------------------------------------------------------------
# run level

@dataclass
class RunArtifacts:
    run_id: str
    records: list
    seeds: dict
    spec_snapshot: str
    provenance: list
    directory: Path | None = None
    dataset_digest: str = ""
    set_artifacts: dict = field(default_factory=dict)


def dataset_digest(dataset: Dataset) -> str:
    return hashlib.sha256(dataset.frame.to_csv(index=False).encode("utf-8")).hexdigest()


def run_id_for(snapshot: str, digest: str) -> str:
    return hashlib.sha256((snapshot + digest).encode("utf-8")).hexdigest()[:12]


def _run_one(args):
    opset, data, spec = args
    return execute_set(opset, data, spec)


def execute_run(spec: RunSpec, dataset: Dataset, out=None, parallel=1) -> RunArtifacts:
    """Execute every feasible set; persist artifacts under ``out/<run-id>`` if given."""
    problems = validate_dataset(dataset, spec)
    if problems:
        raise SpecError("; ".join(problems), "dataset")
    data = split(dataset, spec.split, spec.seed)
    sets = enumerate_sets(spec)
    if spec.prune:
        sets = prune_sets(sets, spec.prune["max_count"], spec.prune.get("scores"))
    jobs = [(s, data, spec) for s in sets]
    if parallel and parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=int(parallel)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    snapshot = dumps(spec_to_dict(spec))
    digest = dataset_digest(dataset)
    run = RunArtifacts(
        run_id=run_id_for(snapshot, digest),
        records=[r.record for r in results],
        seeds={s.set_id: set_seed(spec.seed, s.set_id) for s in sets},
        spec_snapshot=snapshot,
        provenance=list(dataset.provenance),
        dataset_digest=digest,
        set_artifacts={r.record.set_id: r.artifacts for r in results},
    )
    if out is not None:
        write_run(run, spec, Path(out))
    return run


def write_run(run: RunArtifacts, spec: RunSpec, root: Path) -> Path:
    from .report import render_report

    directory = root / run.run_id
    (directory / "sets").mkdir(parents=True, exist_ok=True)
    (directory / "spec.snapshot").write_text(run.spec_snapshot, encoding="utf-8")
    index = {
        "run_id": run.run_id,
        "dataset_sha256": run.dataset_digest,
        "dataset_provenance": run.provenance,
        "seed": spec.seed,
        "set_seeds": {str(k): v for k, v in run.seeds.items()},
        "sets": [r.set_id for r in run.records],
    }
    for sid, arts in run.set_artifacts.items():
        d = directory / "sets" / str(sid)
        d.mkdir(parents=True, exist_ok=True)
        for name in SET_ARTIFACTS:
            if arts.get(name) is not None:
                (d / f"{name}.json").write_text(dumps(arts[name]), encoding="utf-8")
    table = build_table(run.records)
    (directory / "tradeoff.csv").write_bytes(table.to_csv().encode("utf-8"))
    (directory / "tradeoff.md").write_text(table.to_markdown(), encoding="utf-8")
    (directory / "tradeoff.json").write_text(table.to_json(), encoding="utf-8")
    (directory / "index.json").write_text(dumps(index), encoding="utf-8")
    run.directory = directory
    # render from what was persisted so a later re-render is byte-identical
    loaded = load_run(directory)
    selection = select(loaded.records, loaded.spec.selection)
    (directory / "report.md").write_text(
        render_report(selection, build_table(loaded.records), loaded.spec, loaded.metrics),
        encoding="utf-8")
    return directory


@dataclass
class LoadedRun:
    directory: Path
    spec: RunSpec
    records: list
    metrics: dict
    index: dict


def load_run(directory) -> LoadedRun:
    """Read a run directory back into spec, records and per-set metrics."""
    from .core import validate_spec

    directory = Path(directory)
    spec = validate_spec(json.loads((directory / "spec.snapshot").read_text(encoding="utf-8")))
    rows = json.loads((directory / "tradeoff.json").read_text(encoding="utf-8"))
    records = [TradeoffRecord.from_dict(r) for r in rows]
    metrics = {}
    for r in records:
        path = directory / "sets" / str(r.set_id) / "metrics.json"
        if path.exists():
            metrics[r.set_id] = json.loads(path.read_text(encoding="utf-8"))
    index = json.loads((directory / "index.json").read_text(encoding="utf-8"))
    return LoadedRun(directory, spec, records, metrics, index)
