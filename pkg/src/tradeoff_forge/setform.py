"""Operationalization-set enumeration under compatibility rules."""

from __future__ import annotations

import csv
import io
import itertools
import json

from .core import CompatibilityRule, OperationalizationSet, RunSpec
from .errors import EmptyResult


def _matches(indices, pair):
    req, idx = pair
    return indices.get(req) == idx


def check_set(opset: OperationalizationSet, rules) -> list[CompatibilityRule]:
    """Return the rules violated by ``opset`` (empty when compatible)."""
    indices = opset.indices()
    violated = []
    for rule in rules:
        hit = _matches(indices, rule.antecedent)
        if rule.kind == "implies" and hit and not _matches(indices, rule.consequent):
            violated.append(rule)
        elif rule.kind == "excludes" and hit and _matches(indices, rule.consequent):
            violated.append(rule)
    return violated


def enumerate_sets(spec: RunSpec, rules=None) -> list[OperationalizationSet]:
    """Every rule-compatible combination, one operationalization per requirement.

    Ordering is lexicographic: the first requirement varies slowest, and within
    a requirement operationalizations are taken by ascending index. Set ids
    are assigned 1..n in that order.
    """
    rules = spec.rules if rules is None else rules
    req_ids = [r.id for r in spec.requirements]
    per_req = [sorted(spec.ops_for(rid), key=lambda op: op.index) for rid in req_ids]
    sets = []
    for combo in itertools.product(*per_req):
        candidate = OperationalizationSet(0, dict(zip(req_ids, combo)))
        if not check_set(candidate, rules):
            sets.append(OperationalizationSet(len(sets) + 1, candidate.choices))
    if not sets:
        raise EmptyResult("compatibility rules eliminate every combination")
    return sets


def prune_sets(sets, max_count, scores=None):
    """Keep at most ``max_count`` sets.

    With ``scores`` (set_id -> anticipated legal alignment, higher first) the
    sets are ranked by score, ties keeping enumeration order; without scores
    the first ``max_count`` sets in enumeration order are kept.
    """
    if max_count < 1:
        raise ValueError("max_count must be ≥ 1")
    if not scores:
        return list(sets[:max_count])
    ranked = sorted(enumerate(sets), key=lambda t: (-scores.get(t[1].set_id, 0.0), t[0]))
    return [s for _, s in ranked[:max_count]]


def set_matrix(spec: RunSpec, sets):
    """Rows = requirements, columns = sets, cells = 1-based indices."""
    return [[s.index_of(r.id) for s in sets] for r in spec.requirements]


def render_plan(spec: RunSpec, sets, fmt="md") -> str:
    matrix = set_matrix(spec, sets)
    header = ["Legal Requirement"] + [f"Set {s.set_id}" for s in sets]
    if fmt == "json":
        doc = {
            "sets": [
                {"set_id": s.set_id, "choices": {rid: op.index for rid, op in s.choices.items()}}
                for s in sets
            ],
            "requirements": [r.id for r in spec.requirements],
            "matrix": matrix,
        }
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for req, row in zip(spec.requirements, matrix):
            writer.writerow([req.name] + row)
        return buf.getvalue()
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join(["---"] * len(header)) + "|"]
    for req, row in zip(spec.requirements, matrix):
        lines.append("| " + " | ".join([f"**{req.name}**"] + [f"({i})" for i in row]) + " |")
    return "\n".join(lines) + "\n"
