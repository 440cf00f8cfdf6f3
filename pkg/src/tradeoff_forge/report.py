"""Markdown justification report, rendered only from persisted run content."""

from __future__ import annotations

import math

from .core import DIMENSIONS, RunSpec
from .trademap import Selection, TradeoffTable, describe_threshold, pareto_front

EVALUATION_RATIONALE = {
    "cdd": "Conditional demographic disparity of test predictions across the protected "
           "feature, stratified by the configured strata. Values near 0 indicate parity.",
    "data-usage+k-anon": "Share of the training pool actually used after minimization, "
                         "and whether the training data is k-anonymous.",
    "risk-category": "Qualitative re-identification likelihood derived from the applied "
                     "anonymization and the model's exposure.",
    "explainability-category": "Qualitative explainability of the chosen model family.",
    "recall": "Share of true positives detected on the test split.",
    "perf-panel": "Accuracy, precision, recall and F1 on the test split.",
}

NON_EVALUATED_RISKS = (
    "Re-identification risk is a qualitative category, not a measured attack success rate.",
    "Disparity is measured for the configured protected feature only; other protected "
    "characteristics and their intersections are not assessed.",
    "No significance testing is applied to the disparity or performance figures.",
    "Lawful basis, purpose limitation, retention and data-subject rights are outside the "
    "scope of this assessment.",
    "Passing every threshold does not remove the obligation to adopt further mitigating "
    "measures and to monitor the deployed model.",
)


def _fmt(v, digits=4):
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return "n/a" if math.isnan(v) else f"{v:.{digits}f}"
    return str(v)


def _outcome(evaluation, rec, metrics):
    if evaluation == "cdd":
        return f"CDD = {_fmt(rec.cdd)} (|CDD| = {_fmt(abs(rec.cdd))})"
    if evaluation == "data-usage+k-anon":
        k = metrics.get("k_anonymity", {}) if metrics else {}
        extra = f", smallest class {rec.k_min_class}" if rec.k_min_class is not None else ""
        return (f"{_fmt(rec.data_used_pct, 2)}% of the training pool used; "
                f"k-anonymous: {'Yes' if rec.k_anon else 'No'}"
                + (f" (k = {k.get('k')}{extra})" if k.get("applied") else ""))
    if evaluation == "risk-category":
        src = metrics.get("risk", {}).get("source", "") if metrics else ""
        return f"{rec.risk_category} ({src})" if src else rec.risk_category
    if evaluation == "explainability-category":
        return rec.explainability_category
    if evaluation == "recall":
        return f"recall = {_fmt(rec.recall)}"
    return (f"accuracy = {_fmt(rec.accuracy)}, precision = {_fmt(rec.precision)}, "
            f"recall = {_fmt(rec.recall)}, F1 = {_fmt(rec.f1)}")


def _params(params):
    if not params:
        return "none"
    return ", ".join(f"{k} = {v}" for k, v in sorted(params.items()))


# recall plus the legal dimensions; accuracy-type metrics are context only
PARETO_DIMENSIONS = ("recall", "cdd", "data_used_pct", "k_anon", "risk_category",
                     "explainability_category")


def report_directions(spec: RunSpec):
    return {d: spec.selection.directions.get(d, DIMENSIONS[d]) for d in PARETO_DIMENSIONS}


def render_report(selection: Selection, table: TradeoffTable, spec: RunSpec, artifacts) -> str:
    """Markdown report; ``artifacts`` maps set id to its persisted metrics document."""
    records = {r.set_id: r for r in table.records}
    chosen = records.get(selection.chosen) if selection.chosen is not None else None
    policy = spec.selection
    out = [f"# Model selection report: {spec.name or 'unnamed run'}", ""]

    out += ["## Selection", ""]
    if chosen is None:
        out.append("No model meets the selection thresholds.")
        if selection.binding:
            out += ["", "Binding constraints:"] + [f"- {b}" for b in selection.binding]
    else:
        out.append(f"Chosen: **Set {chosen.set_id}**.")
        out.append(f"Feasible sets: {', '.join(f'Set {i}' for i in selection.feasible)}.")
        if policy.rule == "lexicographic":
            order = ", ".join(f"{d} ({s})" for d, s in policy.order)
            out.append(f"Ranking: lexicographic over {order}; ties go to the lower set id.")
        else:
            w = ", ".join(f"{d} = {v:g}" for d, v in sorted(policy.weights.items()))
            out.append(f"Ranking: weighted min-max normalized score with weights {w}.")
        if abs(chosen.cdd) > policy.cdd_soft_limit:
            out += ["", f"**Monitoring recommended**: |CDD| = {_fmt(abs(chosen.cdd))} exceeds "
                        f"the soft limit {policy.cdd_soft_limit:g}."]
    out.append("")

    out += ["## Legal requirements", ""]
    for req in spec.requirements:
        out += [f"### {req.name}", ""]
        out.append(f"Evaluation: `{req.evaluation}`. {EVALUATION_RATIONALE[req.evaluation]}")
        out.append("")
        if chosen is None:
            out.append("No set selected; see the trade-off table for every outcome.")
        else:
            metrics = artifacts.get(chosen.set_id, {})
            idx = metrics.get("choices", {}).get(req.id)
            if idx is not None:
                op = spec.op(req.id, idx)
                label = op.label or op.kind
                out.append(f"- Operationalization ({idx}): {label}")
                out.append(f"- Kind: `{op.kind}`; parameters: {_params(op.params)}")
                if op.includes:
                    out.append(f"- Also applies: {', '.join(f'({i})' for i in op.includes)}")
            out.append(f"- Outcome: {_outcome(req.evaluation, chosen, metrics)}")
        out += ["", "Legal assessment: _to be completed by the responsible reviewer._", ""]

    out += ["## Trade-off table", "", table.to_markdown()]

    ok = [r for r in table.records if r.ok]
    out += ["## Pareto front", ""]
    if ok:
        directions = report_directions(spec)
        front = pareto_front(ok, directions)
        dims = ", ".join(f"{d} ({s})" for d, s in directions.items())
        out.append(f"Dimensions: {dims}.")
        out.append(f"Non-dominated sets: {', '.join(f'Set {i}' for i in front)}.")
    else:
        out.append("No successful set to compare.")
    out.append("")

    out += ["## Threshold checks", ""]
    labels = [describe_threshold(t) for t in policy.thresholds]
    if any(not r.ok for r in table.records):
        labels.append("status == ok")
    if labels:
        out.append("| Set | " + " | ".join(labels) + " |")
        out.append("|---|" + "|".join([":---:"] * len(labels)) + "|")
        for sid in sorted(selection.matrix):
            row = selection.matrix[sid]
            cells = ["pass" if row.get(lab, True) else "fail" for lab in labels]
            out.append(f"| Set {sid} | " + " | ".join(cells) + " |")
    else:
        out.append("No hard thresholds configured.")
    out.append("")

    out += ["## Implementation choices", ""]
    out.append(f"- Transform order: {spec.transform_order}; the feature drop always comes "
               "first and the reject option always comes last.")
    for op in spec.operationalizations:
        if op.kind == "data-minimization":
            p = op.params
            out.append(f"- Minimization stops at the first step whose weighted validation loss slope over the last "
                       f"{p['window']} batches of {p['batch_size']} rows is at least "
                       f"{p['stopping_threshold']} per row.")
        if op.kind == "reject-option":
            out.append(f"- Reject-option theta is tuned on the validation split; the allowed "
                       f"recall drop is {op.params['epsilon']:g}.")
    for sid in sorted(artifacts):
        ro = artifacts[sid].get("reject_option")
        if ro:
            out.append(f"- Set {sid}: theta = {ro['theta']:g}, unprivileged group "
                       f"{ro['unprivileged']}.")
    out.append(f"- Disparity strata: {', '.join(spec.strata_features)}; numeric strata "
               f"features use {spec.cdd_bins} quantile bins computed on the test split.")
    out.append("- Risk and explainability are rule-based categories, not measurements.")
    out.append("")

    failed = [r for r in table.records if not r.ok]
    if failed:
        out += ["## Failed sets", ""] + [f"- Set {r.set_id}: {'; '.join(r.notes)}" for r in failed]
        out.append("")

    out += ["## Risks not evaluated", ""] + [f"- {r}" for r in NON_EVALUATED_RISKS]
    return "\n".join(out) + "\n"
