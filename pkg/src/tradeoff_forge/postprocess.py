"""Reject-option classification as a post-processing step.

Labels: 1 = alert (unfavorable for the account holder), 0 = no alert
(favorable). Inside the low-confidence region ``max(p, 1 - p) <= theta`` the
unprivileged group receives the favorable label and everyone else the
unfavorable one; outside it the usual ``p > 0.5`` decision applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import LengthMismatch, NoFeasibleTheta
from .metrics import cdd, confusion, perf_panel

FAVORABLE = 0
UNFAVORABLE = 1
THETA_GRID = tuple(round(0.51 + 0.01 * i, 2) for i in range(50))


@dataclass(frozen=True)
class RejectOptionRule:
    theta: float
    unprivileged: str
    favorable: int = FAVORABLE

    def __post_init__(self):
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")


def critical_region(probs, theta):
    p = np.asarray(probs, dtype=np.float64)
    return np.maximum(p, 1.0 - p) <= theta


def apply_reject_option(probs, protected_values, rule: RejectOptionRule) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    prot = np.asarray(protected_values, dtype=object)
    if p.shape[0] != prot.shape[0]:
        raise LengthMismatch("probs and protected_values differ in length")
    labels = (p > 0.5).astype(np.int64)
    region = critical_region(p, rule.theta)
    unpriv = np.array([str(v) == str(rule.unprivileged) for v in prot], dtype=bool)
    unfavorable = 1 - rule.favorable
    labels[region & unpriv] = rule.favorable
    labels[region & ~unpriv] = unfavorable
    return labels


def unprivileged_group(protected_values, labels):
    """The group with the highest alert rate; ties go to the first in sorted order."""
    prot = np.asarray(protected_values, dtype=object).astype(str)
    y = np.asarray(labels)
    groups = sorted(set(prot))
    rates = {g: float(y[prot == g].mean()) for g in groups}
    return max(groups, key=lambda g: (rates[g], -groups.index(g)))


def theta_table(probs, protected_values, labels, strata, unprivileged, grid=THETA_GRID):
    """|CDD| and recall for the baseline (theta = 0.5) and every grid theta."""
    rows = []
    for theta in (0.5,) + tuple(grid):
        rule = RejectOptionRule(theta, unprivileged)
        pred = apply_reject_option(probs, protected_values, rule)
        disparity = cdd(pred, protected_values, strata, unprivileged).cdd
        recall = perf_panel(confusion(labels, pred))["recall"]
        rows.append({"theta": theta, "abs_cdd": abs(disparity), "cdd": disparity, "recall": recall})
    return rows


def tune_theta(valid_probs, valid_protected, valid_labels, strata, epsilon=0.02,
               unprivileged=None, grid=THETA_GRID, include_baseline=True):
    """Grid-search theta: minimize |CDD| subject to recall drop <= epsilon.

    Recall drop is measured against theta = 0.5. Ties go to the smaller theta
    (the least intervention). With ``include_baseline`` the baseline itself is
    a candidate, so the result never has larger |CDD| than doing nothing.
    Returns (rule, table).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be ≥ 0")
    if unprivileged is None:
        unprivileged = unprivileged_group(valid_protected, valid_labels)
    table = theta_table(valid_probs, valid_protected, valid_labels, strata, unprivileged, grid)
    base_recall = table[0]["recall"]
    candidates = table if include_baseline else table[1:]
    feasible = [r for r in candidates if base_recall - r["recall"] <= epsilon + 1e-12]
    if not feasible:
        raise NoFeasibleTheta(f"no theta keeps the recall drop within {epsilon}")
    best = min(feasible, key=lambda r: (round(r["abs_cdd"], 12), r["theta"]))
    return RejectOptionRule(best["theta"], unprivileged), table


class RejectOptionClassifier(BaseEstimator):
    """Estimator wrapper around :func:`tune_theta` / :func:`apply_reject_option`.

    ``fit`` takes validation probabilities, protected values, labels and
    strata keys; a fixed ``theta`` skips tuning.
    """

    def __init__(self, epsilon=0.02, theta=None, unprivileged=None):
        self.epsilon = epsilon
        self.theta = theta
        self.unprivileged = unprivileged

    def fit(self, probs, protected, y, strata):
        unpriv = self.unprivileged or unprivileged_group(protected, y)
        if self.theta is not None:
            self.rule_ = RejectOptionRule(float(self.theta), unpriv)
            self.table_ = []
        else:
            self.rule_, self.table_ = tune_theta(probs, protected, y, strata, self.epsilon, unpriv)
        return self

    def predict(self, probs, protected):
        return apply_reject_option(probs, protected, self.rule_)
