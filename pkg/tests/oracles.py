"""Independent reference implementations used only by the tests."""

import itertools

import numpy as np


def cdd_bruteforce(pred, protected, strata, group):
    """Count-based CDD with plain Python loops."""
    n = len(pred)
    total = 0.0
    for key in sorted(set(strata)):
        rows = [i for i in range(n) if strata[i] == key]
        adv = [i for i in rows if pred[i] == 1]
        fav = [i for i in rows if pred[i] == 0]
        if not adv or not fav:
            continue
        share_adv = sum(1 for i in adv if protected[i] == group) / len(adv)
        share_fav = sum(1 for i in fav if protected[i] == group) / len(fav)
        total += len(rows) / n * (share_adv - share_fav)
    return total


def pareto_bruteforce(points, senses):
    """Indices of non-dominated rows; ``senses`` is +1 (maximize) or -1 (minimize)."""
    front = []
    for i, p in enumerate(points):
        dominated = False
        for j, q in enumerate(points):
            if i == j:
                continue
            ge = all(s * qa >= s * pa for qa, pa, s in zip(q, p, senses))
            gt = any(s * qa > s * pa for qa, pa, s in zip(q, p, senses))
            if ge and gt:
                dominated = True
                break
        if not dominated:
            front.append(i)
    return front


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def all_index_combinations(sizes):
    return list(itertools.product(*[range(1, s + 1) for s in sizes]))
