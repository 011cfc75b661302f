"""Shared oracles for the test-suite."""

import numpy as np


def central_difference(f, arr, h=1e-6):
    """Numerical gradient of scalar ``f()`` w.r.t. ``arr``, perturbed in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        up = f()
        arr[i] = old - h
        down = f()
        arr[i] = old
        grad[i] = (up - down) / (2 * h)
    return grad


def rel_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def per_example_f1(pred_sets, gold_sets):
    """Token-F1 from explicit position sets, averaged over examples."""
    scores = []
    for p, g in zip(pred_sets, gold_sets):
        if not p and not g:
            scores.append(1.0)
            continue
        tp = len(p & g)
        scores.append(2 * tp / (len(p) + len(g)))
    return 100 * sum(scores) / len(scores)


def micro_f1(pred_sets, gold_sets):
    tp = sum(len(p & g) for p, g in zip(pred_sets, gold_sets))
    denom = sum(len(p) + len(g) for p, g in zip(pred_sets, gold_sets))
    return 0.0 if denom == 0 else 100 * 2 * tp / denom
