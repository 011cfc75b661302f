"""Classification and highlight metrics, string-matching baselines,
the signed-rank test and the fitness-landscape grid."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata
from sklearn.metrics import f1_score

from .data import Example
from .datagen import find_occurrences
from .exceptions import InvalidInputError


@dataclass(frozen=True)
class MetricsReport:
    clf_f1: float
    hl_f1: float
    ratio_R: float
    size_S: float
    n_examples: int

    def as_dict(self) -> Dict[str, float]:
        return {"clf_f1": self.clf_f1, "hl_f1": self.hl_f1, "ratio_R": self.ratio_R,
                "size_S": self.size_S, "n_examples": self.n_examples}


def macro_f1(preds, labels, num_classes: int) -> float:
    """Unweighted mean of per-class F1 in percent; absent classes score 0."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.size == 0:
        raise InvalidInputError("macro_f1 needs at least one example")
    if preds.shape != labels.shape:
        raise InvalidInputError("preds and labels differ in length")
    if np.any((preds < 0) | (preds >= num_classes)) or np.any((labels < 0) | (labels >= num_classes)):
        raise InvalidInputError(f"class indices must lie in [0, {num_classes})")
    return 100.0 * float(f1_score(labels, preds, labels=list(range(num_classes)),
                                  average="macro", zero_division=0))


def _as_mask_list(masks, lengths=None) -> List[np.ndarray]:
    if isinstance(masks, np.ndarray) and masks.ndim == 2:
        if lengths is None:
            return [m.astype(bool) for m in masks]
        return [m[:n].astype(bool) for m, n in zip(masks, lengths)]
    return [np.asarray(m, dtype=bool) for m in masks]


def token_f1(pred_masks, gold_masks, lengths=None, average: str = "example") -> float:
    """Token-level F1 of selected positions against gold, in percent.

    ``average="example"`` computes F1 per example and averages (an example
    with both masks empty counts as 1); ``average="micro"`` pools counts
    over every position of the corpus (all-empty corpus gives 0). Padded
    2-D arrays are trimmed with ``lengths`` when given.
    """
    preds = _as_mask_list(pred_masks, lengths)
    golds = _as_mask_list(gold_masks, lengths)
    if len(preds) != len(golds):
        raise InvalidInputError("prediction and gold lists differ in length")
    if not preds:
        raise InvalidInputError("token_f1 needs at least one example")
    tps, nps, ngs = [], [], []
    for i, (p, g) in enumerate(zip(preds, golds)):
        if p.shape != g.shape:
            raise InvalidInputError(f"example {i}: mask lengths {p.shape} and {g.shape} differ")
        tps.append(int((p & g).sum()))
        nps.append(int(p.sum()))
        ngs.append(int(g.sum()))
    tp, npred, ngold = np.array(tps), np.array(nps), np.array(ngs)
    if average == "micro":
        denom = npred.sum() + ngold.sum()
        return 0.0 if denom == 0 else 100.0 * 2.0 * tp.sum() / denom
    if average == "example":
        denom = npred + ngold
        per = np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1), 1.0)
        return 100.0 * float(per.mean())
    raise InvalidInputError(f"unknown averaging {average!r}")


def selection_stats(pred_masks, lengths=None) -> Tuple[float, float]:
    """(R, S): mean selected fraction in percent and mean selected count."""
    masks = _as_mask_list(pred_masks, lengths)
    if not masks:
        return 0.0, 0.0
    counts = np.array([m.sum() for m in masks], dtype=np.float64)
    sizes = np.array([max(m.size, 1) for m in masks], dtype=np.float64)
    return 100.0 * float((counts / sizes).mean()), float(counts.mean())


def pattern_mask(text: str, pattern: str) -> np.ndarray:
    """Mark every (possibly overlapping) occurrence of ``pattern`` in ``text``."""
    m = np.zeros(len(text), dtype=bool)
    for s in find_occurrences(text, pattern):
        m[s:s + len(pattern)] = True
    return m


def string_match_baseline(pattern_map: Mapping[int, str], examples: Sequence[Example],
                          vocab=None, average: str = "example") -> MetricsReport:
    """Highlight each example by matching its label's pattern.

    ``pattern_map`` is keyed by label index. Tokens are rendered through
    ``vocab`` when given, otherwise taken as single-character strings.
    Classification is taken as perfect (the labels are used).
    """
    if any(not p for p in pattern_map.values()):
        raise InvalidInputError("patterns must be non-empty")
    preds, golds = [], []
    for ex in examples:
        if ex.gold_mask is None:
            raise InvalidInputError("string-matching needs gold highlights")
        toks = vocab.decode(ex.tokens) if vocab is not None else ex.tokens
        text = "".join(str(t) for t in toks)
        preds.append(pattern_mask(text, pattern_map[ex.label]))
        golds.append(np.asarray(ex.gold_mask, dtype=bool))
    R, S = selection_stats(preds)
    return MetricsReport(100.0, token_f1(preds, golds, average=average), R, S, len(preds))


# --- signed-rank test ----------------------------------------------------------

def _signed_ranks(a, b):
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if d.ndim != 1:
        raise InvalidInputError("paired samples must be 1-D")
    d = d[d != 0]
    ranks = rankdata(np.abs(d))
    return d, ranks


def wilcoxon_statistic(a, b) -> float:
    """Sum of ranks of positive differences."""
    if len(a) != len(b):
        raise InvalidInputError("paired samples differ in length")
    d, ranks = _signed_ranks(a, b)
    return float(ranks[d > 0].sum())


def _exact_upper_lower(ranks2: np.ndarray, w2: int) -> Tuple[float, float]:
    # distribution of twice the positive-rank sum under random signs
    total = int(ranks2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r]
        counts += shifted
    counts /= counts.sum()
    cdf = np.cumsum(counts)
    lower = cdf[w2]
    upper = 1.0 - (cdf[w2 - 1] if w2 > 0 else 0.0)
    return float(lower), float(upper)


def wilcoxon_signed_rank(a, b, method: str = "auto") -> float:
    """Two-sided p-value of the paired signed-rank test.

    Zero differences are dropped and tied magnitudes get average ranks.
    ``method="auto"`` uses the exact null for up to 25 non-zero pairs and
    the continuity-corrected normal approximation above that.
    """
    if len(a) != len(b):
        raise InvalidInputError("paired samples differ in length")
    d, ranks = _signed_ranks(a, b)
    n = d.size
    if n == 0:
        return 1.0
    if n < 5:
        raise InvalidInputError("signed-rank test needs at least 5 non-zero differences")
    w = ranks[d > 0].sum()
    if method == "auto":
        method = "exact" if n <= 25 else "normal"
    if method == "exact":
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        lower, upper = _exact_upper_lower(ranks2, int(round(2 * w)))
        return min(1.0, 2.0 * min(lower, upper))
    if method == "normal":
        mu = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - (tie_counts ** 3 - tie_counts).sum() / 48.0
        if var <= 0:
            return 1.0
        z = max(abs(w - mu) - 0.5, 0.0) / math.sqrt(var)
        return min(1.0, 2.0 * float(norm.sf(z)))
    raise InvalidInputError(f"unknown method {method!r}")


# --- landscape ------------------------------------------------------------------

LANDSCAPE_MARKERS = ((0.0, 1.0), (0.5, 0.5))


def landscape_point(l_t: float, omega: float) -> Tuple[float, float]:
    """(cost with feasibility disabled, mean of task loss and regularizer)."""
    inner = math.sqrt(max(0.0, (1.0 - omega) * (1.0 - min(l_t, 1.0))))
    return 1.0 - inner, (l_t + omega) / 2.0


def loss_landscape_grid(resolution: int = 101) -> List[dict]:
    """Rows over a uniform [0, 1]^2 grid of (task loss, regularizer)."""
    if resolution < 2:
        raise InvalidInputError("resolution must be >= 2")
    axis = np.linspace(0.0, 1.0, int(resolution))
    rows = []
    for lt in axis:
        for om in axis:
            h, e3 = landscape_point(float(lt), float(om))
            marker = any(abs(lt - a) < 1e-12 and abs(om - b) < 1e-12 for a, b in LANDSCAPE_MARKERS)
            rows.append({"l_t": float(lt), "omega": float(om), "h_tilde": h, "mean_cost": e3, "marker": int(marker)})
    return rows


def landscape_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["l_t", "omega", "h_tilde", "mean_cost", "marker"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
