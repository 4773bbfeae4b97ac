"""Confusion-based rates, ROC/AUC analysis, and per-group metric tables.

Score ties are handled so the trapezoidal AUC equals the Mann-Whitney
statistic with half credit for ties, exactly. The "optimal" ROC point is the
Youden-J maximizer (ties broken toward lower FPR, then lower threshold).

Groups in which only one class is present get their undefined rates flagged
as None and are excluded from range computation instead of being fabricated;
a note records each exclusion. The per-metric range is max minus min across
the groups where the metric is defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError

METRIC_NAMES = ("tpr", "tnr", "fnr", "fpr", "balanced_accuracy", "auc")


@dataclass
class ConfusionCounts:
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def positives(self):
        return self.tp + self.fn

    @property
    def negatives(self):
        return self.tn + self.fp


@dataclass
class MetricBundle:
    tpr: float | None = None
    tnr: float | None = None
    fnr: float | None = None
    fpr: float | None = None
    balanced_accuracy: float | None = None
    auc: float | None = None

    def as_dict(self):
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass
class GroupMetricTable:
    bundles: dict
    ranges: dict
    notes: list = field(default_factory=list)


def _validate_binary(name, arr):
    if not np.isin(arr, (0, 1)).all():
        raise DegenerateDataError(f"{name} must contain only 0/1 values")


def confusion(y_true, y_pred):
    """Count tp/fn/tn/fp for aligned binary vectors."""
    yt = np.asarray(y_true)
    yp = np.asarray(y_pred)
    if yt.shape != yp.shape:
        raise DegenerateDataError(
            f"length mismatch: {yt.shape} vs {yp.shape}"
        )
    _validate_binary("y_true", yt)
    _validate_binary("y_pred", yp)
    tp = int(np.sum((yt == 1) & (yp == 1)))
    fn = int(np.sum((yt == 1) & (yp == 0)))
    tn = int(np.sum((yt == 0) & (yp == 0)))
    fp = int(np.sum((yt == 0) & (yp == 1)))
    return ConfusionCounts(tp=tp, fn=fn, tn=tn, fp=fp)


def rates(counts):
    """Exact confusion rates; requires both classes to be represented."""
    if counts.positives == 0:
        raise DegenerateDataError("rates undefined: positive class (long stay) absent")
    if counts.negatives == 0:
        raise DegenerateDataError("rates undefined: negative class (short stay) absent")
    tpr = counts.tp / counts.positives
    tnr = counts.tn / counts.negatives
    return MetricBundle(
        tpr=tpr,
        tnr=tnr,
        fnr=1.0 - tpr,
        fpr=1.0 - tnr,
        balanced_accuracy=(tpr + tnr) / 2.0,
    )


def _partial_rates(counts):
    """Like rates() but flags undefined entries as None instead of raising."""
    bundle = MetricBundle()
    if counts.positives > 0:
        bundle.tpr = counts.tp / counts.positives
        bundle.fnr = 1.0 - bundle.tpr
    if counts.negatives > 0:
        bundle.tnr = counts.tn / counts.negatives
        bundle.fpr = 1.0 - bundle.tnr
    if bundle.tpr is not None and bundle.tnr is not None:
        bundle.balanced_accuracy = (bundle.tpr + bundle.tnr) / 2.0
    return bundle


def _sorted_score_cells(y_true, scores):
    yt = np.asarray(y_true)
    sc = np.asarray(scores, dtype=np.float64)
    if yt.shape != sc.shape:
        raise DegenerateDataError(f"length mismatch: {yt.shape} vs {sc.shape}")
    _validate_binary("y_true", yt)
    n_pos = int(np.sum(yt == 1))
    n_neg = yt.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateDataError("ROC analysis requires both classes present")
    order = np.argsort(-sc, kind="mergesort")
    sc = sc[order]
    yt = yt[order]
    # boundaries after each tied-score block, scanning from the top
    distinct = np.flatnonzero(np.diff(sc) != 0)
    block_ends = np.append(distinct, sc.size - 1)
    cum_tp = np.cumsum(yt == 1)
    cum_fp = np.cumsum(yt == 0)
    return sc, block_ends, cum_tp, cum_fp, n_pos, n_neg


def roc_curve(y_true, scores):
    """ROC points as (fpr, tpr, threshold), one per distinct score plus a
    sentinel above the max; runs from (0,0) to (1,1), tied scores collapse
    into a single threshold."""
    sc, block_ends, cum_tp, cum_fp, n_pos, n_neg = _sorted_score_cells(y_true, scores)
    points = [(0.0, 0.0, float(sc[0]) + 1.0)]
    for end in block_ends:
        points.append(
            (cum_fp[end] / n_neg, cum_tp[end] / n_pos, float(sc[end]))
        )
    return points


def auc(y_true, scores):
    """Trapezoidal area under the ROC curve (equals the Mann-Whitney
    statistic with 0.5 credit for score ties)."""
    points = roc_curve(y_true, scores)
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    return float(np.trapezoid(tpr, fpr))


def optimal_roc_point(y_true, scores):
    """ROC point maximizing Youden's J = tpr - fpr; ties resolved toward
    lower fpr, then lower threshold."""
    best = None
    for fpr, tpr, threshold in roc_curve(y_true, scores):
        j = tpr - fpr
        if (
            best is None
            or j > best[3]
            or (j == best[3] and (fpr, threshold) < (best[0], best[2]))
        ):
            best = (fpr, tpr, threshold, j)
    return best[0], best[1], best[2]


def group_metric_table(y_true, y_pred, groups, scores=None):
    """Per-group metric bundles plus per-metric ranges (max - min).

    Groups where a metric is undefined (single class present) are flagged
    with None, excluded from that metric's range, and noted.
    """
    yt = np.asarray(y_true)
    yp = np.asarray(y_pred)
    gr = np.asarray(groups)
    if not (yt.shape == yp.shape == gr.shape):
        raise DegenerateDataError("y_true, y_pred, groups must be aligned")
    notes = []
    bundles = {}
    for group in sorted(np.unique(gr).tolist()):
        mask = gr == group
        counts = confusion(yt[mask], yp[mask])
        bundle = _partial_rates(counts)
        if scores is not None:
            sc = np.asarray(scores, dtype=np.float64)[mask]
            if counts.positives > 0 and counts.negatives > 0:
                bundle.auc = auc(yt[mask], sc)
        undefined = [m for m in METRIC_NAMES if getattr(bundle, m) is None]
        if scores is None:
            undefined = [m for m in undefined if m != "auc"]
        if undefined:
            notes.append(
                f"group {group!r}: {', '.join(undefined)} undefined "
                "(single class present); excluded from range"
            )
        bundles[group] = bundle
    ranges = {}
    for metric in METRIC_NAMES:
        values = [
            getattr(b, metric) for b in bundles.values() if getattr(b, metric) is not None
        ]
        ranges[metric] = (max(values) - min(values)) if values else None
    if scores is None:
        ranges["auc"] = None
    return GroupMetricTable(bundles=bundles, ranges=ranges, notes=notes)


def metric_range(values):
    """max - min over an iterable of metric values (helper for reports)."""
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return max(vals) - min(vals)
