"""Bias mitigation: in-processing exponentiated-gradient reductions under an
FNR-parity constraint, and post-processing per-group threshold optimization.

The EG reduction bounds every ordered pairwise FNR difference between groups
by epsilon (the per-group FNR range is <= epsilon exactly when all pairs
satisfy it). One Lagrange multiplier per ordered pair starts at zero, is
seeded by the first positive violation, then updated multiplicatively
(lambda *= exp(step_size * violation)) and projected onto the bounded
simplex {lambda >= 0, sum(lambda) <= multiplier_bound}. Instance weights
follow from the Lagrangian: the positive-class rows of a group with positive
net multiplier are up-weighted (their false negatives cost more), those of a
group at the low end are down-weighted, floored at zero. Iterates share the
learner seed, so they differ only through the weights; with epsilon >= 1 no
pairwise difference can exceed the bound, every multiplier stays zero, and
the ensemble reproduces the unmitigated learner exactly.

The threshold optimizer takes calibration scores from a frozen base scorer
and, over a grid of common target FNR values, picks per-group thresholds
whose calibration FNR is as close to the target as possible from below
(lowest threshold on ties); the target maximizing the mean per-group
balanced accuracy wins. Groups with a single calibration class fall back to
the global balanced-accuracy-optimal threshold, as do unseen groups at
prediction time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import learners, metrics
from .errors import ConfigError, DegenerateDataError, InfeasibleConstraintError


@dataclass
class FairnessConstraint:
    metric: str = "fnr_parity"
    epsilon: float = 0.2
    groups: tuple | None = None

    def __post_init__(self):
        if self.metric != "fnr_parity":
            raise ConfigError(f"unsupported fairness metric {self.metric!r}")
        if not 0.0 < self.epsilon:
            raise ConfigError("epsilon must be positive")


@dataclass
class EGEnsemble:
    iterates: list
    mixture_weights: np.ndarray
    multiplier_trace: list  # lambda vector used by each iterate
    violation_trace: list
    pairs: list
    constraint: FairnessConstraint
    groups: list
    mixture_mode: str
    achieved_fnr_range: float
    slack: float

    def to_json(self):
        doc = {
            "format_version": learners.FORMAT_VERSION,
            "constraint": {
                "metric": self.constraint.metric,
                "epsilon": self.constraint.epsilon,
            },
            "groups": list(self.groups),
            "pairs": [list(p) for p in self.pairs],
            "mixture_mode": self.mixture_mode,
            "mixture_weights": [float(w) for w in self.mixture_weights],
            "multiplier_trace": [[float(v) for v in lam] for lam in self.multiplier_trace],
            "violation_trace": [[float(v) for v in c] for c in self.violation_trace],
            "achieved_fnr_range": self.achieved_fnr_range,
            "slack": self.slack,
            "iterates": [json.loads(m.to_json()) for m in self.iterates],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _group_positive_index(y, groups):
    """Sorted group labels, per-group row indices, per-group positive counts.

    Raises InfeasibleConstraintError naming any group without positives.
    """
    y = np.asarray(y)
    gr = np.asarray(groups)
    order = sorted(np.unique(gr).tolist())
    idx = {g: np.flatnonzero(gr == g) for g in order}
    pos_counts = {}
    for g in order:
        pos = int(np.sum(y[idx[g]] == 1))
        if pos == 0:
            raise InfeasibleConstraintError(
                f"group {g!r} has no positive-class rows; FNR parity infeasible"
            )
        pos_counts[g] = pos
    return order, idx, pos_counts


def _group_fnr(y, preds, idx, order):
    out = np.empty(len(order))
    for k, g in enumerate(order):
        rows = idx[g]
        pos = (np.asarray(y)[rows] == 1)
        out[k] = float(np.mean(np.asarray(preds)[rows][pos] == 0))
    return out


def _weights_from_multipliers(y, groups, order, idx, pos_counts, pairs, lam, n):
    w = np.ones(n, dtype=np.float64)
    if not np.any(lam > 0):
        return w
    net = {g: 0.0 for g in order}
    for j, (ga, gb) in enumerate(pairs):
        net[ga] += lam[j]
        net[gb] -= lam[j]
    y = np.asarray(y)
    for g in order:
        if net[g] == 0.0:
            continue
        rows = idx[g]
        pos_rows = rows[y[rows] == 1]
        w[pos_rows] += n * net[g] / pos_counts[g]
    return np.maximum(w, 0.0)


def fit_exponentiated_gradient(
    learner_config,
    X,
    y,
    groups,
    constraint=None,
    iterations=10,
    step_size=2.0,
    multiplier_bound=10.0,
    mixture_mode="uniform",
    _multiplier_trace=None,
):
    """Train the EG reductions ensemble (see module docstring).

    When ``_multiplier_trace`` is supplied the stored multiplier vectors are
    replayed verbatim instead of being re-derived, reproducing a previous
    fit bit-exactly (see replay_exponentiated_gradient).
    """
    if constraint is None:
        constraint = FairnessConstraint()
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    if mixture_mode not in ("uniform", "best"):
        raise ConfigError("mixture_mode must be 'uniform' or 'best'")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = y.shape[0]
    order, idx, pos_counts = _group_positive_index(y, groups)
    pairs = [(ga, gb) for ga in order for gb in order if ga != gb]
    lam = np.zeros(len(pairs), dtype=np.float64)
    eps = constraint.epsilon

    iterates = []
    multiplier_trace = []
    violation_trace = []
    scores_sum = np.zeros(n, dtype=np.float64)
    iterate_scores = []
    fit_cache = {}  # identical weight vectors yield the identical model
    for t in range(iterations):
        if _multiplier_trace is not None:
            lam = np.asarray(_multiplier_trace[t], dtype=np.float64)
        multiplier_trace.append(lam.copy())
        w = _weights_from_multipliers(y, groups, order, idx, pos_counts, pairs, lam, n)
        key = w.tobytes()
        if key in fit_cache:
            model, scores = fit_cache[key]
        else:
            model = learners.fit(learner_config, X, y, sample_weights=w)
            scores = learners.predict_proba(model, X)
            fit_cache[key] = (model, scores)
        iterates.append(model)
        iterate_scores.append(scores)
        scores_sum += scores
        preds = (scores >= 0.5).astype(np.int64)
        fnr = _group_fnr(y, preds, idx, order)
        fnr_by_group = dict(zip(order, fnr))
        violations = np.array(
            [fnr_by_group[ga] - fnr_by_group[gb] - eps for ga, gb in pairs]
        )
        violation_trace.append(violations)
        if _multiplier_trace is None:
            new_lam = lam.copy()
            for j, c in enumerate(violations):
                if new_lam[j] > 0.0:
                    new_lam[j] *= float(np.exp(step_size * c))
                elif c > 0.0:
                    new_lam[j] = step_size * c
            total = new_lam.sum()
            if total > multiplier_bound:
                new_lam *= multiplier_bound / total
            lam = new_lam

    if mixture_mode == "uniform":
        mixture = np.full(iterations, 1.0 / iterations)
        if all(m is iterates[0] for m in iterates):
            ensemble_scores = iterate_scores[0]  # exact, no averaging drift
        else:
            ensemble_scores = scores_sum / iterations
    else:
        # pick the iterate with the lowest training Lagrangian under the
        # final multipliers
        final_lam = multiplier_trace[-1]
        best_t, best_val = 0, np.inf
        for t, scores in enumerate(iterate_scores):
            preds = (scores >= 0.5).astype(np.int64)
            err = float(np.mean(preds != y))
            value = err + float(np.dot(final_lam, violation_trace[t]))
            if value < best_val - 1e-15:
                best_t, best_val = t, value
        mixture = np.zeros(iterations)
        mixture[best_t] = 1.0
        ensemble_scores = iterate_scores[best_t]

    ensemble_preds = (ensemble_scores >= 0.5).astype(np.int64)
    fnr = _group_fnr(y, ensemble_preds, idx, order)
    achieved_range = float(fnr.max() - fnr.min()) if len(order) > 1 else 0.0
    return EGEnsemble(
        iterates=iterates,
        mixture_weights=mixture,
        multiplier_trace=multiplier_trace,
        violation_trace=violation_trace,
        pairs=pairs,
        constraint=constraint,
        groups=order,
        mixture_mode=mixture_mode,
        achieved_fnr_range=achieved_range,
        slack=max(0.0, achieved_range - eps),
    )


def replay_exponentiated_gradient(learner_config, X, y, groups, ensemble):
    """Retrain an EG ensemble from its stored multiplier trace; the result
    serializes byte-identically to the original."""
    return fit_exponentiated_gradient(
        learner_config,
        X,
        y,
        groups,
        constraint=ensemble.constraint,
        iterations=len(ensemble.iterates),
        mixture_mode=ensemble.mixture_mode,
        _multiplier_trace=ensemble.multiplier_trace,
    )


def predict_eg(ensemble, X, schema_fingerprint=None):
    """Mixture-weighted average of the iterate scores (the deterministic
    surrogate for the randomized classifier; sample_eg_iterate gives the
    randomized semantics)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if len(ensemble.iterates) == 1 or np.max(ensemble.mixture_weights) == 1.0:
        t = int(np.argmax(ensemble.mixture_weights))
        return learners.predict_proba(ensemble.iterates[t], X, schema_fingerprint)
    if all(m is ensemble.iterates[0] for m in ensemble.iterates):
        # constraint never bound: every iterate is the unmitigated learner
        return learners.predict_proba(ensemble.iterates[0], X, schema_fingerprint)
    out = np.zeros(X.shape[0], dtype=np.float64)
    for weight, model in zip(ensemble.mixture_weights, ensemble.iterates):
        out += weight * learners.predict_proba(model, X, schema_fingerprint)
    return out


def sample_eg_iterate(ensemble, seed):
    """Draw one iterate according to the mixture weights (randomized mode)."""
    rng = np.random.default_rng(seed)
    t = int(rng.choice(len(ensemble.iterates), p=ensemble.mixture_weights))
    return ensemble.iterates[t]


@dataclass
class ThresholdPolicy:
    thresholds: dict
    fallback: float
    objective: str
    target_fnr: float | None
    achieved_fnr: dict
    notes: list = field(default_factory=list)

    def threshold_for(self, group):
        return self.thresholds.get(group, self.fallback)

    def to_json(self):
        doc = {
            "format_version": learners.FORMAT_VERSION,
            "objective": self.objective,
            "target_fnr": self.target_fnr,
            "fallback": self.fallback,
            "thresholds": {str(g): float(t) for g, t in sorted(self.thresholds.items())},
            "achieved_fnr": {str(g): float(v) for g, v in sorted(self.achieved_fnr.items())},
            "notes": list(self.notes),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _candidates(scores):
    # the sentinel sits above every observed score but is clamped so stored
    # thresholds stay inside [0,1] (scores are probability-like); a clamped
    # sentinel of 1.0 keeps only perfectly scored rows positive
    uniq = np.unique(scores)
    sentinel = min(uniq[-1] + 1.0, 1.0) if uniq[-1] < 1.0 else 1.0
    if sentinel <= uniq[-1]:
        return uniq
    return np.append(uniq, sentinel)


def _best_ba_threshold(scores, y):
    """Global balanced-accuracy-optimal threshold over observed candidates
    (equivalently the Youden-J optimum); lowest threshold on ties."""
    best_thr, best_ba = None, -np.inf
    pos = scores[y == 1]
    neg = scores[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise DegenerateDataError("threshold fitting needs both classes")
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    for thr in _candidates(scores):
        tpr = 1.0 - np.searchsorted(pos_sorted, thr, side="left") / pos.size
        tnr = np.searchsorted(neg_sorted, thr, side="left") / neg.size
        ba = 0.5 * (tpr + tnr)
        if ba > best_ba + 1e-15:
            best_thr, best_ba = float(thr), float(ba)
    return best_thr


def fit_threshold_optimizer(
    scores_calibration, y, groups, objective="balanced_accuracy", grid_size=101
):
    """Fit per-group decision thresholds on frozen calibration scores (see
    module docstring for the selection rule)."""
    if objective != "balanced_accuracy":
        raise ConfigError(f"unsupported objective {objective!r}")
    scores = np.asarray(scores_calibration, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    gr = np.asarray(groups)
    if not (scores.shape == y.shape == gr.shape):
        raise DegenerateDataError("scores, labels, groups must be aligned")

    fallback = _best_ba_threshold(scores, y)
    notes = []
    eligible = []
    for g in sorted(np.unique(gr).tolist()):
        mask = gr == g
        if np.unique(y[mask]).size < 2:
            notes.append(
                f"group {g!r} has a single calibration class; using fallback threshold"
            )
        else:
            eligible.append(g)
    if not eligible:
        raise DegenerateDataError("no group has both calibration classes")

    if len(eligible) == 1:
        g = eligible[0]
        mask = gr == g
        thr = _best_ba_threshold(scores[mask], y[mask])
        pos_sorted = np.sort(scores[mask][y[mask] == 1])
        achieved = float(np.searchsorted(pos_sorted, thr, side="left") / pos_sorted.size)
        return ThresholdPolicy(
            thresholds={g: thr},
            fallback=fallback,
            objective=objective,
            target_fnr=None,
            achieved_fnr={g: achieved},
            notes=notes,
        )

    per_group = {}
    for g in eligible:
        mask = gr == g
        s = scores[mask]
        labels = y[mask]
        cands = _candidates(s)
        pos_sorted = np.sort(s[labels == 1])
        neg_sorted = np.sort(s[labels == 0])
        cand_fnr = np.searchsorted(pos_sorted, cands, side="left") / pos_sorted.size
        cand_tnr = np.searchsorted(neg_sorted, cands, side="left") / neg_sorted.size
        per_group[g] = (cands, cand_fnr, cand_tnr)

    grid = np.linspace(0.0, 1.0, grid_size)
    best = None  # (mean_ba, target, {group: (thr, fnr, ba)})
    for target in grid:
        chosen = {}
        bas = []
        for g in eligible:
            cands, cand_fnr, cand_tnr = per_group[g]
            ok = np.flatnonzero(cand_fnr <= target + 1e-12)
            achieved = cand_fnr[ok[-1]]
            first = int(np.flatnonzero(cand_fnr == achieved)[0])  # lowest threshold
            thr = float(cands[first])
            ba = 0.5 * ((1.0 - cand_fnr[first]) + cand_tnr[first])
            chosen[g] = (thr, float(cand_fnr[first]), float(ba))
            bas.append(ba)
        mean_ba = float(np.mean(bas))
        if best is None or mean_ba > best[0] + 1e-12:
            best = (mean_ba, float(target), chosen)

    _, target, chosen = best
    return ThresholdPolicy(
        thresholds={g: chosen[g][0] for g in eligible},
        fallback=fallback,
        objective=objective,
        target_fnr=target,
        achieved_fnr={g: chosen[g][1] for g in eligible},
        notes=notes,
    )


def predict_thresholded(policy, scores, groups):
    """Label 1 iff score >= the group's threshold (fallback for unseen)."""
    scores = np.asarray(scores, dtype=np.float64)
    gr = np.asarray(groups)
    out = np.zeros(scores.shape[0], dtype=np.int64)
    for g in np.unique(gr):
        mask = gr == g
        out[mask] = (scores[mask] >= policy.threshold_for(g)).astype(np.int64)
    return out


METHOD_ORDER = ("unmitigated", "threshold_optimizer", "exponentiated_gradient")


@dataclass
class MitigationComparison:
    tables: dict  # method -> GroupMetricTable
    ranges: dict  # method -> {metric: range}
    best_method: dict  # metric -> method with the smallest range

    def as_dict(self):
        return {
            "ranges": {
                m: {k: v for k, v in self.ranges[m].items()} for m in self.ranges
            },
            "best_method": dict(self.best_method),
        }


def compare_mitigation(y, groups, unmitigated_preds, eg_preds, threshold_preds):
    """Side-by-side per-group tables and per-metric ranges for the three
    prediction vectors, flagging the range-minimizing method per metric."""
    preds = {
        "unmitigated": unmitigated_preds,
        "threshold_optimizer": threshold_preds,
        "exponentiated_gradient": eg_preds,
    }
    tables = {}
    ranges = {}
    for method in METHOD_ORDER:
        table = metrics.group_metric_table(y, preds[method], groups)
        tables[method] = table
        ranges[method] = {
            m: table.ranges[m] for m in ("fnr", "fpr", "balanced_accuracy")
        }
    best_method = {}
    for metric in ("fnr", "fpr", "balanced_accuracy"):
        candidates = [
            (ranges[m][metric], i, m)
            for i, m in enumerate(METHOD_ORDER)
            if ranges[m][metric] is not None
        ]
        best_method[metric] = min(candidates)[2] if candidates else None
    return MitigationComparison(tables=tables, ranges=ranges, best_method=best_method)
