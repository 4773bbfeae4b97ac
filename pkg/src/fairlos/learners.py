"""Instance-weighted base classifiers behind one fit/predict surface:
logistic regression, a single decision tree, a random forest, and
gradient-boosted stumps. All expose probability scores in [0, 1].

Defaults follow the published model configurations: the forest uses 100
trees, gini splits, sqrt feature subsampling, unlimited depth; boosting uses
100 depth-1 stumps at learning rate 0.1 on the weighted log loss; logistic
regression uses an L2 penalty (inverse-C form, 1.0) with at most 1000
full-batch gradient-descent steps and backtracking line search.

Models serialize to a versioned JSON document; the same (config, data, seed)
always yields byte-identical serialization.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import trees as _trees
from .errors import ConfigError, DegenerateDataError, SchemaError

KINDS = ("logreg", "tree", "forest", "gboost")

FORMAT_VERSION = 1

_KIND_DEFAULTS = {
    "logreg": {},
    "tree": {"n_estimators": 1},
    "forest": {"feature_subsample": "sqrt"},
    "gboost": {"max_depth": 1},
}


@dataclass
class LearnerConfig:
    kind: str
    n_estimators: int = 100
    max_depth: int | None = None
    split_criterion: str = "gini"
    feature_subsample: str = "all"
    learning_rate: float = 0.1
    l2_penalty: float = 1.0
    max_iterations: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown learner kind {self.kind!r}; expected one of {KINDS}")
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.split_criterion != "gini":
            raise ConfigError("split_criterion must be 'gini'")
        if self.feature_subsample not in ("sqrt", "all"):
            raise ConfigError("feature_subsample must be 'sqrt' or 'all'")
        if self.kind == "gboost" and self.max_depth != 1:
            raise ConfigError("gboost fits depth-1 stumps; max_depth must be 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative 64-bit integer")

    @classmethod
    def defaults(cls, kind, seed=0, **overrides):
        params = dict(_KIND_DEFAULTS.get(kind, {}))
        params.update(overrides)
        return cls(kind=kind, seed=seed, **params)

    def as_dict(self):
        return asdict(self)


@dataclass
class TrainedModel:
    kind: str
    config: LearnerConfig
    params: dict
    n_features: int
    schema_fingerprint: str | None
    seed: int
    _trees: list | None = None  # decoded Tree objects for tree/forest kinds

    def to_json(self):
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "config": self.config.as_dict(),
            "n_features": self.n_features,
            "schema_fingerprint": self.schema_fingerprint,
            "seed": self.seed,
            "params": self.params,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise ConfigError(
                f"unsupported model format version {doc.get('format_version')!r}"
            )
        config = LearnerConfig(**doc["config"])
        model = cls(
            kind=doc["kind"],
            config=config,
            params=doc["params"],
            n_features=doc["n_features"],
            schema_fingerprint=doc["schema_fingerprint"],
            seed=doc["seed"],
        )
        if model.kind in ("tree", "forest"):
            model._trees = [_trees.Tree.from_dict(d) for d in model.params["trees"]]
        return model

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def _validate_training_inputs(X, y, weights):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DegenerateDataError(
            f"X has {X.shape[0] if X.ndim == 2 else '?'} rows but y has {y.shape[0]}"
        )
    if np.isnan(X).any():
        raise DegenerateDataError("invalid input: X contains NaN")
    if not np.isin(y, (0, 1)).all():
        raise DegenerateDataError("labels must be 0/1")
    if weights is None:
        w = np.ones(y.shape[0], dtype=np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape[0] != y.shape[0]:
            raise DegenerateDataError("sample_weights length must match rows")
        if np.any(w < 0):
            raise DegenerateDataError("sample_weights must be non-negative")
        if not np.any(w > 0):
            raise DegenerateDataError("sample_weights must not be all zero")
    active = w > 0
    if np.unique(y[active]).size < 2:
        raise DegenerateDataError(
            "degenerate model: only one class present in (weighted) training data"
        )
    return X, y, w


def fit(config, X, y, sample_weights=None, schema_fingerprint=None):
    """Train a model of config.kind; deterministic given config.seed.

    Uniform weights and omitted weights produce the identical model.
    """
    X, y, w = _validate_training_inputs(X, y, sample_weights)
    d = X.shape[1]
    if config.kind == "logreg":
        params = _fit_logreg(config, X, y, w)
        trees = None
    elif config.kind == "tree":
        mtry = _trees.default_mtry(d, config.feature_subsample)
        rng = np.random.default_rng([int(config.seed), 0])
        kernel_seed = int(rng.integers(0, 2**63 - 1))
        tree_objs = [_trees.fit_tree(X, y, w, mtry, config.max_depth, kernel_seed)]
        params = {"trees": [t.to_dict() for t in tree_objs]}
        trees = tree_objs
    elif config.kind == "forest":
        mtry = _trees.default_mtry(d, config.feature_subsample)
        tree_objs = _trees.fit_forest(
            X, y, w, config.n_estimators, mtry, config.max_depth, config.seed
        )
        params = {"trees": [t.to_dict() for t in tree_objs]}
        trees = tree_objs
    else:  # gboost
        params = _fit_gboost(config, X, y, w)
        trees = None
    model = TrainedModel(
        kind=config.kind,
        config=config,
        params=params,
        n_features=d,
        schema_fingerprint=schema_fingerprint,
        seed=config.seed,
        _trees=trees,
    )
    return model


def _check_prediction_inputs(model, X, schema_fingerprint=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaError(
            f"model expects {model.n_features} features, got "
            f"{X.shape[1] if X.ndim == 2 else '?'}"
        )
    if (
        schema_fingerprint is not None
        and model.schema_fingerprint is not None
        and schema_fingerprint != model.schema_fingerprint
    ):
        raise SchemaError("schema fingerprint mismatch between model and data")
    return X


def predict_proba(model, X, schema_fingerprint=None):
    """Probability-like score per row, in [0, 1]."""
    X = _check_prediction_inputs(model, X, schema_fingerprint)
    if model.kind == "logreg":
        coef = np.asarray(model.params["coefficients"], dtype=np.float64)
        z = X @ coef + model.params["intercept"]
        return _sigmoid(z)
    if model.kind in ("tree", "forest"):
        return _trees.forest_scores(model._trees, X)
    # gboost
    f = np.full(X.shape[0], model.params["f0"], dtype=np.float64)
    lr = model.config.learning_rate
    for feat, thr, g_left, g_right in model.params["stumps"]:
        if feat < 0:
            f += lr * g_left
        else:
            go_left = X[:, int(feat)] <= thr
            f += lr * np.where(go_left, g_left, g_right)
    return _sigmoid(f)


def predict(model, X, threshold=0.5, schema_fingerprint=None):
    """Binary prediction: 1 iff score >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must be in [0,1], got {threshold}")
    return (predict_proba(model, X, schema_fingerprint) >= threshold).astype(np.int64)


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _fit_logreg(config, X, y, w):
    """Full-batch gradient descent with backtracking on the weighted,
    L2-regularized log loss (intercept unpenalized); stops when the gradient
    2-norm falls below 1e-6 or after max_iterations steps."""
    n, d = X.shape
    Xb = np.hstack([np.ones((n, 1)), X])
    beta = np.zeros(d + 1)
    lam = config.l2_penalty
    sign = np.where(y == 1, 1.0, -1.0)

    def loss(b):
        margins = sign * (Xb @ b)
        # log(1 + exp(-m)) computed stably
        val = float(np.sum(w * np.logaddexp(0.0, -margins)))
        return val + 0.5 * lam * float(b[1:] @ b[1:])

    def grad(b):
        p = _sigmoid(Xb @ b)
        g = Xb.T @ (w * (p - y))
        g[1:] += lam * b[1:]
        return g

    current = loss(beta)
    n_iter = 0
    g = grad(beta)
    gnorm = float(np.linalg.norm(g))
    while gnorm >= 1e-6 and n_iter < config.max_iterations:
        step = 1.0 / max(1.0, float(np.sum(w)))  # scale-aware initial step
        gsq = gnorm * gnorm
        while step > 1e-14:
            candidate = beta - step * g
            new = loss(candidate)
            if new <= current - 0.5 * step * gsq:
                break
            step *= 0.5
        else:
            break
        beta = candidate
        current = new
        g = grad(beta)
        gnorm = float(np.linalg.norm(g))
        n_iter += 1
    return {
        "intercept": float(beta[0]),
        "coefficients": beta[1:].tolist(),
        "n_iterations": n_iter,
        "grad_norm": gnorm,
    }


def _fit_gboost(config, X, y, w):
    """Gradient boosting with depth-1 stumps on the weighted log loss.

    Each round fits a regression stump to the residual y - p (split chosen
    by weighted variance reduction) and applies a damped per-leaf Newton
    step; columns are presorted once so each round is a linear scan.
    """
    n, d = X.shape
    order = np.argsort(X, axis=0, kind="mergesort")
    yf = y.astype(np.float64)
    p_bar = float(np.sum(w * yf) / np.sum(w))
    p_bar = min(max(p_bar, 1e-12), 1.0 - 1e-12)
    f0 = math.log(p_bar / (1.0 - p_bar))
    f = np.full(n, f0)
    lr = config.learning_rate
    stumps = []
    for _ in range(config.n_estimators):
        p = _sigmoid(f)
        residual = yf - p
        hess = p * (1.0 - p)
        best = None  # (gain, feature, threshold, left_mask)
        s_total = float(np.sum(w * residual))
        w_total = float(np.sum(w))
        for feat in range(d):
            col_order = order[:, feat]
            vals = X[col_order, feat]
            wr = (w * residual)[col_order]
            ww = w[col_order]
            cum_s = np.cumsum(wr)
            cum_w = np.cumsum(ww)
            boundary = np.flatnonzero(np.diff(vals) > 0)
            if boundary.size == 0:
                continue
            s_left = cum_s[boundary]
            w_left = cum_w[boundary]
            s_right = s_total - s_left
            w_right = w_total - w_left
            valid = (w_left > 0) & (w_right > 0)
            if not np.any(valid):
                continue
            gain = np.where(
                valid,
                s_left**2 / np.maximum(w_left, 1e-300)
                + s_right**2 / np.maximum(w_right, 1e-300),
                -np.inf,
            )
            k = int(np.argmax(gain))  # first max: lowest threshold
            if gain[k] == -np.inf:
                continue
            thr = 0.5 * (vals[boundary[k]] + vals[boundary[k] + 1])
            if best is None or gain[k] > best[0] + 1e-15:
                best = (float(gain[k]), feat, thr)
        if best is None:
            gamma = _newton_value(w, residual, hess)
            stumps.append([-1, 0.0, gamma, gamma])
            f = f + lr * gamma
            continue
        _, feat, thr = best
        left_mask = X[:, feat] <= thr
        g_left = _newton_value(w[left_mask], residual[left_mask], hess[left_mask])
        g_right = _newton_value(w[~left_mask], residual[~left_mask], hess[~left_mask])
        stumps.append([int(feat), float(thr), g_left, g_right])
        f = f + lr * np.where(left_mask, g_left, g_right)
    return {"f0": f0, "stumps": stumps}


def _newton_value(w, residual, hess):
    denom = float(np.sum(w * hess))
    if denom < 1e-12:
        return 0.0
    return float(np.sum(w * residual) / denom)


def training_log_loss(y, scores, weights=None):
    """Weighted log loss of probability scores (used by the boosting
    monotonicity property and diagnostics)."""
    y = np.asarray(y, dtype=np.float64)
    s = np.clip(np.asarray(scores, dtype=np.float64), 1e-12, 1.0 - 1e-12)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    return float(np.sum(w * -(y * np.log(s) + (1.0 - y) * np.log(1.0 - s))))
