import numpy as np
import pytest

from fairlos import learners, metrics
from fairlos import trees as tr
from fairlos.errors import ConfigError, DegenerateDataError, SchemaError
from fairlos.learners import LearnerConfig, TrainedModel

from conftest import make_separable


def small_data(seed=0, n=300, d=6):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, d))
    logit = 1.4 * X[:, 0] - 0.9 * X[:, 1] + 0.4 * X[:, 2]
    y = (gen.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)
    y[0], y[1] = 0, 1
    return X, y


# ------------------------------------------------------------- config

def test_defaults_follow_published_configuration():
    forest = LearnerConfig.defaults("forest")
    assert forest.n_estimators == 100
    assert forest.split_criterion == "gini"
    assert forest.feature_subsample == "sqrt"
    assert forest.max_depth is None
    gboost = LearnerConfig.defaults("gboost")
    assert gboost.learning_rate == 0.1
    assert gboost.max_depth == 1
    assert gboost.n_estimators == 100
    logreg = LearnerConfig.defaults("logreg")
    assert logreg.max_iterations == 1000
    assert logreg.l2_penalty == 1.0


def test_config_validation():
    with pytest.raises(ConfigError):
        LearnerConfig(kind="svm")
    with pytest.raises(ConfigError):
        LearnerConfig(kind="forest", n_estimators=0)
    with pytest.raises(ConfigError):
        LearnerConfig(kind="gboost", max_depth=3)
    with pytest.raises(ConfigError):
        LearnerConfig(kind="forest", learning_rate=0.0)


# ------------------------------------------------------------- fit errors

def test_single_class_is_degenerate():
    X = np.zeros((10, 2))
    with pytest.raises(DegenerateDataError):
        learners.fit(LearnerConfig.defaults("tree"), X, np.ones(10, dtype=int))


def test_nan_feature_rejected():
    X, y = small_data()
    X[3, 1] = np.nan
    with pytest.raises(DegenerateDataError):
        learners.fit(LearnerConfig.defaults("logreg"), X, y)


def test_all_zero_weights_rejected():
    X, y = small_data()
    with pytest.raises(DegenerateDataError):
        learners.fit(LearnerConfig.defaults("tree"), X, y, sample_weights=np.zeros(len(y)))


# ------------------------------------------------------------- logreg

def test_logreg_separable_training_auc_one():
    X, y = make_separable(n=200, seed=1)
    model = learners.fit(LearnerConfig.defaults("logreg", seed=0), X, y)
    scores = learners.predict_proba(model, X)
    assert metrics.auc(y, scores) == 1.0


def test_logreg_zero_coefficients_score_half():
    X, y = small_data()
    model = learners.fit(LearnerConfig.defaults("logreg"), X, y)
    model.params["coefficients"] = [0.0] * X.shape[1]
    model.params["intercept"] = 0.0
    assert np.all(learners.predict_proba(model, X) == 0.5)


def test_logreg_weight_duplication_equivalence(rng):
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 2, size=30)
    y[:2] = [0, 1]
    w = rng.integers(1, 4, size=30).astype(float)
    cfg = LearnerConfig.defaults("logreg", seed=0)
    weighted = learners.fit(cfg, X, y, sample_weights=w)
    X_dup = np.repeat(X, w.astype(int), axis=0)
    y_dup = np.repeat(y, w.astype(int))
    duplicated = learners.fit(cfg, X_dup, y_dup)
    cw = np.array(weighted.params["coefficients"])
    cd = np.array(duplicated.params["coefficients"])
    assert np.max(np.abs(cw - cd)) < 1e-6
    assert abs(weighted.params["intercept"] - duplicated.params["intercept"]) < 1e-6


# ------------------------------------------------------------- uniform weights

@pytest.mark.parametrize("kind", ["logreg", "tree", "forest", "gboost"])
def test_uniform_weights_equal_omitted(kind):
    X, y = small_data(seed=3)
    cfg = LearnerConfig.defaults(kind, seed=4, n_estimators=10 if kind == "forest" else
                                 (1 if kind == "tree" else 20))
    unweighted = learners.fit(cfg, X, y)
    weighted = learners.fit(cfg, X, y, sample_weights=np.ones(len(y)))
    assert unweighted.to_json() == weighted.to_json()


# ------------------------------------------------------------- trees / forest

def traverse_oracle(tree_dict, x):
    """Test-local traversal over the serialized node arrays."""
    node = 0
    feature = tree_dict["feature"]
    while feature[node] != -1:
        if x[feature[node]] <= tree_dict["threshold"][node]:
            node = tree_dict["left"][node]
        else:
            node = tree_dict["right"][node]
    w0 = tree_dict["w0"][node]
    w1 = tree_dict["w1"][node]
    return w1 / (w0 + w1)


def test_forest_scores_match_traversal_oracle(rng):
    X, y = small_data(seed=5, n=200)
    cfg = LearnerConfig.defaults("forest", seed=7, n_estimators=12)
    model = learners.fit(cfg, X, y)
    X_new = rng.normal(size=(100, X.shape[1]))
    scores = learners.predict_proba(model, X_new)
    for i in range(100):
        per_tree = [traverse_oracle(t, X_new[i]) for t in model.params["trees"]]
        assert scores[i] == pytest.approx(float(np.mean(per_tree)), abs=1e-12)


def test_forest_leaf_counts_sum_to_leaf_weight():
    X, y = small_data(seed=8, n=150)
    cfg = LearnerConfig.defaults("forest", seed=2, n_estimators=5)
    model = learners.fit(cfg, X, y)
    for t in model.params["trees"]:
        feature = np.array(t["feature"])
        w0 = np.array(t["w0"])
        w1 = np.array(t["w1"])
        leaves = feature == -1
        # every leaf carries the class counts of its bootstrap rows
        assert np.all(w0[leaves] + w1[leaves] > 0)
        # root weight equals the bootstrap sample size
        assert w0[0] + w1[0] == pytest.approx(len(y))


def test_forest_prediction_invariant_to_tree_order():
    X, y = small_data(seed=9, n=120)
    cfg = LearnerConfig.defaults("forest", seed=3, n_estimators=8)
    model = learners.fit(cfg, X, y)
    scores = learners.predict_proba(model, X)
    reordered = [model._trees[i] for i in (5, 2, 7, 0, 1, 6, 3, 4)]
    alt = tr.forest_scores(reordered, X)
    assert np.allclose(scores, alt, atol=1e-12)


def test_tree_memorizes_duplicated_row():
    row = np.array([[0.3, -1.2, 0.5]])
    X = np.repeat(row, 20, axis=0)
    X = np.vstack([X, [[5.0, 5.0, 5.0]]])
    y = np.array([1] * 20 + [0])
    model = learners.fit(LearnerConfig.defaults("tree", seed=0), X, y)
    assert learners.predict_proba(model, row)[0] >= 0.99


def test_seed_contract_byte_identical_serialization():
    X, y = small_data(seed=10)
    for kind, n in (("forest", 10), ("gboost", 15), ("logreg", 1), ("tree", 1)):
        cfg = LearnerConfig.defaults(kind, seed=11,
                                     n_estimators=n if kind in ("forest", "gboost") else
                                     (1 if kind == "tree" else 100))
        a = learners.fit(cfg, X, y).to_json()
        b = learners.fit(cfg, X, y).to_json()
        assert a == b, kind


def test_different_seeds_differ_for_forest():
    X, y = small_data(seed=12)
    a = learners.fit(LearnerConfig.defaults("forest", seed=1, n_estimators=5), X, y)
    b = learners.fit(LearnerConfig.defaults("forest", seed=2, n_estimators=5), X, y)
    assert a.to_json() != b.to_json()


def test_model_json_round_trip_and_prediction_consistency(tmp_path):
    X, y = small_data(seed=13)
    cfg = LearnerConfig.defaults("forest", seed=6, n_estimators=6)
    model = learners.fit(cfg, X, y, schema_fingerprint="abc123")
    path = tmp_path / "model.json"
    model.save(path)
    loaded = TrainedModel.load(path)
    assert loaded.to_json() == model.to_json()
    assert np.allclose(
        learners.predict_proba(loaded, X), learners.predict_proba(model, X), atol=0
    )


def test_schema_fingerprint_mismatch_raises():
    X, y = small_data(seed=14)
    model = learners.fit(LearnerConfig.defaults("tree"), X, y, schema_fingerprint="fp1")
    with pytest.raises(SchemaError):
        learners.predict_proba(model, X, schema_fingerprint="fp2")
    with pytest.raises(SchemaError):
        learners.predict_proba(model, X[:, :3])


# ------------------------------------------------------------- gboost

def test_gboost_training_loss_nonincreasing():
    X, y = small_data(seed=15, n=400)
    cfg = LearnerConfig.defaults("gboost", seed=0)
    model = learners.fit(cfg, X, y)
    # replay the staged predictions
    f = np.full(len(y), model.params["f0"])
    lr = cfg.learning_rate
    losses = [learners.training_log_loss(y, 1 / (1 + np.exp(-f)))]
    for feat, thr, g_left, g_right in model.params["stumps"]:
        if feat < 0:
            f = f + lr * g_left
        else:
            f = f + lr * np.where(X[:, feat] <= thr, g_left, g_right)
        losses.append(learners.training_log_loss(y, 1 / (1 + np.exp(-f))))
    assert len(losses) == cfg.n_estimators + 1
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))


def test_gboost_score_is_logistic_of_stump_sum():
    X, y = small_data(seed=16, n=150)
    cfg = LearnerConfig.defaults("gboost", seed=0, n_estimators=25)
    model = learners.fit(cfg, X, y)
    scores = learners.predict_proba(model, X)
    f = np.full(len(y), model.params["f0"])
    for feat, thr, g_left, g_right in model.params["stumps"]:
        contrib = np.where(X[:, int(feat)] <= thr, g_left, g_right) if feat >= 0 else g_left
        f = f + cfg.learning_rate * contrib
    assert np.allclose(scores, 1 / (1 + np.exp(-f)), atol=1e-12)


# ------------------------------------------------------------- predict

def test_predict_threshold_boundary_inclusive():
    X, y = small_data(seed=17)
    model = learners.fit(LearnerConfig.defaults("logreg"), X, y)
    # label = 1 iff score >= threshold, with the boundary inclusive
    scores = np.array([0.4, 0.5, 0.6])
    assert ((scores >= 0.5).astype(int)).tolist() == [0, 1, 1]
    assert np.all(learners.predict(model, X, threshold=0.0) == 1)
    high = learners.predict(model, X, threshold=1.0)
    scrs = learners.predict_proba(model, X)
    assert np.array_equal(high, (scrs >= 1.0).astype(int))
    if scrs.max() < 1.0:
        assert np.all(high == 0)


def test_predict_threshold_out_of_range():
    X, y = small_data(seed=18)
    model = learners.fit(LearnerConfig.defaults("tree"), X, y)
    with pytest.raises(ConfigError):
        learners.predict(model, X, threshold=1.5)


def test_weighted_bootstrap_prefers_heavy_rows():
    # rows with large weights dominate the bootstrap and hence the forest
    gen = np.random.default_rng(3)
    X = gen.normal(size=(200, 3))
    y = (X[:, 0] > 0).astype(int)
    flip = gen.random(200) < 0.3
    y_noisy = np.where(flip, 1 - y, y)
    w = np.where(flip, 1e-6, 1.0)  # suppress the mislabeled rows
    cfg = LearnerConfig.defaults("forest", seed=5, n_estimators=20)
    clean = learners.fit(cfg, X, y_noisy, sample_weights=w)
    noisy = learners.fit(cfg, X, y_noisy)
    clean_auc = metrics.auc(y, learners.predict_proba(clean, X))
    noisy_auc = metrics.auc(y, learners.predict_proba(noisy, X))
    assert clean_auc > noisy_auc
