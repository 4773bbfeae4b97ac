"""Shared fixtures. The biased demo cohort and its prepared splits are
session-scoped because several suites (mitigation, pipeline, acceptance)
reuse them and generation + forest training dominate runtime."""

import numpy as np
import pytest

from fairlos import learners, pipeline, synth


@pytest.fixture(scope="session")
def biased_cohort():
    config = synth.biased_demo_config(n_patients=4800, seed=7)
    records = synth.generate_cohort(config)
    return config, records


@pytest.fixture(scope="session")
def biased_male_split(biased_cohort):
    _, records = biased_cohort
    los = pipeline.compute_los_stats(records)
    psi = los["psi"]
    dataset, train, test, balanced = pipeline.prepare_sex_dataset(records, "Male", psi, 42)
    return {
        "psi": psi,
        "dataset": dataset,
        "train": train,
        "test": test,
        "balanced": balanced,
    }


@pytest.fixture(scope="session")
def biased_forest(biased_male_split):
    split = biased_male_split
    config = learners.LearnerConfig.defaults("forest", seed=5)
    model = learners.fit(config, split["balanced"].rows, split["balanced"].labels)
    scores = learners.predict_proba(model, split["test"].rows)
    return {"model": model, "test_scores": scores, "config": config}


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def make_separable(n=200, seed=0):
    """Linearly separable 2-feature toy set."""
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    # keep both classes even in unlucky draws
    y[0] = 0
    X[0] = (-3.0, -3.0)
    y[1] = 1
    X[1] = (3.0, 3.0)
    return X, y
