"""Externally reported benchmark values carried into reports for context.

These numbers come from the published study this toolkit's methodology
reproduces; they were measured on restricted data and are NOT recomputable
here. Reports include them only as clearly labeled external reference rows,
never as computed results.
"""

# classifier -> sex -> (auc, fnr, fpr, balanced_accuracy)
REFERENCE_CLASSIFIER_METRICS = {
    "LR": {
        "Male": {"auc": 0.742, "fnr": 0.362, "fpr": 0.285, "balanced_accuracy": 0.677},
        "Female": {"auc": 0.751, "fnr": 0.343, "fpr": 0.292, "balanced_accuracy": 0.682},
    },
    "RF": {
        "Male": {"auc": 0.759, "fnr": 0.224, "fpr": 0.396, "balanced_accuracy": 0.690},
        "Female": {"auc": 0.756, "fnr": 0.229, "fpr": 0.392, "balanced_accuracy": 0.689},
    },
    "SVM": {
        "Male": {"auc": 0.742, "fnr": 0.420, "fpr": 0.243, "balanced_accuracy": 0.669},
        "Female": {"auc": 0.747, "fnr": 0.376, "fpr": 0.266, "balanced_accuracy": 0.679},
    },
    "KNN": {
        "Male": {"auc": 0.679, "fnr": 0.375, "fpr": 0.369, "balanced_accuracy": 0.628},
        "Female": {"auc": 0.681, "fnr": 0.385, "fpr": 0.359, "balanced_accuracy": 0.628},
    },
    "GBoost": {
        "Male": {"auc": 0.742, "fnr": 0.399, "fpr": 0.264, "balanced_accuracy": 0.668},
        "Female": {"auc": 0.747, "fnr": 0.401, "fpr": 0.251, "balanced_accuracy": 0.674},
    },
    "HistGBoost": {
        "Male": {"auc": 0.771, "fnr": 0.296, "fpr": 0.303, "balanced_accuracy": 0.701},
        "Female": {"auc": 0.773, "fnr": 0.278, "fpr": 0.313, "balanced_accuracy": 0.705},
    },
    "XGBoost": {
        "Male": {"auc": 0.763, "fnr": 0.284, "fpr": 0.326, "balanced_accuracy": 0.695},
        "Female": {"auc": 0.761, "fnr": 0.286, "fpr": 0.331, "balanced_accuracy": 0.692},
    },
    "NN": {
        "Male": {"auc": 0.716, "fnr": 0.496, "fpr": 0.210, "balanced_accuracy": 0.647},
        "Female": {"auc": 0.723, "fnr": 0.473, "fpr": 0.233, "balanced_accuracy": 0.647},
    },
}

# Learners implemented by this package, keyed to the reference rows above.
IMPLEMENTED_REFERENCE_KEYS = {"logreg": "LR", "tree": None, "forest": "RF", "gboost": "GBoost"}
