"""fairlos: fairness-constrained hospital length-of-stay classification.

Synthetic cohort generation, preprocessing, instance-weighted learners,
group-wise auditing, and two bias-mitigation algorithms (exponentiated-
gradient reductions and per-group threshold optimization), reproducible
end to end from a config and a master seed.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateDataError,
    FairlosError,
    InfeasibleConstraintError,
    InvalidRecordError,
    PipelineStageError,
    SchemaError,
)
from .records import (
    AGE_GROUPS,
    BMI_CATEGORIES,
    CONDITIONS,
    ETHNIC_GROUPS,
    SEXES,
    WIMD_QUINTILES,
    AdmissionRecord,
    read_admissions_csv,
    write_admissions_csv,
)
from .preprocess import (
    EncodedDataset,
    default_schema,
    derive_los_class,
    downsample_majority,
    encode_one_hot,
    long_stay_rate,
    normalize_train_test,
    stratified_split,
    zscore_apply,
    zscore_fit,
)
from .stats import (
    QuartileSummary,
    binomial_test,
    chi_square_gof,
    ks_normality,
    los_threshold_psi,
    quartile_summary,
    spearman,
)
from .metrics import (
    ConfusionCounts,
    GroupMetricTable,
    MetricBundle,
    auc,
    confusion,
    group_metric_table,
    optimal_roc_point,
    rates,
    roc_curve,
)
from .learners import LearnerConfig, TrainedModel, fit, predict, predict_proba
from .mitigation import (
    EGEnsemble,
    FairnessConstraint,
    ThresholdPolicy,
    compare_mitigation,
    fit_exponentiated_gradient,
    fit_threshold_optimizer,
    predict_eg,
    predict_thresholded,
    replay_exponentiated_gradient,
)
from .synth import (
    CohortValidationReport,
    GroupBias,
    SyntheticCohortConfig,
    biased_demo_config,
    generate_cohort,
    validate_cohort,
)
