"""Stage I/II preprocessing: binary label derivation, one-hot encoding,
z-score normalization, stratified splitting, and majority-class downsampling.

All operations are pure functions of their inputs plus an explicit seed;
encoded datasets are immutable by convention once built.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import records as rec
from .errors import ConfigError, DegenerateDataError, InvalidRecordError, SchemaError


class DegenerateColumnWarning(UserWarning):
    """A numeric column had zero variance; it standardizes to all zeros."""


def derive_los_class(los_days, psi):
    """Binary long-stay label: 1 iff los_days >= psi.

    Accepts a scalar or an array; negative stays are invalid records
    (excluded at extraction time upstream, rejected here).
    """
    if psi < 1:
        raise ConfigError(f"psi must be >= 1, got {psi}")
    arr = np.asarray(los_days)
    if np.any(arr < 0):
        raise InvalidRecordError("negative length of stay")
    labels = (arr >= psi).astype(np.int64)
    return int(labels) if np.isscalar(los_days) else labels


def long_stay_rate(labels):
    """Fraction of admissions labeled long-stay (label 1)."""
    arr = np.asarray(labels)
    if arr.size == 0:
        raise DegenerateDataError("long-stay rate undefined for an empty label vector")
    return float(np.count_nonzero(arr == 1) / arr.size)


@dataclass(frozen=True)
class ColumnSpec:
    """Descriptor for one encoded column."""

    variable: str
    kind: str  # "onehot" | "binary" | "numeric"
    category: str | None = None

    @property
    def name(self):
        if self.kind == "onehot":
            return f"{self.variable}_{self.category}"
        return self.variable


# (csv/attribute name, kind, categories) in the canonical variable order; the
# age group rides along as the single demographic used as a model input.
_VARIABLE_LAYOUT = (
    ("BMI", "bmi_category", "onehot", rec.BMI_CATEGORIES),
    ("SMOKING_HISTORY", "smoking_history", "onehot", rec.YES_NO_UNKNOWN),
    ("ALCOHOL_HISTORY", "alcohol_history", "onehot", rec.YES_NO_UNKNOWN),
    ("PHYSICAL", "physical", "onehot", rec.YES_NO_UNKNOWN),
    ("AUTISM", "autism", "binary", None),
    ("NUM_PRVADMISSION_1YR", "num_prvadmission_1yr", "numeric", None),
    ("NUM_PRVEPISODES_1YR", "num_prvepisodes_1yr", "numeric", None),
    ("NUM_PRVCOMORBID_1YR", "num_prvcomorbid_1yr", "numeric", None),
    ("NUM_PRVADMISSION_3YR", "num_prvadmission_3yr", "numeric", None),
    ("NUM_PRVEPISODES_3YR", "num_prvepisodes_3yr", "numeric", None),
    ("NUM_PRVCOMORBID_3YR", "num_prvcomorbid_3yr", "numeric", None),
    ("NUM_PRVHOSPITAL_DAYS_1YR", "num_prvhospital_days_1yr", "numeric", None),
    ("NUM_PRVHOSPITAL_DAYS_3YR", "num_prvhospital_days_3yr", "numeric", None),
    ("MEDICATIONS", "medications", "binary", None),
    ("TOTAL_COMORBIDITY", "total_comorbidity", "numeric", None),
    ("NUMEPISODES_24HRS", "numepisodes_24hrs", "numeric", None),
    ("NUMCOMORBIDITIES_24HRS", "numcomorbidities_24hrs", "numeric", None),
)


def default_schema():
    """Column specs for the canonical feature layout."""
    schema = []
    for var, _attr, kind, categories in _VARIABLE_LAYOUT:
        if kind == "onehot":
            schema.extend(ColumnSpec(var, "onehot", c) for c in categories)
        else:
            schema.append(ColumnSpec(var, kind))
    schema.extend(ColumnSpec(col, "binary") for col in rec.COND_COLUMNS)
    schema.extend(ColumnSpec("AGEGRP_AT_ADMIS_DT", "onehot", c) for c in rec.AGE_GROUPS)
    return schema


@dataclass
class EncodedDataset:
    """Numeric feature matrix + binary labels + group identifiers + schema.

    ``normalization_params`` maps column index -> (mean, std) for every
    numeric column once z-scoring has been fitted; None before that.
    """

    rows: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    schema: list
    normalization_params: dict | None = None
    seed: int | None = None

    @property
    def n_rows(self):
        return self.rows.shape[0]

    @property
    def n_cols(self):
        return self.rows.shape[1]

    def column_names(self):
        return [spec.name for spec in self.schema]

    def numeric_column_indices(self):
        return [i for i, spec in enumerate(self.schema) if spec.kind == "numeric"]

    def subset(self, indices):
        return EncodedDataset(
            rows=self.rows[indices],
            labels=self.labels[indices],
            groups=self.groups[indices],
            schema=self.schema,
            normalization_params=self.normalization_params,
            seed=self.seed,
        )

    def schema_fingerprint(self):
        return schema_fingerprint(self.schema)

    def save(self, prefix):
        """Write <prefix>.csv (features, label, group) and <prefix>.json
        (schema, normalization params, seed)."""
        csv_path = f"{prefix}.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.column_names() + ["LOSCLASS", "ETHNIC_GROUP"])
            for i in range(self.n_rows):
                row = [_fmt(v) for v in self.rows[i]]
                row.append(str(int(self.labels[i])))
                row.append(str(self.groups[i]))
                writer.writerow(row)
        sidecar = {
            "schema": [
                {"variable": s.variable, "kind": s.kind, "category": s.category}
                for s in self.schema
            ],
            "normalization_params": (
                None
                if self.normalization_params is None
                else {str(k): [v[0], v[1]] for k, v in sorted(self.normalization_params.items())}
            ),
            "seed": self.seed,
        }
        with open(f"{prefix}.json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path

    @classmethod
    def load(cls, prefix):
        with open(f"{prefix}.json") as fh:
            sidecar = json.load(fh)
        schema = [
            ColumnSpec(d["variable"], d["kind"], d["category"]) for d in sidecar["schema"]
        ]
        rows, labels, groups = [], [], []
        with open(f"{prefix}.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[: len(schema)] != [s.name for s in schema]:
                raise SchemaError(f"{prefix}.csv columns do not match sidecar schema")
            for row in reader:
                rows.append([float(v) for v in row[: len(schema)]])
                labels.append(int(row[len(schema)]))
                groups.append(row[len(schema) + 1])
        params = sidecar["normalization_params"]
        return cls(
            rows=np.asarray(rows, dtype=np.float64).reshape(len(rows), len(schema)),
            labels=np.asarray(labels, dtype=np.int64),
            groups=np.asarray(groups, dtype=object),
            schema=schema,
            normalization_params=(
                None if params is None else {int(k): (v[0], v[1]) for k, v in params.items()}
            ),
            seed=sidecar["seed"],
        )


def _fmt(value):
    # shortest round-trip decimal; integers stay compact
    f = float(value)
    return str(int(f)) if f == int(f) and abs(f) < 1e15 else repr(f)


def schema_fingerprint(schema):
    import hashlib

    text = ";".join(f"{s.variable}|{s.kind}|{s.category}" for s in schema)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def encode_one_hot(records, psi, schema=None):
    """Encode admission records into an EncodedDataset.

    Each k-category variable becomes k 0/1 columns (Unknown is a declared
    category, so every block sums to exactly one per row); binary flags stay
    single columns; numeric variables pass through unchanged at this step.
    """
    if schema is None:
        schema = default_schema()
    n = len(records)
    if n == 0:
        raise DegenerateDataError("cannot encode an empty record collection")
    d = len(schema)
    rows = np.zeros((n, d), dtype=np.float64)
    labels = np.zeros(n, dtype=np.int64)
    groups = np.empty(n, dtype=object)

    attr_by_var = {var: attr for var, attr, _k, _c in _VARIABLE_LAYOUT}
    cond_index = {col: i for i, col in enumerate(rec.COND_COLUMNS)}

    col_getters = []
    for spec in schema:
        if spec.variable in cond_index:
            col_getters.append(("cond", cond_index[spec.variable], None))
        elif spec.variable == "AGEGRP_AT_ADMIS_DT":
            col_getters.append(("onehot", "age_group", spec.category))
        elif spec.kind == "onehot":
            col_getters.append(("onehot", attr_by_var[spec.variable], spec.category))
        else:
            col_getters.append((spec.kind, attr_by_var[spec.variable], None))

    onehot_vars = {}
    for j, spec in enumerate(schema):
        if spec.kind == "onehot":
            onehot_vars.setdefault(spec.variable, set()).add(spec.category)

    for i, record in enumerate(records):
        for j, (kind, key, category) in enumerate(col_getters):
            if kind == "cond":
                rows[i, j] = record.cond_flags[key]
            elif kind == "onehot":
                value = getattr(record, key)
                if value not in onehot_vars[schema[j].variable]:
                    raise SchemaError(
                        f"{record.admission_id}: {schema[j].variable}={value!r} "
                        "is not a declared category"
                    )
                rows[i, j] = 1.0 if value == category else 0.0
            elif kind == "binary":
                rows[i, j] = float(getattr(record, key))
            else:  # numeric
                value = getattr(record, key)
                if value is None or (isinstance(value, float) and math.isnan(value)):
                    raise InvalidRecordError(
                        f"{record.admission_id}: missing numeric field {schema[j].variable}"
                    )
                rows[i, j] = float(value)
        labels[i] = derive_los_class(record.los_days, psi)
        groups[i] = record.ethnic_group

    return EncodedDataset(rows=rows, labels=labels, groups=groups, schema=schema)


def zscore_fit(columns):
    """Fit per-column (mean, population std) on training columns.

    ``columns`` is an (n, k) array; returns a list of (mean, std) pairs.
    Zero-variance columns get std 0 and a DegenerateColumnWarning.
    """
    arr = np.asarray(columns, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    params = []
    for j in range(arr.shape[1]):
        mean = float(np.mean(arr[:, j]))
        std = float(np.std(arr[:, j]))  # population (ddof=0)
        if std == 0.0:
            warnings.warn(
                f"column {j} has zero variance; standardized values will be 0",
                DegenerateColumnWarning,
                stacklevel=2,
            )
        params.append((mean, std))
    return params


def zscore_apply(columns, params):
    """Apply fitted (mean, std) pairs; zero-variance columns map to zeros."""
    arr = np.asarray(columns, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[:, None]
    if arr.shape[1] != len(params):
        raise SchemaError(
            f"{arr.shape[1]} columns but {len(params)} normalization params"
        )
    out = np.zeros_like(arr)
    for j, (mean, std) in enumerate(params):
        if std > 0:
            out[:, j] = (arr[:, j] - mean) / std
    return out[:, 0] if squeeze else out


def normalize_train_test(train, test=None):
    """Z-score the numeric columns of a train split (fit) and optionally a
    test split (apply with the train-fitted params). Returns new datasets
    with normalization_params recorded."""
    numeric = train.numeric_column_indices()
    params = zscore_fit(train.rows[:, numeric]) if numeric else []
    param_map = {col: params[k] for k, col in enumerate(numeric)}

    def _apply(ds):
        rows = ds.rows.copy()
        if numeric:
            rows[:, numeric] = zscore_apply(ds.rows[:, numeric], params)
        return EncodedDataset(
            rows=rows,
            labels=ds.labels,
            groups=ds.groups,
            schema=ds.schema,
            normalization_params=param_map,
            seed=ds.seed,
        )

    if test is None:
        return _apply(train)
    return _apply(train), _apply(test)


def stratified_split(dataset, train_fraction=0.5, seed=0):
    """Split into (train, test) preserving per-class proportions.

    Per class, floor(train_fraction * count) rows go to train and the
    remainder to test; the same seed reproduces the identical split.
    """
    labels = dataset.labels
    classes = np.unique(labels)
    if classes.size < 2:
        raise DegenerateDataError("stratified split requires both classes present")
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must be in (0,1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise DegenerateDataError(
                f"class {cls} has {idx.size} row(s); stratification infeasible"
            )
        perm = rng.permutation(idx)
        n_train = int(math.floor(train_fraction * idx.size))
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return dataset.subset(train_idx), dataset.subset(test_idx)


def downsample_majority(train, seed=0):
    """Subsample the majority class uniformly without replacement down to the
    minority-class size; an already balanced input is returned unchanged."""
    labels = train.labels
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size != 2:
        raise DegenerateDataError("downsampling expects binary labels with both classes")
    if counts[0] == counts[1]:
        return train
    minority_cls = classes[np.argmin(counts)]
    majority_cls = classes[np.argmax(counts)]
    minority_idx = np.flatnonzero(labels == minority_cls)
    majority_idx = np.flatnonzero(labels == majority_cls)
    rng = np.random.default_rng(seed)
    keep_majority = rng.choice(majority_idx, size=minority_idx.size, replace=False)
    keep = np.sort(np.concatenate([minority_idx, keep_majority]))
    return train.subset(keep)
