"""End-to-end orchestration: generate/load a cohort, derive the stay
threshold, encode, split, downsample, train, evaluate per group, optionally
mitigate, and emit a reproducible report.

Every stage seed derives from (master seed, stage id, sex id, repeat index),
so a run is a pure function of its config; re-running with the same config
and master seed reproduces report.json byte for byte. Male and female
pipelines share no fitted state. Stage failures surface as
PipelineStageError naming the stage; artifacts written before the failure
are left in place for inspection.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__, learners, metrics, mitigation, preprocess, stats, synth
from . import records as rec
from .errors import ConfigError, FairlosError, PipelineStageError
from .reference import IMPLEMENTED_REFERENCE_KEYS, REFERENCE_CLASSIFIER_METRICS

_STAGE_IDS = {
    "split": 1,
    "downsample": 2,
    "learner": 3,
    "eg": 4,
    "threshold_base": 5,
    "threshold_calib": 6,
    "repeat": 7,
}
_SEX_IDS = {"Male": 0, "Female": 1}


def derive_seed(master, stage, sex="Male", rep=0):
    """Deterministic 32-bit stage seed from the master seed."""
    seq = np.random.SeedSequence(
        [int(master), _STAGE_IDS[stage], _SEX_IDS[sex], int(rep)]
    )
    return int(seq.generate_state(1)[0])


@dataclass
class MitigationSettings:
    enabled: bool = True
    epsilon: float = 0.2
    iterations: int = 10
    step_size: float = 2.0
    multiplier_bound: float = 10.0


@dataclass
class RunConfig:
    cohort: synth.SyntheticCohortConfig | None = None
    dataset_csv: str | None = None
    sex_filter: str = "Both-separately"  # Male | Female | Both-separately
    psi: int | None = None
    learner: learners.LearnerConfig = field(
        default_factory=lambda: learners.LearnerConfig.defaults("forest")
    )
    mitigation: MitigationSettings = field(default_factory=MitigationSettings)
    repeats: int = 10
    seed: int = 0
    outdir: str = "fairlos_run"

    def __post_init__(self):
        if self.sex_filter not in ("Male", "Female", "Both-separately"):
            raise ConfigError(f"sex_filter {self.sex_filter!r} invalid")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.cohort is None and self.dataset_csv is None:
            raise ConfigError("run config needs either a cohort config or a dataset_csv")

    def sexes(self):
        if self.sex_filter == "Both-separately":
            return ["Male", "Female"]
        return [self.sex_filter]

    def to_json(self):
        doc = {
            "cohort": None if self.cohort is None else json.loads(self.cohort.to_json()),
            "dataset_csv": self.dataset_csv,
            "sex_filter": self.sex_filter,
            "psi": self.psi,
            "learner": self.learner.as_dict(),
            "mitigation": {
                "enabled": self.mitigation.enabled,
                "epsilon": self.mitigation.epsilon,
                "iterations": self.mitigation.iterations,
                "step_size": self.mitigation.step_size,
                "multiplier_bound": self.mitigation.multiplier_bound,
            },
            "repeats": self.repeats,
            "seed": self.seed,
            "outdir": self.outdir,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed run config JSON: {exc}") from exc
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        cohort = doc.get("cohort")
        if cohort is not None:
            cohort = synth.SyntheticCohortConfig.from_json(json.dumps(cohort))
        learner = doc.get("learner")
        learner_cfg = (
            learners.LearnerConfig(**learner)
            if learner
            else learners.LearnerConfig.defaults("forest")
        )
        mit = doc.get("mitigation") or {}
        return cls(
            cohort=cohort,
            dataset_csv=doc.get("dataset_csv"),
            sex_filter=doc.get("sex_filter", "Both-separately"),
            psi=doc.get("psi"),
            learner=learner_cfg,
            mitigation=MitigationSettings(**mit),
            repeats=doc.get("repeats", 10),
            seed=doc.get("seed", 0),
            outdir=doc.get("outdir", "fairlos_run"),
        )

    def config_hash(self):
        # the output directory does not affect results, so it is not hashed
        doc = json.loads(self.to_json())
        doc.pop("outdir", None)
        canonical = json.dumps(doc, indent=2, sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _stage(name):
    """Decorator-free stage wrapper: run fn, rewrap toolkit errors."""

    class _Ctx:
        def __init__(self, stage_name):
            self.stage_name = stage_name

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, FairlosError) and not isinstance(
                exc, PipelineStageError
            ):
                raise PipelineStageError(self.stage_name, str(exc)) from exc
            return False

    return _Ctx(name)


def load_cohort(run_config):
    """Generate (and persist) or read the admissions for a run."""
    with _stage("load_cohort"):
        if run_config.cohort is not None:
            records = synth.generate_cohort(run_config.cohort)
        else:
            records = rec.read_admissions_csv(run_config.dataset_csv)
        if not records:
            raise PipelineStageError("load_cohort", "no admission records")
        return records


def compute_los_stats(records, psi_override=None):
    """Quartile/whisker summary of LOS over the full cohort and the trimmed-
    mean stay threshold (outliers per the Tukey whiskers are excluded)."""
    with _stage("los_stats"):
        los = np.array([r.los_days for r in records], dtype=np.float64)
        summary = stats.quartile_summary(los)
        keep = np.ones(los.size, dtype=bool)
        keep[summary.outlier_indices] = False
        trimmed = los[keep]
        psi = stats.los_threshold_psi(trimmed)
        out = {
            "n_admissions": int(los.size),
            "q1": summary.q1,
            "q2": summary.q2,
            "q3": summary.q3,
            "iqr": summary.iqr,
            "lower_whisker": summary.lower_whisker,
            "upper_whisker": summary.upper_whisker,
            "n_outliers": int(summary.outlier_indices.size),
            "trimmed_mean": float(np.mean(trimmed)),
            "psi_computed": psi,
            "psi": int(psi_override) if psi_override is not None else psi,
            "psi_overridden": psi_override is not None,
        }
        return out


def dataset_summary(records, psi):
    """Cohort demographics with long-stay rates, per sex."""
    out = {}
    for sex in rec.SEXES:
        rows = [r for r in records if r.sex == sex]
        if not rows:
            continue
        labels = np.array([1 if r.los_days >= psi else 0 for r in rows])
        sex_block = {
            "admissions": len(rows),
            "long_stay_rate": float(labels.mean()),
            "breakdown": {},
        }
        for title, attr, categories in (
            ("age", "age_group", rec.AGE_GROUPS),
            ("ethnic_group", "ethnic_group", rec.ETHNIC_GROUPS),
            ("wimd", "wimd_quintile", rec.WIMD_QUINTILES),
        ):
            values = np.array([getattr(r, attr) for r in rows])
            table = {}
            for cat in categories:
                mask = values == cat
                n_cat = int(mask.sum())
                table[cat] = {
                    "admissions": n_cat,
                    "share": n_cat / len(rows),
                    "long_stay_rate": float(labels[mask].mean()) if n_cat else None,
                }
            sex_block["breakdown"][title] = table
        out[sex] = sex_block
    return out


def prepare_sex_dataset(records, sex, psi, master_seed, rep=0):
    """Encode one sex's admissions and produce the normalized split plus the
    downsampled training set."""
    with _stage("encode"):
        rows = [r for r in records if r.sex == sex]
        if not rows:
            raise PipelineStageError("encode", f"no admissions for sex {sex!r}")
        dataset = preprocess.encode_one_hot(rows, psi)
        dataset.seed = master_seed
    with _stage("split"):
        train, test = preprocess.stratified_split(
            dataset, 0.5, seed=derive_seed(master_seed, "split", sex, rep)
        )
    with _stage("normalize"):
        train, test = preprocess.normalize_train_test(train, test)
    with _stage("downsample"):
        balanced = preprocess.downsample_majority(
            train, seed=derive_seed(master_seed, "downsample", sex, rep)
        )
    return dataset, train, test, balanced


def _evaluate_model(model, test, fingerprint):
    scores = learners.predict_proba(model, test.rows, fingerprint)
    preds = (scores >= 0.5).astype(np.int64)
    bundle = metrics.rates(metrics.confusion(test.labels, preds))
    bundle.auc = metrics.auc(test.labels, scores)
    fpr, tpr, threshold = metrics.optimal_roc_point(test.labels, scores)
    return scores, preds, bundle, {"fpr": fpr, "tpr": tpr, "threshold": threshold}


def _bundle_dict(bundle):
    return {k: v for k, v in bundle.as_dict().items()}


def _table_dict(table):
    return {
        "groups": {g: _bundle_dict(b) for g, b in table.bundles.items()},
        "ranges": dict(table.ranges),
        "notes": list(table.notes),
    }


def run_sex_pipeline(records, sex, psi, run_config, outdir=None):
    """Stages III-IV for one sex: train, evaluate, audit, mitigate."""
    master = run_config.seed
    dataset, train, test, balanced = prepare_sex_dataset(records, sex, psi, master)
    fingerprint = dataset.schema_fingerprint()

    with _stage("train"):
        learner_cfg = learners.LearnerConfig(**{
            **run_config.learner.as_dict(),
            "seed": derive_seed(master, "learner", sex),
        })
        model = learners.fit(
            learner_cfg, balanced.rows, balanced.labels, schema_fingerprint=fingerprint
        )

    with _stage("evaluate"):
        scores, preds, bundle, optimal = _evaluate_model(model, test, fingerprint)

    with _stage("group_audit"):
        group_table = metrics.group_metric_table(
            test.labels, preds, test.groups, scores=scores
        )

    roc_points = [
        [float(f), float(t), float(th)]
        for f, t, th in metrics.roc_curve(test.labels, scores)
    ]

    reference_key = IMPLEMENTED_REFERENCE_KEYS.get(run_config.learner.kind)
    result = {
        "roc_curve": roc_points,
        "counts": {
            "admissions": int(dataset.n_rows),
            "train": int(train.n_rows),
            "test": int(test.n_rows),
            "train_downsampled": int(balanced.n_rows),
            "train_downsampled_per_class": int(balanced.n_rows // 2),
        },
        "model_metrics": _bundle_dict(bundle),
        "optimal_roc_point": optimal,
        "group_table": _table_dict(group_table),
        # side-by-side context only; externally reported, never computed here
        "reference_counterpart": (
            None
            if reference_key is None
            else {"name": reference_key, **REFERENCE_CLASSIFIER_METRICS[reference_key][sex]}
        ),
    }
    artifacts = {
        "model": model,
        "test_scores": scores,
        "test_preds": preds,
        "datasets": {"full": dataset, "train": train, "test": test, "balanced": balanced},
    }

    if run_config.mitigation.enabled:
        settings = run_config.mitigation
        with _stage("mitigate_eg"):
            eg_cfg = learners.LearnerConfig(**{
                **run_config.learner.as_dict(),
                "seed": derive_seed(master, "eg", sex),
            })
            constraint = mitigation.FairnessConstraint(epsilon=settings.epsilon)
            ensemble = mitigation.fit_exponentiated_gradient(
                eg_cfg,
                balanced.rows,
                balanced.labels,
                balanced.groups,
                constraint=constraint,
                iterations=settings.iterations,
                step_size=settings.step_size,
                multiplier_bound=settings.multiplier_bound,
            )
            eg_scores = mitigation.predict_eg(ensemble, test.rows)
            eg_preds = (eg_scores >= 0.5).astype(np.int64)

        with _stage("mitigate_threshold"):
            half_a, half_b = preprocess.stratified_split(
                balanced, 0.5, seed=derive_seed(master, "threshold_calib", sex)
            )
            base_cfg = learners.LearnerConfig(**{
                **run_config.learner.as_dict(),
                "seed": derive_seed(master, "threshold_base", sex),
            })
            base_model = learners.fit(
                base_cfg, half_a.rows, half_a.labels, schema_fingerprint=fingerprint
            )
            calib_scores = learners.predict_proba(base_model, half_b.rows, fingerprint)
            policy = mitigation.fit_threshold_optimizer(
                calib_scores, half_b.labels, half_b.groups
            )
            thr_scores = learners.predict_proba(base_model, test.rows, fingerprint)
            thr_preds = mitigation.predict_thresholded(policy, thr_scores, test.groups)

        with _stage("compare"):
            comparison = mitigation.compare_mitigation(
                test.labels, test.groups, preds, eg_preds, thr_preds
            )
        result["mitigation"] = {
            "constraint": {"metric": "fnr_parity", "epsilon": settings.epsilon},
            "eg": {
                "iterations": settings.iterations,
                "training_fnr_range": ensemble.achieved_fnr_range,
                "slack": ensemble.slack,
                "mixture_weights": [float(w) for w in ensemble.mixture_weights],
            },
            "threshold_policy": {
                "target_fnr": policy.target_fnr,
                "fallback": policy.fallback,
                "thresholds": {str(g): float(t) for g, t in sorted(policy.thresholds.items())},
                "achieved_calibration_fnr": {
                    str(g): float(v) for g, v in sorted(policy.achieved_fnr.items())
                },
                "notes": list(policy.notes),
            },
            "group_tables": {
                m: _table_dict(t) for m, t in comparison.tables.items()
            },
            "ranges": comparison.ranges,
            "best_method": comparison.best_method,
        }
        artifacts["eg_ensemble"] = ensemble
        artifacts["threshold_policy"] = policy
        artifacts["threshold_base_model"] = base_model
        artifacts["eg_preds"] = eg_preds
        artifacts["threshold_preds"] = thr_preds

    return result, artifacts


def run_pipeline(run_config, emit=True, formats=("json", "csv", "svg"),
                 include_repeats=False):
    """Execute the full pipeline for a run config. Returns (report, artifacts)."""
    records = load_cohort(run_config)
    los = compute_los_stats(records, run_config.psi)
    psi = los["psi"]
    report = {
        "provenance": {
            "config_hash": run_config.config_hash(),
            "master_seed": run_config.seed,
            "package_version": __version__,
            "psi": psi,
            "learner": run_config.learner.as_dict(),
        },
        "los_stats": los,
        "dataset_summary": dataset_summary(records, psi),
        "per_sex": {},
        "external_reference": {
            "label": (
                "externally reported benchmark values from the source study; "
                "not computed by this run"
            ),
            "classifier_metrics": REFERENCE_CLASSIFIER_METRICS,
        },
    }
    all_artifacts = {}
    for sex in run_config.sexes():
        result, artifacts = run_sex_pipeline(records, sex, psi, run_config)
        report["per_sex"][sex] = result
        all_artifacts[sex] = artifacts

    if include_repeats and run_config.repeats >= 2:
        repeat_report = repeat_evaluate(run_config)
        for sex, block in repeat_report["per_sex"].items():
            report["per_sex"][sex]["repeats"] = {
                "k": repeat_report["provenance"]["k"],
                "mean": block["mean"],
                "std": block["std"],
            }

    outdir = run_config.outdir
    if emit:
        os.makedirs(outdir, exist_ok=True)
        if run_config.cohort is not None:
            rec.write_admissions_csv(os.path.join(outdir, "cohort.csv"), records)
        with open(os.path.join(outdir, "run_config.json"), "w") as fh:
            fh.write(run_config.to_json())
            fh.write("\n")
        for sex, artifacts in all_artifacts.items():
            tag = sex.lower()
            artifacts["model"].save(os.path.join(outdir, f"model_{tag}.json"))
            for name, ds in artifacts["datasets"].items():
                if name in ("train", "test"):
                    ds.save(os.path.join(outdir, f"{name}_{tag}"))
            if "eg_ensemble" in artifacts:
                with open(os.path.join(outdir, f"eg_ensemble_{tag}.json"), "w") as fh:
                    fh.write(artifacts["eg_ensemble"].to_json())
                    fh.write("\n")
            if "threshold_policy" in artifacts:
                with open(os.path.join(outdir, f"threshold_policy_{tag}.json"), "w") as fh:
                    fh.write(artifacts["threshold_policy"].to_json())
                    fh.write("\n")
        emit_report(report, outdir, formats=formats, records=records)
    return report, all_artifacts


def repeat_evaluate(run_config, k=None, split_seeds=None):
    """Generalizability protocol: k distinct seeded 50-50 splits, each
    downsampled, trained, and evaluated; reports mean and population std of
    each test metric per sex."""
    k = run_config.repeats if k is None else k
    if k < 2:
        raise ConfigError("repeat_evaluate needs k >= 2 for a standard deviation")
    if split_seeds is not None and len(split_seeds) != k:
        raise ConfigError("split_seeds must have length k")
    records = load_cohort(run_config)
    los = compute_los_stats(records, run_config.psi)
    psi = los["psi"]
    metric_names = ("auc", "fnr", "fpr", "balanced_accuracy")
    out = {
        "provenance": {
            "config_hash": run_config.config_hash(),
            "master_seed": run_config.seed,
            "package_version": __version__,
            "psi": psi,
            "k": k,
        },
        "per_sex": {},
    }
    for sex in run_config.sexes():
        rows = [r for r in records if r.sex == sex]
        with _stage("encode"):
            dataset = preprocess.encode_one_hot(rows, psi)
        fingerprint = dataset.schema_fingerprint()
        per_metric = {m: [] for m in metric_names}
        for rep in range(k):
            rep_seed = (
                split_seeds[rep]
                if split_seeds is not None
                else derive_seed(run_config.seed, "repeat", sex, rep)
            )
            with _stage("split"):
                train, test = preprocess.stratified_split(dataset, 0.5, seed=rep_seed)
            with _stage("normalize"):
                train, test = preprocess.normalize_train_test(train, test)
            with _stage("downsample"):
                balanced = preprocess.downsample_majority(train, seed=rep_seed)
            with _stage("train"):
                cfg = learners.LearnerConfig(**{
                    **run_config.learner.as_dict(),
                    "seed": rep_seed % (2**31),
                })
                model = learners.fit(
                    cfg, balanced.rows, balanced.labels, schema_fingerprint=fingerprint
                )
            with _stage("evaluate"):
                _, _, bundle, _ = _evaluate_model(model, test, fingerprint)
            for m in metric_names:
                per_metric[m].append(getattr(bundle, m))
        out["per_sex"][sex] = {
            "per_split": {m: list(map(float, per_metric[m])) for m in metric_names},
            "mean": {m: float(np.mean(per_metric[m])) for m in metric_names},
            "std": {m: _population_std(per_metric[m]) for m in metric_names},
        }
    return out


def _population_std(values):
    arr = np.asarray(values, dtype=np.float64)
    if np.all(arr == arr[0]):
        return 0.0  # identical splits must report exactly zero spread
    return float(np.std(arr))


def _provenance_line(report):
    prov = report["provenance"]
    return f"# config_hash={prov['config_hash']} master_seed={prov['master_seed']}"


def report_to_json_bytes(report):
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()


def emit_report(report, outdir, formats=("json", "csv", "svg"), records=None):
    """Write report.json plus CSV tables and SVG plots.

    Every emitted file carries the config hash and master seed. The JSON is
    canonical: parsing and re-emitting reproduces identical bytes.
    """
    os.makedirs(outdir, exist_ok=True)
    written = []
    if "json" in formats:
        path = os.path.join(outdir, "report.json")
        with open(path, "wb") as fh:
            fh.write(report_to_json_bytes(report))
        written.append(path)
    if "csv" in formats:
        written.extend(_emit_csv_tables(report, outdir))
    if "svg" in formats:
        written.extend(_emit_plots(report, outdir, records))
    return written


def _write_csv(path, provenance, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(provenance + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _f3(value):
    return "" if value is None else f"{value:.3f}"


def _emit_csv_tables(report, outdir):
    prov = _provenance_line(report)
    written = []

    rows = []
    for sex, block in report.get("dataset_summary", {}).items():
        rows.append([sex, "total", "", block["admissions"], "1.000",
                     _f3(block["long_stay_rate"])])
        for title, table in block["breakdown"].items():
            for cat, cell in table.items():
                rows.append([
                    sex, title, cat, cell["admissions"], _f3(cell["share"]),
                    _f3(cell["long_stay_rate"]),
                ])
    written.append(_write_csv(
        os.path.join(outdir, "dataset_summary.csv"), prov,
        ["sex", "variable", "category", "admissions", "share", "long_stay_rate"],
        rows,
    ))

    rows = []
    kind = report.get("provenance", {}).get("learner", {}).get("kind", "model")
    for sex, block in report.get("per_sex", {}).items():
        m = block["model_metrics"]
        rows.append([f"computed:{kind}", sex, _f3(m["auc"]), _f3(m["fnr"]),
                     _f3(m["fpr"]), _f3(m["balanced_accuracy"])])
    for name, sexes in report.get("external_reference", {}).get(
        "classifier_metrics", {}
    ).items():
        for sex, m in sexes.items():
            rows.append([f"external_reference:{name}", sex, _f3(m["auc"]),
                         _f3(m["fnr"]), _f3(m["fpr"]), _f3(m["balanced_accuracy"])])
    written.append(_write_csv(
        os.path.join(outdir, "classifier_metrics.csv"), prov,
        ["source", "sex", "auc", "fnr", "fpr", "balanced_accuracy"],
        rows,
    ))

    for sex, block in report.get("per_sex", {}).items():
        tag = sex.lower()
        table = block["group_table"]
        rows = [
            [g, _f3(b["fnr"]), _f3(b["fpr"]), _f3(b["balanced_accuracy"]), _f3(b["auc"])]
            for g, b in table["groups"].items()
        ]
        rows.append(["range", _f3(table["ranges"]["fnr"]), _f3(table["ranges"]["fpr"]),
                     _f3(table["ranges"]["balanced_accuracy"]), _f3(table["ranges"]["auc"])])
        written.append(_write_csv(
            os.path.join(outdir, f"group_metrics_{tag}.csv"), prov,
            ["group", "fnr", "fpr", "balanced_accuracy", "auc"],
            rows,
        ))

        if "mitigation" in block:
            mit = block["mitigation"]
            rows = []
            for method in mitigation.METHOD_ORDER:
                r = mit["ranges"][method]
                rows.append([method, _f3(r["fnr"]), _f3(r["fpr"]),
                             _f3(r["balanced_accuracy"])])
            rows.append(["best_method", mit["best_method"]["fnr"],
                         mit["best_method"]["fpr"],
                         mit["best_method"]["balanced_accuracy"]])
            written.append(_write_csv(
                os.path.join(outdir, f"mitigation_ranges_{tag}.csv"), prov,
                ["method", "fnr_range", "fpr_range", "balanced_accuracy_range"],
                rows,
            ))
            for method, table in mit["group_tables"].items():
                rows = [
                    [g, _f3(b["fnr"]), _f3(b["fpr"]), _f3(b["balanced_accuracy"])]
                    for g, b in table["groups"].items()
                ]
                rows.append(["range", _f3(table["ranges"]["fnr"]),
                             _f3(table["ranges"]["fpr"]),
                             _f3(table["ranges"]["balanced_accuracy"])])
                written.append(_write_csv(
                    os.path.join(outdir, f"group_metrics_{tag}_{method}.csv"), prov,
                    ["group", "fnr", "fpr", "balanced_accuracy"],
                    rows,
                ))

        if "repeats" in block:
            rep = block["repeats"]
            rows = [
                [m, _f3(rep["mean"][m]), _f3(rep["std"][m])]
                for m in ("auc", "fnr", "fpr", "balanced_accuracy")
            ]
            written.append(_write_csv(
                os.path.join(outdir, f"repeat_metrics_{tag}.csv"), prov,
                ["metric", "mean", "std"],
                rows,
            ))
    return written


def _emit_plots(report, outdir, records=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    prov = _provenance_line(report)
    meta = {"Date": None, "Title": prov}

    if records is not None:
        los = [r.los_days for r in records]
        fig, ax = plt.subplots(figsize=(4, 5))
        ax.boxplot(los, whis=1.5, showfliers=True)
        ax.set_ylabel("length of stay (days)")
        ax.set_title("LOS distribution (all admissions)")
        path = os.path.join(outdir, "los_boxplot.svg")
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        written.append(path)

    for sex, block in report.get("per_sex", {}).items():
        curve = block.get("roc_curve")
        if curve is None:
            continue
        fpr = [p[0] for p in curve]
        tpr = [p[1] for p in curve]
        opt = block["optimal_roc_point"]
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.plot(fpr, tpr, label=f"AUC={block['model_metrics']['auc']:.3f}")
        ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=0.8)
        ax.plot(
            [opt["fpr"]], [opt["tpr"]], marker="o", color="red",
            label=f"optimal point ({opt['fpr']:.3f}, {opt['tpr']:.3f})",
            # gid marks the optimal-point element inside the SVG
            gid="optimal-roc-point",
        )
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title(f"ROC ({sex})")
        ax.legend(loc="lower right")
        path = os.path.join(outdir, f"roc_{sex.lower()}.svg")
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        written.append(path)
    return written
