"""Command-line interface.

Subcommands: generate, stats, prepare, train, evaluate, mitigate, report,
repeat, and run (full pipeline). Exit code 0 on success; toolkit errors
print a stage-named diagnostic and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, learners, metrics, mitigation, pipeline, preprocess, stats, synth
from . import records as rec
from .errors import ConfigError, FairlosError


def _read_text(path):
    with open(path) as fh:
        return fh.read()


def _learner_config(arg, seed=None):
    if arg is None:
        doc = {"kind": "forest"}
    elif os.path.exists(arg):
        doc = json.loads(_read_text(arg))
    else:
        doc = json.loads(arg)
    if seed is not None:
        doc["seed"] = seed
    if doc.get("kind") == "forest" and "feature_subsample" not in doc:
        doc["feature_subsample"] = "sqrt"
    if doc.get("kind") == "gboost" and "max_depth" not in doc:
        doc["max_depth"] = 1
    if doc.get("kind") == "tree" and "n_estimators" not in doc:
        doc["n_estimators"] = 1
    return learners.LearnerConfig(**doc)


def cmd_generate(args):
    if args.config:
        config = synth.SyntheticCohortConfig.from_json(_read_text(args.config))
    else:
        config = synth.SyntheticCohortConfig()
    if args.seed is not None:
        config.seed = args.seed
    records = synth.generate_cohort(config)
    rec.write_admissions_csv(args.out, records)
    report = synth.validate_cohort(records, config)
    print(
        f"wrote {len(records)} admissions to {args.out} "
        f"(max marginal deviation {report.max_marginal_deviation:.4f}, "
        f"{len(report.invariant_violations)} invariant violations)"
    )
    return 0


def _categorical_tests(records):
    """Chi-square (multi-category) or exact binomial (binary) equal-
    probability tests for every categorical variable, per sex."""
    variables = [
        ("WIMD", lambda r: r.wimd_quintile, rec.WIMD_QUINTILES),
        ("ETHNIC_GROUP", lambda r: r.ethnic_group, rec.ETHNIC_GROUPS),
        ("AUTISM", lambda r: r.autism, (0, 1)),
        ("ALCOHOL_HISTORY", lambda r: r.alcohol_history, rec.YES_NO_UNKNOWN),
        ("SMOKING_HISTORY", lambda r: r.smoking_history, rec.YES_NO_UNKNOWN),
        ("MEDICATIONS", lambda r: r.medications, (0, 1)),
        ("PHYSICAL", lambda r: r.physical, rec.YES_NO_UNKNOWN),
        ("BMI", lambda r: r.bmi_category, rec.BMI_CATEGORIES),
        ("AGEGRP_AT_ADMIS_DT", lambda r: r.age_group, rec.AGE_GROUPS),
    ]
    out = {}
    for sex in rec.SEXES:
        rows = [r for r in records if r.sex == sex]
        if not rows:
            continue
        table = []
        for name, getter, categories in variables:
            values = [getter(r) for r in rows]
            counts = [sum(1 for v in values if v == c) for c in categories]
            if len(categories) == 2:
                successes = counts[1]
                p = stats.binomial_test(successes, len(values), 0.5)
                statistic = float(successes)
                test_name = "one-sample binomial"
            else:
                statistic, p = stats.chi_square_gof(counts)
                test_name = "one-sample chi-square"
            table.append({
                "variable": name,
                "test": test_name,
                "statistic": statistic,
                "p_value": p,
                "decision": "reject equal probabilities" if p < 0.05
                else "retain equal probabilities",
            })
        out[sex] = table
    return out


_NUMERIC_FIELDS = (
    "num_prvadmission_1yr", "num_prvepisodes_1yr", "num_prvcomorbid_1yr",
    "num_prvadmission_3yr", "num_prvepisodes_3yr", "num_prvcomorbid_3yr",
    "num_prvhospital_days_1yr", "num_prvhospital_days_3yr",
    "total_comorbidity", "numepisodes_24hrs", "numcomorbidities_24hrs",
)


def _numeric_tests(records, psi):
    out = {}
    for sex in rec.SEXES:
        rows = [r for r in records if r.sex == sex]
        if not rows:
            continue
        labels = np.array([1 if r.los_days >= psi else 0 for r in rows])
        normality = []
        correlation = []
        for name in _NUMERIC_FIELDS:
            values = np.array([getattr(r, name) for r in rows], dtype=np.float64)
            try:
                statistic, p = stats.ks_normality(values)
                normality.append({
                    "variable": name.upper(),
                    "statistic": statistic,
                    "p_value": p,
                    "normal": bool(p > 0.05),
                    "p_value_note": "asymptotic, parameters estimated from sample",
                })
            except FairlosError as exc:
                normality.append({"variable": name.upper(), "error": str(exc)})
            try:
                rho, p = stats.spearman(values, labels)
                correlation.append({
                    "variable": name.upper(), "rho": rho, "p_value": p,
                })
            except FairlosError as exc:
                correlation.append({"variable": name.upper(), "error": str(exc)})
        out[sex] = {"ks_normality": normality, "spearman_vs_losclass": correlation}
    return out


def _grouped_means(records, psi):
    """Mean of every numeric variable per stay class (the data behind the
    point-plot style summaries), per sex."""
    out = {}
    for sex in rec.SEXES:
        rows = [r for r in records if r.sex == sex]
        if not rows:
            continue
        labels = np.array([1 if r.los_days >= psi else 0 for r in rows])
        table = []
        for name in _NUMERIC_FIELDS:
            values = np.array([getattr(r, name) for r in rows], dtype=np.float64)
            table.append({
                "variable": name.upper(),
                "short_stay_mean": float(values[labels == 0].mean()) if (labels == 0).any() else None,
                "long_stay_mean": float(values[labels == 1].mean()) if (labels == 1).any() else None,
            })
        out[sex] = table
    return out


def cmd_stats(args):
    records = rec.read_admissions_csv(getattr(args, "in"))
    los_stats = pipeline.compute_los_stats(records, args.psi)
    los = np.array([r.los_days for r in records], dtype=np.float64)
    summary = stats.quartile_summary(los)
    outliers = los[summary.outlier_indices]
    grouped = _grouped_means(records, los_stats["psi"])
    report = {
        "n_admissions": len(records),
        "los": los_stats,
        "categorical_tests": _categorical_tests(records),
        "numeric_tests": _numeric_tests(records, los_stats["psi"]),
        "grouped_means": grouped,
    }
    if outliers.size >= 4:
        sub = stats.quartile_summary(outliers)
        report["los_outlier_subset"] = {
            "n": int(outliers.size),
            "q1": sub.q1, "q2": sub.q2, "q3": sub.q3, "iqr": sub.iqr,
            "upper_whisker": sub.upper_whisker,
        }
    with open(args.report, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    means_csv = os.path.splitext(args.report)[0] + "_grouped_means.csv"
    with open(means_csv, "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["sex", "variable", "short_stay_mean", "long_stay_mean"])
        for sex, table in grouped.items():
            for row in table:
                writer.writerow([
                    sex, row["variable"],
                    "" if row["short_stay_mean"] is None else f"{row['short_stay_mean']:.6g}",
                    "" if row["long_stay_mean"] is None else f"{row['long_stay_mean']:.6g}",
                ])
    print(
        f"wrote statistics report to {args.report} (psi={los_stats['psi']}) "
        f"and grouped means to {means_csv}"
    )
    return 0


def cmd_prepare(args):
    records = rec.read_admissions_csv(getattr(args, "in"))
    los_stats = pipeline.compute_los_stats(records, args.psi)
    psi = los_stats["psi"]
    os.makedirs(args.out, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    sexes = ["Male", "Female"] if args.sex == "Both-separately" else [args.sex]
    for sex in sexes:
        dataset, train, test, balanced = pipeline.prepare_sex_dataset(
            records, sex, psi, seed
        )
        tag = sex.lower()
        train.save(os.path.join(args.out, f"train_{tag}"))
        test.save(os.path.join(args.out, f"test_{tag}"))
        balanced.save(os.path.join(args.out, f"train_downsampled_{tag}"))
        print(
            f"{sex}: {dataset.n_rows} admissions -> train {train.n_rows}, "
            f"test {test.n_rows}, downsampled {balanced.n_rows} (psi={psi})"
        )
    with open(os.path.join(args.out, "prepare_meta.json"), "w") as fh:
        json.dump({"psi": psi, "seed": seed, "los": los_stats}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_train(args):
    train = preprocess.EncodedDataset.load(args.train)
    config = _learner_config(args.learner, args.seed)
    model = learners.fit(
        config, train.rows, train.labels,
        schema_fingerprint=train.schema_fingerprint(),
    )
    model.save(args.out)
    print(f"trained {config.kind} on {train.n_rows} rows -> {args.out}")
    return 0


def cmd_evaluate(args):
    test = preprocess.EncodedDataset.load(args.test)
    model = learners.TrainedModel.load(args.model)
    scores = learners.predict_proba(model, test.rows, test.schema_fingerprint())
    preds = (scores >= 0.5).astype(np.int64)
    bundle = metrics.rates(metrics.confusion(test.labels, preds))
    bundle.auc = metrics.auc(test.labels, scores)
    fpr, tpr, threshold = metrics.optimal_roc_point(test.labels, scores)
    table = metrics.group_metric_table(test.labels, preds, test.groups, scores=scores)
    report = {
        "model_metrics": bundle.as_dict(),
        "optimal_roc_point": {"fpr": fpr, "tpr": tpr, "threshold": threshold},
        "group_table": pipeline._table_dict(table),
    }
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"evaluated {model.kind} on {test.n_rows} rows: "
        f"auc={bundle.auc:.3f} fnr={bundle.fnr:.3f} fpr={bundle.fpr:.3f} "
        f"balanced_accuracy={bundle.balanced_accuracy:.3f} -> {args.out}"
    )
    return 0


def cmd_mitigate(args):
    train = preprocess.EncodedDataset.load(args.train)
    os.makedirs(args.out, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    config = _learner_config(args.learner, seed)
    if args.method == "eg":
        constraint = mitigation.FairnessConstraint(epsilon=args.epsilon)
        ensemble = mitigation.fit_exponentiated_gradient(
            config, train.rows, train.labels, train.groups,
            constraint=constraint, iterations=args.iters,
        )
        path = os.path.join(args.out, "eg_ensemble.json")
        with open(path, "w") as fh:
            fh.write(ensemble.to_json())
            fh.write("\n")
        print(
            f"eg: training FNR range {ensemble.achieved_fnr_range:.3f} "
            f"(epsilon {args.epsilon}, slack {ensemble.slack:.3f}) -> {path}"
        )
    else:
        half_a, half_b = preprocess.stratified_split(train, 0.5, seed=seed)
        base = learners.fit(
            config, half_a.rows, half_a.labels,
            schema_fingerprint=train.schema_fingerprint(),
        )
        calib = learners.predict_proba(base, half_b.rows)
        policy = mitigation.fit_threshold_optimizer(calib, half_b.labels, half_b.groups)
        base.save(os.path.join(args.out, "threshold_base_model.json"))
        path = os.path.join(args.out, "threshold_policy.json")
        with open(path, "w") as fh:
            fh.write(policy.to_json())
            fh.write("\n")
        thresholds = ", ".join(
            f"{g}={t:.3f}" for g, t in sorted(policy.thresholds.items())
        )
        print(f"threshold optimizer: {thresholds} (fallback {policy.fallback:.3f}) -> {path}")
    return 0


def _run_config_from_args(args):
    config = pipeline.RunConfig.from_json(_read_text(args.config))
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.outdir = args.out
    return config


def cmd_run(args):
    config = _run_config_from_args(args)
    report, _ = pipeline.run_pipeline(config, include_repeats=args.with_repeats)
    print(f"pipeline complete (psi={report['provenance']['psi']}); report in {config.outdir}")
    for sex, block in report["per_sex"].items():
        m = block["model_metrics"]
        print(
            f"  {sex}: auc={m['auc']:.3f} fnr={m['fnr']:.3f} "
            f"fpr={m['fpr']:.3f} balanced_accuracy={m['balanced_accuracy']:.3f}"
        )
    return 0


def cmd_report(args):
    with open(os.path.join(args.run, "report.json")) as fh:
        report = json.load(fh)
    records = None
    cohort_csv = os.path.join(args.run, "cohort.csv")
    if os.path.exists(cohort_csv):
        records = rec.read_admissions_csv(cohort_csv)
    written = pipeline.emit_report(
        report, args.out or args.run, formats=tuple(args.formats.split(",")),
        records=records,
    )
    print(f"re-emitted {len(written)} report files")
    return 0


def cmd_repeat(args):
    config = _run_config_from_args(args)
    report = pipeline.repeat_evaluate(config, k=args.k)
    outdir = config.outdir
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "repeat_report.json")
    with open(path, "wb") as fh:
        fh.write(pipeline.report_to_json_bytes(report))
    for sex, block in report["per_sex"].items():
        mean, std = block["mean"], block["std"]
        print(
            f"{sex}: auc={mean['auc']:.3f}±{std['auc']:.3f} "
            f"fnr={mean['fnr']:.3f}±{std['fnr']:.3f} "
            f"fpr={mean['fpr']:.3f}±{std['fpr']:.3f} "
            f"balanced_accuracy={mean['balanced_accuracy']:.3f}±{std['balanced_accuracy']:.3f}"
        )
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fairlos",
        description="Fairness-constrained length-of-stay classification toolkit",
    )
    parser.add_argument("--version", action="version", version=f"fairlos {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic cohort CSV")
    p.add_argument("--config", help="cohort config JSON path")
    p.add_argument("--out", required=True, help="output admissions CSV")
    p.add_argument("--seed", type=int, help="override config seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="descriptive/inferential statistics report")
    p.add_argument("--in", required=True, help="admissions CSV")
    p.add_argument("--report", required=True, help="output JSON path")
    p.add_argument("--psi", type=int, help="pin the stay threshold")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("prepare", help="encode, split, normalize, downsample")
    p.add_argument("--in", required=True, help="admissions CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--psi", type=int, help="pin the stay threshold")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sex", default="Both-separately",
                   choices=["Male", "Female", "Both-separately"])
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a learner on an encoded dataset")
    p.add_argument("--train", required=True, help="encoded dataset prefix")
    p.add_argument("--learner", help="learner config JSON (path or inline)")
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model on an encoded dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True, help="encoded dataset prefix")
    p.add_argument("--out", required=True, help="output JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mitigate", help="fit a bias-mitigation artifact")
    p.add_argument("--method", required=True, choices=["eg", "threshold"])
    p.add_argument("--train", required=True, help="encoded training dataset prefix")
    p.add_argument("--learner", help="learner config JSON (path or inline)")
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("run", help="full pipeline from a run config")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--with-repeats", action="store_true",
                   help="append the k-split repeat protocol to the report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit report files from a run directory")
    p.add_argument("--run", required=True, help="run directory containing report.json")
    p.add_argument("--out", default=None, help="emit into a different directory")
    p.add_argument("--formats", default="json,csv,svg")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("repeat", help="k-fold repeat-split generalizability protocol")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.add_argument("--out", default=None, help="override output directory")
    p.set_defaults(func=cmd_repeat)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FairlosError, OSError, json.JSONDecodeError) as exc:
        print(f"fairlos: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
