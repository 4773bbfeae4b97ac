import json
import os

import numpy as np
import pytest

from fairlos import cli, learners, pipeline, preprocess, stats, synth
from fairlos.errors import ConfigError, PipelineStageError


def quick_run_config(tmp_path, n_patients=900, seed=21, **overrides):
    defaults = dict(
        cohort=synth.biased_demo_config(n_patients=n_patients, seed=3),
        sex_filter="Male",
        learner=learners.LearnerConfig.defaults("forest", n_estimators=25),
        mitigation=pipeline.MitigationSettings(enabled=True, iterations=2),
        repeats=3,
        seed=seed,
        outdir=str(tmp_path / "run"),
    )
    defaults.update(overrides)
    return pipeline.RunConfig(**defaults)


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("quickrun")
    config = quick_run_config(tmp)
    report, artifacts = pipeline.run_pipeline(config)
    return config, report, artifacts


def test_run_config_json_round_trip(tmp_path):
    config = quick_run_config(tmp_path)
    loaded = pipeline.RunConfig.from_json(config.to_json())
    assert loaded.to_json() == config.to_json()
    assert loaded.config_hash() == config.config_hash()


def test_run_config_requires_source():
    with pytest.raises(ConfigError):
        pipeline.RunConfig(cohort=None, dataset_csv=None)


def test_psi_consistent_with_stats_module(quick_run):
    config, report, _ = quick_run
    records = synth.generate_cohort(config.cohort)
    los = np.array([r.los_days for r in records], dtype=np.float64)
    summary = stats.quartile_summary(los)
    keep = np.ones(los.size, dtype=bool)
    keep[summary.outlier_indices] = False
    assert report["provenance"]["psi"] == stats.los_threshold_psi(los[keep])


def test_report_contains_model_and_mitigation_blocks(quick_run):
    _, report, _ = quick_run
    block = report["per_sex"]["Male"]
    for key in ("auc", "fnr", "fpr", "balanced_accuracy"):
        assert block["model_metrics"][key] is not None
    assert set(block["mitigation"]["ranges"]) == {
        "unmitigated", "threshold_optimizer", "exponentiated_gradient"
    }
    assert set(block["mitigation"]["best_method"]) == {"fnr", "fpr", "balanced_accuracy"}
    assert report["external_reference"]["classifier_metrics"]["RF"]["Male"]["auc"] == 0.759
    assert report["provenance"]["learner"]["kind"] == "forest"
    # the forest's externally reported counterpart rides along for context
    assert block["reference_counterpart"]["name"] == "RF"
    assert block["reference_counterpart"]["auc"] == 0.759


def test_report_artifacts_emitted(quick_run):
    config, _, _ = quick_run
    out = config.outdir
    for name in (
        "report.json", "cohort.csv", "run_config.json", "model_male.json",
        "train_male.csv", "train_male.json", "test_male.csv",
        "eg_ensemble_male.json", "threshold_policy_male.json",
        "dataset_summary.csv", "classifier_metrics.csv",
        "group_metrics_male.csv", "mitigation_ranges_male.csv",
        "roc_male.svg", "los_boxplot.svg",
    ):
        assert os.path.exists(os.path.join(out, name)), name


def test_roc_svg_embeds_optimal_point_marker(quick_run):
    config, report, _ = quick_run
    svg = open(os.path.join(config.outdir, "roc_male.svg")).read()
    assert "optimal-roc-point" in svg
    # figures carry the provenance block too
    assert f"config_hash={report['provenance']['config_hash']}" in svg


def test_group_csv_range_row_recomputable(quick_run):
    config, _, _ = quick_run
    lines = open(os.path.join(config.outdir, "group_metrics_male.csv")).read().splitlines()
    assert lines[0].startswith("# config_hash=")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    assert rows[-1][0] == "range"
    fnr_col = header.index("fnr")
    values = [float(r[fnr_col]) for r in rows[:-1] if r[fnr_col]]
    expected = max(values) - min(values)
    assert float(rows[-1][fnr_col]) == pytest.approx(expected, abs=2e-3)


def test_report_json_round_trips_byte_identically(quick_run):
    config, _, _ = quick_run
    raw = open(os.path.join(config.outdir, "report.json"), "rb").read()
    assert pipeline.report_to_json_bytes(json.loads(raw)) == raw


def test_provenance_line_in_every_csv(quick_run):
    config, report, _ = quick_run
    prov = (
        f"# config_hash={report['provenance']['config_hash']} "
        f"master_seed={report['provenance']['master_seed']}"
    )
    for name in os.listdir(config.outdir):
        if name.endswith(".csv") and name != "cohort.csv" and "train" not in name \
                and "test" not in name:
            first = open(os.path.join(config.outdir, name)).readline().strip()
            assert first == prov, name


def test_pipeline_rerun_byte_identical(tmp_path):
    config_a = quick_run_config(tmp_path, outdir=str(tmp_path / "a"))
    config_b = quick_run_config(tmp_path, outdir=str(tmp_path / "b"))
    pipeline.run_pipeline(config_a, formats=("json",))
    pipeline.run_pipeline(config_b, formats=("json",))
    a = open(os.path.join(config_a.outdir, "report.json"), "rb").read()
    b = open(os.path.join(config_b.outdir, "report.json"), "rb").read()
    assert a == b


def test_sex_pipelines_share_no_state(tmp_path):
    config = quick_run_config(
        tmp_path, sex_filter="Both-separately",
        mitigation=pipeline.MitigationSettings(enabled=False),
        outdir=str(tmp_path / "both"),
    )
    report, artifacts = pipeline.run_pipeline(config, formats=("json",))
    assert set(report["per_sex"]) == {"Male", "Female"}
    male = artifacts["Male"]["model"].to_json()
    female = artifacts["Female"]["model"].to_json()
    assert male != female


def test_dataset_summary_totals(quick_run):
    config, report, _ = quick_run
    records = synth.generate_cohort(config.cohort)
    males = [r for r in records if r.sex == "Male"]
    block = report["dataset_summary"]["Male"]
    assert block["admissions"] == len(males)
    eth = block["breakdown"]["ethnic_group"]
    assert sum(cell["admissions"] for cell in eth.values()) == len(males)


def test_stage_error_names_stage(tmp_path):
    bad = synth.biased_demo_config(n_patients=40, seed=3)
    config = pipeline.RunConfig(
        cohort=bad, sex_filter="Male",
        learner=learners.LearnerConfig.defaults("forest", n_estimators=5),
        mitigation=pipeline.MitigationSettings(enabled=True),
        seed=1, outdir=str(tmp_path / "bad"),
    )
    # 40 patients: some ethnic group will lack positives, or a stage fails;
    # whatever breaks first must carry its stage name
    with pytest.raises(PipelineStageError) as excinfo:
        pipeline.run_pipeline(config, emit=False)
    assert excinfo.value.stage in (
        "encode", "split", "downsample", "train", "mitigate_eg", "mitigate_threshold"
    )


# ------------------------------------------------------------- repeats

def test_repeat_evaluate_reports_mean_std(tmp_path):
    config = quick_run_config(tmp_path, outdir=str(tmp_path / "rep"))
    out = pipeline.repeat_evaluate(config, k=3)
    block = out["per_sex"]["Male"]
    for metric in ("auc", "fnr", "fpr", "balanced_accuracy"):
        assert metric in block["mean"]
        assert metric in block["std"]
        assert len(block["per_split"][metric]) == 3
        assert block["std"][metric] >= 0.0


def test_repeat_same_seed_splits_give_zero_std(tmp_path):
    config = quick_run_config(tmp_path, outdir=str(tmp_path / "rep0"))
    out = pipeline.repeat_evaluate(config, k=3, split_seeds=[99, 99, 99])
    for metric, value in out["per_sex"]["Male"]["std"].items():
        assert value == 0.0, metric


def test_repeat_needs_k_at_least_two(tmp_path):
    config = quick_run_config(tmp_path)
    with pytest.raises(ConfigError):
        pipeline.repeat_evaluate(config, k=1)


def test_repeat_auc_stability_at_scale(tmp_path):
    # ten distinct splits on a >=30k-admission cohort keep the AUC spread
    # small (the generalizability protocol's stability property)
    config = pipeline.RunConfig(
        cohort=synth.biased_demo_config(n_patients=4800, seed=7),
        sex_filter="Male",
        learner=learners.LearnerConfig.defaults("forest"),
        mitigation=pipeline.MitigationSettings(enabled=False),
        seed=31,
        outdir=str(tmp_path / "stab"),
    )
    out = pipeline.repeat_evaluate(config, k=10)
    assert out["per_sex"]["Male"]["std"]["auc"] < 0.02


# ------------------------------------------------------------- CLI

def test_cli_end_to_end(tmp_path, capsys):
    cohort_json = tmp_path / "cohort.json"
    cohort_json.write_text(synth.SyntheticCohortConfig(n_patients=250, seed=8).to_json())
    cohort_csv = tmp_path / "cohort.csv"
    assert cli.main(["generate", "--config", str(cohort_json), "--out", str(cohort_csv)]) == 0

    stats_json = tmp_path / "stats.json"
    assert cli.main(["stats", "--in", str(cohort_csv), "--report", str(stats_json)]) == 0
    doc = json.loads(stats_json.read_text())
    assert "los" in doc and "categorical_tests" in doc and "grouped_means" in doc
    means_csv = (tmp_path / "stats_grouped_means.csv").read_text().splitlines()
    assert means_csv[0] == "sex,variable,short_stay_mean,long_stay_mean"
    assert len(means_csv) > 10

    prep = tmp_path / "prep"
    assert cli.main([
        "prepare", "--in", str(cohort_csv), "--out", str(prep), "--sex", "Male",
        "--seed", "4",
    ]) == 0
    model_json = tmp_path / "model.json"
    assert cli.main([
        "train", "--train", str(prep / "train_downsampled_male"),
        "--learner", '{"kind": "forest", "n_estimators": 10, "feature_subsample": "sqrt"}',
        "--out", str(model_json), "--seed", "9",
    ]) == 0
    eval_json = tmp_path / "eval.json"
    assert cli.main([
        "evaluate", "--model", str(model_json),
        "--test", str(prep / "test_male"), "--out", str(eval_json),
    ]) == 0
    result = json.loads(eval_json.read_text())
    assert 0.0 <= result["model_metrics"]["auc"] <= 1.0


def test_cli_run_and_report(tmp_path):
    run_config = quick_run_config(
        tmp_path, n_patients=400,
        learner=learners.LearnerConfig.defaults("forest", n_estimators=10),
        mitigation=pipeline.MitigationSettings(enabled=False),
        outdir=str(tmp_path / "cli_run"),
    )
    config_path = tmp_path / "run.json"
    config_path.write_text(run_config.to_json())
    assert cli.main(["run", "--config", str(config_path)]) == 0
    assert os.path.exists(tmp_path / "cli_run" / "report.json")
    assert cli.main(["report", "--run", str(tmp_path / "cli_run"),
                     "--out", str(tmp_path / "re_emit")]) == 0
    assert os.path.exists(tmp_path / "re_emit" / "report.json")
    # re-emitted JSON matches the original bytes
    original = (tmp_path / "cli_run" / "report.json").read_bytes()
    re_emitted = (tmp_path / "re_emit" / "report.json").read_bytes()
    assert original == re_emitted


def test_cli_repeat(tmp_path):
    run_config = quick_run_config(
        tmp_path, n_patients=400,
        learner=learners.LearnerConfig.defaults("forest", n_estimators=10),
        mitigation=pipeline.MitigationSettings(enabled=False),
        outdir=str(tmp_path / "cli_rep"),
    )
    config_path = tmp_path / "run.json"
    config_path.write_text(run_config.to_json())
    assert cli.main(["repeat", "--config", str(config_path), "--k", "2"]) == 0
    doc = json.loads((tmp_path / "cli_rep" / "repeat_report.json").read_text())
    assert doc["provenance"]["k"] == 2


def test_cli_error_exit_code(tmp_path):
    missing = tmp_path / "nope.csv"
    assert cli.main(["stats", "--in", str(missing),
                     "--report", str(tmp_path / "s.json")]) == 1

    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    assert cli.main(["generate", "--config", str(bad_json),
                     "--out", str(tmp_path / "x.csv")]) == 1
