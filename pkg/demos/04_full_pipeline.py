#!/usr/bin/env python3
"""One reproducible end-to-end run: config in, report + artifacts out, plus
the repeated-split generalizability protocol. Everything in the output
directory is recomputable from the config hash and master seed it names.

Run:  python demos/04_full_pipeline.py   (~1 minute; writes ./demo_run/)
"""

import json

from fairlos import learners, pipeline, synth

config = pipeline.RunConfig(
    cohort=synth.biased_demo_config(n_patients=2000, seed=5),
    sex_filter="Both-separately",
    learner=learners.LearnerConfig.defaults("forest", n_estimators=50),
    mitigation=pipeline.MitigationSettings(enabled=True, epsilon=0.2, iterations=4),
    repeats=5,
    seed=2024,
    outdir="demo_run",
)
print(f"config hash {config.config_hash()}, master seed {config.seed}")

report, artifacts = pipeline.run_pipeline(config)
print(f"\nwrote report + artifacts to {config.outdir}/")
print(f"stay threshold psi = {report['provenance']['psi']}")
for sex, block in report["per_sex"].items():
    m = block["model_metrics"]
    print(f"\n{sex}: auc={m['auc']:.3f} fnr={m['fnr']:.3f} fpr={m['fpr']:.3f} "
          f"balanced_accuracy={m['balanced_accuracy']:.3f}")
    ranges = block["mitigation"]["ranges"]
    print(f"  unmitigated FNR range {ranges['unmitigated']['fnr']:.3f} | "
          f"threshold {ranges['threshold_optimizer']['fnr']:.3f} | "
          f"EG {ranges['exponentiated_gradient']['fnr']:.3f}")

# ---- generalizability: repeated random splits --------------------------------
repeat = pipeline.repeat_evaluate(config, k=5)
print("\nrepeated 50-50 splits (k=5), mean ± std per metric:")
for sex, block in repeat["per_sex"].items():
    mean, std = block["mean"], block["std"]
    print(f"  {sex}: auc {mean['auc']:.3f}±{std['auc']:.3f}  "
          f"fnr {mean['fnr']:.3f}±{std['fnr']:.3f}  "
          f"balanced_accuracy {mean['balanced_accuracy']:.3f}±{std['balanced_accuracy']:.3f}")

# the report is canonical JSON: parse -> re-emit -> identical bytes
raw = open(f"{config.outdir}/report.json", "rb").read()
assert pipeline.report_to_json_bytes(json.loads(raw)) == raw
print("\nreport.json round-trips byte-identically; re-running this script "
      "reproduces it exactly")
