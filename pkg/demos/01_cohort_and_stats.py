#!/usr/bin/env python3
"""Generate a synthetic admission cohort and walk through the descriptive
statistics: demographic marginals, the stay distribution with its Tukey
whiskers, the derived stay threshold, and the equal-probability tests.

Run:  python demos/01_cohort_and_stats.py
"""

import numpy as np

from fairlos import stats, synth
from fairlos.preprocess import derive_los_class, long_stay_rate
from fairlos.synth import SyntheticCohortConfig

config = SyntheticCohortConfig(n_patients=4000, seed=42)
records = synth.generate_cohort(config)
print(f"generated {len(records)} admissions for {config.n_patients} patients")

report = synth.validate_cohort(records, config)
print(f"invariant violations: {len(report.invariant_violations)}")
print(f"worst marginal deviation from the configured tables: "
      f"{report.max_marginal_deviation:.4f}")

print("\nadmission shares by ethnic group (male):")
males = [r for r in records if r.sex == "Male"]
for group in ("Asian", "Black", "Other", "Unknown", "White"):
    share = np.mean([r.ethnic_group == group for r in males])
    print(f"  {group:8s} {share:7.4f}")

# ---- stay distribution, whiskers, and the threshold -----------------------
los = np.array([r.los_days for r in records], dtype=float)
summary = stats.quartile_summary(los)
print(f"\nLOS quartiles: q1={summary.q1:.0f} q2={summary.q2:.0f} q3={summary.q3:.0f} "
      f"(iqr {summary.iqr:.0f})")
print(f"upper whisker {summary.upper_whisker:.0f}; "
      f"{summary.outlier_indices.size} outlier admissions beyond it")

keep = np.ones(los.size, dtype=bool)
keep[summary.outlier_indices] = False
psi = stats.los_threshold_psi(los[keep])
print(f"trimmed mean {los[keep].mean():.3f} days -> stay threshold psi = {psi}")

labels = derive_los_class(los.astype(int), psi)
print(f"long-stay rate at psi={psi}: {long_stay_rate(labels):.3f}")

# ---- equal-probability tests ----------------------------------------------
print("\ndo the WIMD quintiles occur with equal probability? (male admissions)")
wimd_counts = [sum(1 for r in males if r.wimd_quintile == q)
               for q in ("1", "2", "3", "4", "5", "Unknown")]
statistic, p = stats.chi_square_gof(wimd_counts)
print(f"  chi-square statistic {statistic:.1f}, p = {p:.3g} "
      f"-> {'reject' if p < 0.05 else 'retain'} equal probabilities")

autism_yes = sum(r.autism for r in males)
p = stats.binomial_test(autism_yes, len(males), 0.5)
print(f"  autism flag: {autism_yes}/{len(males)} positive, exact binomial "
      f"p = {p:.3g} -> {'reject' if p < 0.05 else 'retain'} 50/50")

# ---- normality and correlation against the label ---------------------------
days3 = np.array([r.num_prvhospital_days_3yr for r in males], dtype=float)
statistic, p = stats.ks_normality(days3)
print(f"\nKS normality of prior 3-year hospital days: statistic {statistic:.3f}, "
      f"p = {p:.3g} (non-normal, as expected for counts)")
male_labels = np.array([1 if r.los_days >= psi else 0 for r in males])
rho, p = stats.spearman(days3, male_labels)
print(f"spearman(prior hospital days, long-stay label): rho = {rho:.3f}, p = {p:.3g}")
