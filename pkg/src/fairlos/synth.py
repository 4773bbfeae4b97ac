"""Synthetic admission-cohort generator.

Marginal distributions default to the published cohort description
(demographic shares per sex and per-condition admission prevalence); the
joint distribution is invented plumbing: features are sampled independently
per patient/admission and coupled to the long-stay label through an explicit
additive logit model. Per-group logit offsets (prevalence shift) and
label-noise rates (measurement bias) inject controllable disparity for the
mitigation algorithms to correct; both default to zero.

Determinism: every patient draws from a generator seeded by
(master seed, patient index), so output is independent of any sharding and
identical configs reproduce identical cohorts byte for byte. Stay lengths
for both classes are drawn before the class is selected, so configs that
differ only in group offsets share every random draw; raising an offset can
only switch labels from short to long (exact monotone coupling).

Lifestyle marginals (BMI, smoking, alcohol, physical activity, autism,
medications) are not published as distributions; the defaults here are
invented and overridable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import records as rec
from .errors import ConfigError

# Published demographic shares of admissions, per sex (percent).
AGE_MARGINALS = {
    "Male": (4.850, 15.129, 21.546, 23.786, 20.313, 11.250, 3.126),
    "Female": (5.089, 13.918, 20.365, 22.824, 21.226, 11.359, 5.219),
}
ETHNICITY_MARGINALS = {
    "Male": (1.785, 0.232, 0.235, 19.235, 78.513),
    "Female": (1.882, 0.147, 0.187, 17.529, 80.256),
}
WIMD_MARGINALS = {
    "Male": (28.105, 21.524, 15.315, 12.964, 9.506, 12.586),
    "Female": (27.286, 22.874, 15.550, 14.792, 9.380, 10.117),
}
SEX_SPLIT = {"Male": 4929 / 9618, "Female": 4689 / 9618}

# Published per-condition admission prevalence (percent), per sex; conditions
# absent from the published ranking default to 0.
CONDITION_PREVALENCE = {
    "Male": {
        "EPILEPSY": 29.410, "DIABETES": 24.373, "CHRONIC AIRWAY DISEASES": 19.519,
        "MENTAL ILLNESS": 17.540, "CANCER": 12.098, "CHRONIC KIDNEY DISEASE": 10.426,
        "CORONARY HEART DISEASE": 9.617, "THYROID DISORDERS": 8.953,
        "CARDIAC ARRHYTHMIAS": 7.901, "CEREBRAL PALSY": 7.896, "DEMENTIA": 5.302,
        "CHRONIC ARTHRITIS": 5.232, "CHRONIC PNEUMONIA": 5.091, "HEART FAILURE": 4.622,
        "REFLUX DISORDERS": 4.590, "HEARING LOSS": 3.155, "OSTEOPOROSIS": 3.074,
        "ANAEMIA": 2.648, "DYSPHAGIA": 2.519, "INSOMNIA": 2.341,
        "VISUAL IMPAIRMENT": 2.308, "STROKE": 2.190, "PSORIASIS": 2.114,
        "CHRONIC CONSTIPATION": 1.812, "IBD": 1.715, "PARKINSONS": 1.499,
        "PVD": 1.418, "BRONCHIECTASIS": 1.176, "CIRRHOSIS": 0.955,
        "NEUROPATHIC PAIN": 0.917, "CHRONIC DIARRHOEA": 0.874,
        "BARRETTS OESOPHAGUS": 0.760, "INTERSTITIAL LUNG DISEASE": 0.561,
        "CHRONIC PAIN CONDITIONS": 0.512, "HYPERTENSION": 0.232, "TOURETTE": 0.156,
    },
    "Female": {
        "EPILEPSY": 24.097, "CHRONIC AIRWAY DISEASES": 22.755, "DIABETES": 21.686,
        "THYROID DISORDERS": 17.030, "MENTAL ILLNESS": 15.710, "CANCER": 14.641,
        "CHRONIC KIDNEY DISEASE": 11.963, "CHRONIC ARTHRITIS": 8.563,
        "CARDIAC ARRHYTHMIAS": 7.108, "CEREBRAL PALSY": 6.357,
        "CORONARY HEART DISEASE": 6.203, "DEMENTIA": 5.794, "OSTEOPOROSIS": 4.640,
        "REFLUX DISORDERS": 4.594, "HEART FAILURE": 3.685, "CHRONIC PNEUMONIA": 3.451,
        "ANAEMIA": 3.247, "STROKE": 2.240, "HEARING LOSS": 2.155,
        "CHRONIC CONSTIPATION": 2.075, "IBD": 2.064, "DYSPHAGIA": 1.950,
        "VISUAL IMPAIRMENT": 1.700, "CHRONIC PAIN CONDITIONS": 1.552,
        "INSOMNIA": 1.313, "MENOPAUSAL AND PRE-MENOPAUSAL": 1.296, "PSORIASIS": 1.291,
        "CHRONIC DIARRHOEA": 0.955, "PVD": 0.842, "NEUROPATHIC PAIN": 0.824,
        "PARKINSONS": 0.603, "CIRRHOSIS": 0.455, "BARRETTS OESOPHAGUS": 0.438,
        "INTERSTITIAL LUNG DISEASE": 0.426, "BRONCHIECTASIS": 0.409,
        "HYPERTENSION": 0.250, "POLYCYSTIC OVARY SYNDROME": 0.210,
    },
}

# Invented lifestyle defaults (no published distributions); overridable.
BMI_MARGINALS = (0.06, 0.30, 0.22, 0.16, 0.10, 0.16)
SMOKING_MARGINALS = (0.22, 0.50, 0.28)
ALCOHOL_MARGINALS = (0.25, 0.47, 0.28)
PHYSICAL_MARGINALS = (0.35, 0.40, 0.25)
AUTISM_RATE = 0.12
MEDICATIONS_RATE = 0.45


def _pct(vec):
    arr = np.asarray(vec, dtype=np.float64)
    return (arr / arr.sum()).tolist()


def _default_condition_prevalence():
    out = {}
    for sex in rec.SEXES:
        table = CONDITION_PREVALENCE[sex]
        out[sex] = {name: table.get(name, 0.0) / 100.0 for name in rec.CONDITIONS}
    return out


@dataclass
class GroupBias:
    """Disparity injection for one ethnic group."""

    logit_offset: float = 0.0
    label_noise: float = 0.0


@dataclass
class SyntheticCohortConfig:
    n_patients: int = 5000
    admissions_per_patient_mean: float = 6.5
    admissions_per_patient_dispersion: float = 1.2
    sex_split: dict = field(default_factory=lambda: dict(SEX_SPLIT))
    age_marginals: dict = field(
        default_factory=lambda: {s: _pct(AGE_MARGINALS[s]) for s in rec.SEXES}
    )
    ethnicity_marginals: dict = field(
        default_factory=lambda: {s: _pct(ETHNICITY_MARGINALS[s]) for s in rec.SEXES}
    )
    wimd_marginals: dict = field(
        default_factory=lambda: {s: _pct(WIMD_MARGINALS[s]) for s in rec.SEXES}
    )
    condition_prevalence: dict = field(default_factory=_default_condition_prevalence)
    bmi_marginals: list = field(default_factory=lambda: list(BMI_MARGINALS))
    smoking_marginals: list = field(default_factory=lambda: list(SMOKING_MARGINALS))
    alcohol_marginals: list = field(default_factory=lambda: list(ALCOHOL_MARGINALS))
    physical_marginals: list = field(default_factory=lambda: list(PHYSICAL_MARGINALS))
    autism_rate: float = AUTISM_RATE
    medications_rate: float = MEDICATIONS_RATE
    base_long_stay_logit: float = -3.3
    effect_weights: dict = field(
        default_factory=lambda: {
            "age": 0.7,
            "comorbidity": 0.4,
            "prior_hospital_days": 0.85,
            "deprivation": 0.12,
        }
    )
    group_bias: dict = field(
        default_factory=lambda: {g: GroupBias() for g in rec.ETHNIC_GROUPS}
    )
    # stay-length mixture: pmf over {0..3} for short stays; long stays start
    # at the pivot with a geometric body plus a rare far tail
    short_stay_pmf: list = field(default_factory=lambda: [0.45, 0.21, 0.19, 0.15])
    long_stay_pivot: int = 4
    long_stay_body_p: float = 0.19
    long_tail_mass: float = 0.025
    long_tail_start: int = 18
    long_tail_p: float = 0.035
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.group_bias, dict):
            self.group_bias = {
                g: (b if isinstance(b, GroupBias) else GroupBias(**b))
                for g, b in self.group_bias.items()
            }

    def validate(self):
        if self.n_patients < 1:
            raise ConfigError("n_patients must be positive")
        if self.admissions_per_patient_mean < 1:
            raise ConfigError("admissions_per_patient_mean must be >= 1")
        _check_pvec("sex_split", [self.sex_split[s] for s in rec.SEXES])
        for sex in rec.SEXES:
            _check_pvec(f"age_marginals[{sex}]", self.age_marginals[sex], len(rec.AGE_GROUPS))
            _check_pvec(
                f"ethnicity_marginals[{sex}]",
                self.ethnicity_marginals[sex],
                len(rec.ETHNIC_GROUPS),
            )
            _check_pvec(
                f"wimd_marginals[{sex}]", self.wimd_marginals[sex], len(rec.WIMD_QUINTILES)
            )
            for name, p in self.condition_prevalence[sex].items():
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"condition prevalence {name}={p} outside [0,1]")
        _check_pvec("bmi_marginals", self.bmi_marginals, len(rec.BMI_CATEGORIES))
        for name, vec in (
            ("smoking_marginals", self.smoking_marginals),
            ("alcohol_marginals", self.alcohol_marginals),
            ("physical_marginals", self.physical_marginals),
        ):
            _check_pvec(name, vec, 3)
        _check_pvec("short_stay_pmf", self.short_stay_pmf, self.long_stay_pivot)
        for g, bias in self.group_bias.items():
            if g not in rec.ETHNIC_GROUPS:
                raise ConfigError(f"group_bias for unknown group {g!r}")
            if not 0.0 <= bias.label_noise < 0.5:
                raise ConfigError(f"label_noise for {g} must be in [0, 0.5)")
        if not 0.0 <= self.long_tail_mass < 1.0:
            raise ConfigError("long_tail_mass must be in [0,1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        return self

    def to_json(self):
        doc = {
            k: v
            for k, v in self.__dict__.items()
            if k != "group_bias"
        }
        doc["group_bias"] = {
            g: {"logit_offset": b.logit_offset, "label_noise": b.label_noise}
            for g, b in self.group_bias.items()
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed cohort config JSON: {exc}") from exc
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown cohort config keys: {sorted(unknown)}")
        return cls(**doc)


def _check_pvec(name, vec, expected_len=None):
    arr = np.asarray(vec, dtype=np.float64)
    if expected_len is not None and arr.size != expected_len:
        raise ConfigError(f"{name} must have {expected_len} entries, got {arr.size}")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ConfigError(f"{name} entries must lie in [0,1]")
    if abs(arr.sum() - 1.0) > 1e-9:
        raise ConfigError(f"{name} must sum to 1 (got {arr.sum():.12f})")


def biased_demo_config(n_patients=4800, seed=7):
    """A cohort config with boosted minority shares and injected group bias,
    used by the mitigation demonstrations and the end-to-end tests.

    The offsets shift where each group's long stays sit in feature space
    (which the models cannot see directly), producing a wide unmitigated
    per-group FNR spread for the mitigation stage to shrink.
    """
    config = SyntheticCohortConfig(n_patients=n_patients, seed=seed)
    boosted = _pct((10.0, 10.0, 10.0, 14.0, 56.0))
    config.ethnicity_marginals = {s: list(boosted) for s in rec.SEXES}
    config.group_bias = {
        "Asian": GroupBias(logit_offset=2.4, label_noise=0.08),
        "Black": GroupBias(logit_offset=3.6, label_noise=0.15),
        "Other": GroupBias(logit_offset=-2.8, label_noise=0.0),
        "Unknown": GroupBias(logit_offset=0.8, label_noise=0.0),
        "White": GroupBias(logit_offset=0.0, label_noise=0.0),
    }
    return config


def _sample_patient(config, patient_index):
    """All admissions for one patient; deterministic in (seed, index)."""
    rng = np.random.default_rng([int(config.seed), int(patient_index)])
    sex = "Male" if rng.random() < config.sex_split["Male"] else "Female"
    age_idx = int(rng.choice(len(rec.AGE_GROUPS), p=config.age_marginals[sex]))
    eth_idx = int(rng.choice(len(rec.ETHNIC_GROUPS), p=config.ethnicity_marginals[sex]))
    wimd_idx = int(rng.choice(len(rec.WIMD_QUINTILES), p=config.wimd_marginals[sex]))
    bmi_idx = int(rng.choice(len(rec.BMI_CATEGORIES), p=config.bmi_marginals))
    smoking = rec.YES_NO_UNKNOWN[int(rng.choice(3, p=config.smoking_marginals))]
    alcohol = rec.YES_NO_UNKNOWN[int(rng.choice(3, p=config.alcohol_marginals))]
    physical = rec.YES_NO_UNKNOWN[int(rng.choice(3, p=config.physical_marginals))]
    autism = int(rng.random() < config.autism_rate)
    medications = int(rng.random() < config.medications_rate)
    ethnic_group = rec.ETHNIC_GROUPS[eth_idx]

    mean_extra = config.admissions_per_patient_mean - 1.0
    k = config.admissions_per_patient_dispersion
    n_adm = 1 + int(rng.negative_binomial(k, k / (k + mean_extra))) if mean_extra > 0 else 1

    prevalence = np.array(
        [config.condition_prevalence[sex][c] for c in rec.CONDITIONS], dtype=np.float64
    )
    flags = (rng.random((n_adm, len(rec.CONDITIONS))) < prevalence).astype(np.int64)
    # invariants require the 24h condition count to fit under the 1..21
    # total-comorbidity band
    for i in range(n_adm):
        extra_flags = int(flags[i].sum()) - 21
        if extra_flags > 0:
            on = np.flatnonzero(flags[i])
            flags[i, on[21:]] = 0

    adm1 = rng.poisson(0.9, size=n_adm)
    adm3 = adm1 + rng.poisson(1.4, size=n_adm)
    epi1 = adm1 + rng.poisson(0.8, size=n_adm)
    epi3 = epi1 + rng.poisson(1.6, size=n_adm)
    com1 = rng.poisson(1.0, size=n_adm)
    com3 = com1 + rng.poisson(1.5, size=n_adm)
    days1 = rng.poisson(2.2 * adm1)
    days3 = days1 + rng.poisson(2.2 * (adm3 - adm1) + 0.3)

    n_cond_24h = flags.sum(axis=1)
    extra_comorbid = rng.poisson(0.5 + 0.35 * age_idx, size=n_adm)
    total_comorbidity = np.minimum(21, np.maximum(1, n_cond_24h + extra_comorbid))
    total_comorbidity = np.maximum(total_comorbidity, n_cond_24h)
    episodes_24h = 1 + rng.poisson(0.8, size=n_adm)

    ew = config.effect_weights
    bias = config.group_bias.get(ethnic_group, GroupBias())
    dep_score = 0.0 if wimd_idx == 5 else 3.0 - (wimd_idx + 1)
    logit = (
        config.base_long_stay_logit
        + ew.get("age", 0.0) * (age_idx - 2)
        + ew.get("comorbidity", 0.0) * (total_comorbidity - 2)
        + ew.get("prior_hospital_days", 0.0) * np.log1p(days3)
        + ew.get("deprivation", 0.0) * dep_score
        + bias.logit_offset
    )
    p_long = 1.0 / (1.0 + np.exp(-logit))

    u_class = rng.random(n_adm)
    v_noise = rng.random(n_adm)
    # both stay lengths are drawn up front so the random stream is identical
    # across configs that differ only in group bias
    short_los = rng.choice(config.long_stay_pivot, size=n_adm, p=config.short_stay_pmf)
    long_los = config.long_stay_pivot + (rng.geometric(config.long_stay_body_p, size=n_adm) - 1)
    tail_event = rng.random(n_adm) < config.long_tail_mass
    tail_los = config.long_tail_start + (rng.geometric(config.long_tail_p, size=n_adm) - 1)
    long_los = np.where(tail_event, np.maximum(long_los, tail_los), long_los)

    is_long = u_class < p_long
    flip = v_noise < bias.label_noise
    is_long = np.where(flip, ~is_long, is_long)
    los = np.where(is_long, long_los, short_los)

    patient_id = f"P{patient_index:06d}"
    out = []
    for j in range(n_adm):
        out.append(
            rec.AdmissionRecord(
                admission_id=f"{patient_id}A{j:02d}",
                patient_id=patient_id,
                sex=sex,
                age_group=rec.AGE_GROUPS[age_idx],
                ethnic_group=ethnic_group,
                wimd_quintile=rec.WIMD_QUINTILES[wimd_idx],
                bmi_category=rec.BMI_CATEGORIES[bmi_idx],
                smoking_history=smoking,
                alcohol_history=alcohol,
                physical=physical,
                autism=autism,
                medications=medications,
                num_prvadmission_1yr=int(adm1[j]),
                num_prvepisodes_1yr=int(epi1[j]),
                num_prvcomorbid_1yr=int(com1[j]),
                num_prvadmission_3yr=int(adm3[j]),
                num_prvepisodes_3yr=int(epi3[j]),
                num_prvcomorbid_3yr=int(com3[j]),
                num_prvhospital_days_1yr=int(days1[j]),
                num_prvhospital_days_3yr=int(days3[j]),
                total_comorbidity=int(total_comorbidity[j]),
                numepisodes_24hrs=int(episodes_24h[j]),
                numcomorbidities_24hrs=int(n_cond_24h[j]),
                cond_flags=flags[j].tolist(),
                los_days=int(los[j]),
            )
        )
    return out


def generate_cohort(config):
    """Generate the full admission list for a config (pure in config)."""
    config.validate()
    records = []
    for i in range(config.n_patients):
        records.extend(_sample_patient(config, i))
    return records


@dataclass
class CohortValidationReport:
    n_records: int
    marginal_deviations: dict
    prevalence_deviations: dict
    invariant_violations: list

    @property
    def max_marginal_deviation(self):
        worst = 0.0
        for table in self.marginal_deviations.values():
            for dev in table.values():
                worst = max(worst, abs(dev))
        return worst


def validate_cohort(records, config):
    """Compare a cohort's empirical marginals and prevalences with the
    configured ones, and count record invariant violations (should be 0)."""
    if not records:
        raise ConfigError("cannot validate an empty cohort")
    violations = []
    for record in records:
        violations.extend(record.invariant_violations())

    marginal_deviations = {}

    def _emp(values, categories):
        values = np.asarray(values)
        return {c: float(np.mean(values == c)) for c in categories}

    by_sex = {s: [r for r in records if r.sex == s] for s in rec.SEXES}
    sex_emp = {s: len(by_sex[s]) / len(records) for s in rec.SEXES}
    # per-admission sex share deviates from the per-patient split only through
    # admission-count noise; reported against the configured split
    marginal_deviations["sex"] = {
        s: sex_emp[s] - config.sex_split[s] for s in rec.SEXES
    }
    for sex in rec.SEXES:
        if not by_sex[sex]:
            continue
        rows = by_sex[sex]
        emp = _emp([r.age_group for r in rows], rec.AGE_GROUPS)
        marginal_deviations[f"age[{sex}]"] = {
            c: emp[c] - config.age_marginals[sex][i]
            for i, c in enumerate(rec.AGE_GROUPS)
        }
        emp = _emp([r.ethnic_group for r in rows], rec.ETHNIC_GROUPS)
        marginal_deviations[f"ethnicity[{sex}]"] = {
            c: emp[c] - config.ethnicity_marginals[sex][i]
            for i, c in enumerate(rec.ETHNIC_GROUPS)
        }
        emp = _emp([r.wimd_quintile for r in rows], rec.WIMD_QUINTILES)
        marginal_deviations[f"wimd[{sex}]"] = {
            c: emp[c] - config.wimd_marginals[sex][i]
            for i, c in enumerate(rec.WIMD_QUINTILES)
        }

    prevalence_deviations = {}
    for sex in rec.SEXES:
        rows = by_sex[sex]
        if not rows:
            continue
        flags = np.array([r.cond_flags for r in rows], dtype=np.float64)
        emp = flags.mean(axis=0)
        prevalence_deviations[sex] = {
            c: float(emp[i] - config.condition_prevalence[sex][c])
            for i, c in enumerate(rec.CONDITIONS)
        }

    return CohortValidationReport(
        n_records=len(records),
        marginal_deviations=marginal_deviations,
        prevalence_deviations=prevalence_deviations,
        invariant_violations=violations,
    )
