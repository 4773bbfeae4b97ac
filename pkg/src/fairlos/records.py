"""Admission data model: category vocabularies, the AdmissionRecord type,
record validation, and the admissions CSV format.

One row describes one hospital admission of one patient: demographics,
lifestyle history, prior-hospitalisation counts, condition flags observed in
the first 24 hours, and the length of stay in whole days.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields as dc_fields

from .errors import InvalidRecordError, SchemaError

SEXES = ("Male", "Female")

AGE_GROUPS = ("<30", "30-39", "40-49", "50-59", "60-69", "70-79", "80+")

ETHNIC_GROUPS = ("Asian", "Black", "Other", "Unknown", "White")

WIMD_QUINTILES = ("1", "2", "3", "4", "5", "Unknown")  # 1 = most deprived

BMI_CATEGORIES = (
    "underweight",
    "normal",
    "pre-obesity",
    "obesity-I",
    "obesity-III",
    "Unknown",
)

YES_NO_UNKNOWN = ("Yes", "No", "Unknown")

# Canonical long-term-condition list; order is fixed and load-bearing (the
# cond_flags vector and the COND_* CSV columns follow it).
CONDITIONS = (
    "ANAEMIA",
    "BARRETTS OESOPHAGUS",
    "BRONCHIECTASIS",
    "CANCER",
    "CARDIAC ARRHYTHMIAS",
    "CEREBRAL PALSY",
    "CHRONIC CONSTIPATION",
    "CHRONIC DIARRHOEA",
    "CHRONIC AIRWAY DISEASES",
    "CHRONIC ARTHRITIS",
    "CHRONIC PAIN CONDITIONS",
    "CHRONIC PNEUMONIA",
    "CIRRHOSIS",
    "CHRONIC KIDNEY DISEASE",
    "CORONARY HEART DISEASE",
    "DEMENTIA",
    "DIABETES",
    "DYSPHAGIA",
    "EPILEPSY",
    "HEARING LOSS",
    "HEART FAILURE",
    "HYPERTENSION",
    "IBD",
    "INSOMNIA",
    "INTERSTITIAL LUNG DISEASE",
    "MENOPAUSAL AND PRE-MENOPAUSAL",
    "MENTAL ILLNESS",
    "MS",
    "NEUROPATHIC PAIN",
    "OSTEOPOROSIS",
    "PARKINSONS",
    "POLYCYSTIC OVARY SYNDROME",
    "PSORIASIS",
    "PVD",
    "REFLUX DISORDERS",
    "STROKE",
    "THYROID DISORDERS",
    "TOURETTE",
    "VISUAL IMPAIRMENT",
)

N_CONDITIONS = len(CONDITIONS)

COND_COLUMNS = tuple("COND_" + name.replace(" ", "_").replace("-", "_") for name in CONDITIONS)

# Numeric count fields, in CSV column order.
COUNT_FIELDS = (
    "num_prvadmission_1yr",
    "num_prvepisodes_1yr",
    "num_prvcomorbid_1yr",
    "num_prvadmission_3yr",
    "num_prvepisodes_3yr",
    "num_prvcomorbid_3yr",
    "num_prvhospital_days_1yr",
    "num_prvhospital_days_3yr",
)


@dataclass
class AdmissionRecord:
    """One hospital admission.

    ``cond_flags`` holds exactly ``N_CONDITIONS`` 0/1 entries in the
    canonical ``CONDITIONS`` order.
    """

    admission_id: str
    patient_id: str
    sex: str
    age_group: str
    ethnic_group: str
    wimd_quintile: str
    bmi_category: str
    smoking_history: str
    alcohol_history: str
    physical: str
    autism: int
    medications: int
    num_prvadmission_1yr: int
    num_prvepisodes_1yr: int
    num_prvcomorbid_1yr: int
    num_prvadmission_3yr: int
    num_prvepisodes_3yr: int
    num_prvcomorbid_3yr: int
    num_prvhospital_days_1yr: int
    num_prvhospital_days_3yr: int
    total_comorbidity: int
    numepisodes_24hrs: int
    numcomorbidities_24hrs: int
    cond_flags: list = field(default_factory=list)
    los_days: int = 0

    def validate(self):
        """Raise InvalidRecordError / SchemaError on any invariant violation."""
        _check_member("sex", self.sex, SEXES)
        _check_member("age_group", self.age_group, AGE_GROUPS)
        _check_member("ethnic_group", self.ethnic_group, ETHNIC_GROUPS)
        _check_member("wimd_quintile", str(self.wimd_quintile), WIMD_QUINTILES)
        _check_member("bmi_category", self.bmi_category, BMI_CATEGORIES)
        _check_member("smoking_history", self.smoking_history, YES_NO_UNKNOWN)
        _check_member("alcohol_history", self.alcohol_history, YES_NO_UNKNOWN)
        _check_member("physical", self.physical, YES_NO_UNKNOWN)
        if self.autism not in (0, 1) or self.medications not in (0, 1):
            raise InvalidRecordError(
                f"{self.admission_id}: autism/medications must be 0/1 flags"
            )
        for name in COUNT_FIELDS + ("total_comorbidity", "numepisodes_24hrs",
                                    "numcomorbidities_24hrs", "los_days"):
            value = getattr(self, name)
            if value is None or value < 0:
                raise InvalidRecordError(
                    f"{self.admission_id}: {name}={value!r} must be a non-negative integer"
                )
        for stem in ("num_prvadmission", "num_prvepisodes", "num_prvcomorbid",
                     "num_prvhospital_days"):
            one = getattr(self, stem + "_1yr")
            three = getattr(self, stem + "_3yr")
            if one > three:
                raise InvalidRecordError(
                    f"{self.admission_id}: {stem}_1yr={one} exceeds {stem}_3yr={three}"
                )
        if self.total_comorbidity < 1:
            raise InvalidRecordError(
                f"{self.admission_id}: total_comorbidity must be >= 1"
            )
        if self.numcomorbidities_24hrs > self.total_comorbidity:
            raise InvalidRecordError(
                f"{self.admission_id}: numcomorbidities_24hrs="
                f"{self.numcomorbidities_24hrs} exceeds total_comorbidity="
                f"{self.total_comorbidity}"
            )
        if len(self.cond_flags) != N_CONDITIONS:
            raise InvalidRecordError(
                f"{self.admission_id}: cond_flags must have exactly "
                f"{N_CONDITIONS} entries, got {len(self.cond_flags)}"
            )
        if any(flag not in (0, 1) for flag in self.cond_flags):
            raise InvalidRecordError(f"{self.admission_id}: cond_flags must be 0/1")

    def invariant_violations(self):
        """Return a list of violation messages instead of raising (used by
        cohort validation reports)."""
        try:
            self.validate()
        except (InvalidRecordError, SchemaError) as exc:
            return [str(exc)]
        return []


def _check_member(name, value, allowed):
    if value not in allowed:
        raise SchemaError(f"{name}={value!r} not in declared categories {allowed}")


CSV_HEADER = (
    "ADMISSION_ID",
    "PATIENT_ID",
    "SEX",
    "AGEGRP_AT_ADMIS_DT",
    "ETHNIC_GROUP",
    "WIMD",
    "BMI",
    "SMOKING_HISTORY",
    "ALCOHOL_HISTORY",
    "PHYSICAL",
    "AUTISM",
    "MEDICATIONS",
    "NUM_PRVADMISSION_1YR",
    "NUM_PRVEPISODES_1YR",
    "NUM_PRVCOMORBID_1YR",
    "NUM_PRVADMISSION_3YR",
    "NUM_PRVEPISODES_3YR",
    "NUM_PRVCOMORBID_3YR",
    "NUM_PRVHOSPITAL_DAYS_1YR",
    "NUM_PRVHOSPITAL_DAYS_3YR",
    "TOTAL_COMORBIDITY",
    "NUMEPISODES_24HRS",
    "NUMCOMORBIDITIES_24HRS",
) + COND_COLUMNS + ("LOS_DAYS",)


def record_to_row(record):
    row = [
        record.admission_id,
        record.patient_id,
        record.sex,
        record.age_group,
        record.ethnic_group,
        str(record.wimd_quintile),
        record.bmi_category,
        record.smoking_history,
        record.alcohol_history,
        record.physical,
        str(record.autism),
        str(record.medications),
    ]
    row += [str(getattr(record, name)) for name in COUNT_FIELDS]
    row += [
        str(record.total_comorbidity),
        str(record.numepisodes_24hrs),
        str(record.numcomorbidities_24hrs),
    ]
    row += [str(flag) for flag in record.cond_flags]
    row.append(str(record.los_days))
    return row


def row_to_record(row):
    if len(row) != len(CSV_HEADER):
        raise InvalidRecordError(
            f"expected {len(CSV_HEADER)} columns, got {len(row)}"
        )
    values = dict(zip(CSV_HEADER, row))
    try:
        return AdmissionRecord(
            admission_id=values["ADMISSION_ID"],
            patient_id=values["PATIENT_ID"],
            sex=values["SEX"],
            age_group=values["AGEGRP_AT_ADMIS_DT"],
            ethnic_group=values["ETHNIC_GROUP"],
            wimd_quintile=values["WIMD"],
            bmi_category=values["BMI"],
            smoking_history=values["SMOKING_HISTORY"],
            alcohol_history=values["ALCOHOL_HISTORY"],
            physical=values["PHYSICAL"],
            autism=int(values["AUTISM"]),
            medications=int(values["MEDICATIONS"]),
            **{name: int(values[name.upper()]) for name in COUNT_FIELDS},
            total_comorbidity=int(values["TOTAL_COMORBIDITY"]),
            numepisodes_24hrs=int(values["NUMEPISODES_24HRS"]),
            numcomorbidities_24hrs=int(values["NUMCOMORBIDITIES_24HRS"]),
            cond_flags=[int(values[col]) for col in COND_COLUMNS],
            los_days=int(values["LOS_DAYS"]),
        )
    except ValueError as exc:
        raise InvalidRecordError(f"non-integer numeric field: {exc}") from exc


def write_admissions_csv(path, records):
    """Write records in the admissions CSV format (one row per admission)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record_to_row(record))


def read_admissions_csv(path, validate=True):
    """Read an admissions CSV; validates every record unless told not to."""
    records = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise SchemaError(f"{path}: admissions CSV header does not match the expected layout")
        for row in reader:
            record = row_to_record(row)
            if validate:
                record.validate()
            records.append(record)
    return records
