"""Cohort and ground-truth persistence.

Cohorts serialize to CSV with a fixed documented header (one column per
record field, enums as lowercase strings) plus a JSON schema sidecar carrying
the treatment registry and conversion-table versions. Ground truth persists
as version-tagged JSON so validation runs can recompute oracles. Floats are
written with ``repr`` so files round-trip bit-exactly and reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import tempfile
from pathlib import Path

from .domain import (
    CaseFeatures,
    DEFAULT_MEQ_TABLE,
    DoseMeq,
    EncounterRecord,
    NauseaLevel,
    OradeRecord,
    PainScore,
    SedationLevel,
    Sex,
    Treatment,
)
from .learners import CorruptArtifact, VersionMismatch
from .synthgen import Cohort, GENERATOR_VERSION, PositivityViolation, ScmGroundTruth

DATA_SCHEMA_VERSION = 1

COHORT_COLUMNS = (
    "age", "weight_kg", "sex", "asa_class", "surgery_duration_min",
    "surgery_type", "chronic_opioid_use", "comorbidity_score",
    "opiate", "administered_dose_meq",
    "pain_arrival", "pain_pre_dosing", "pain_discharge",
    "nausea", "vomiting", "sedation", "dizziness", "itching",
    "urinary_retention", "confusion", "hallucinations",
    "respiratory_depression", "rescue_naloxone", "rescue_antiemetic",
    "impact_score", "rescue_analgesia_meq", "pacu_los_min", "ambulation_cas",
)

COHORT_FILE = "cohort.csv"
SCHEMA_FILE = "cohort_schema.json"
GROUND_TRUTH_FILE = "ground_truth.json"


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _bool(value: bool) -> str:
    return "true" if value else "false"


def _parse_bool(text: str) -> bool:
    return text == "true"


def record_to_row(record: EncounterRecord) -> list[str]:
    x = record.features
    o = record.orades
    return [
        str(x.age),
        repr(x.weight_kg),
        x.sex.value,
        str(x.asa_class),
        repr(x.surgery_duration_min),
        str(x.surgery_type),
        _bool(x.chronic_opioid_use),
        repr(x.comorbidity_score),
        record.treatment.name,
        repr(record.administered_dose.value),
        str(record.pain_arrival.nrs),
        ";".join(str(p.nrs) for p in record.pain_pre_dosing),
        str(record.pain_discharge.nrs),
        o.nausea.value,
        _bool(o.vomiting),
        o.sedation.value,
        _bool(o.dizziness),
        _bool(o.itching),
        _bool(o.urinary_retention),
        _bool(o.confusion),
        _bool(o.hallucinations),
        _bool(o.respiratory_depression),
        _bool(o.rescue_naloxone),
        _bool(o.rescue_antiemetic),
        "" if o.impact_score is None else str(o.impact_score),
        repr(record.rescue_analgesia_meq),
        repr(record.pacu_los_min),
        str(record.ambulation_cas),
    ]


def row_to_record(row: dict[str, str], registry: tuple[str, ...]) -> EncounterRecord:
    features = CaseFeatures(
        age=int(row["age"]),
        weight_kg=float(row["weight_kg"]),
        sex=Sex(row["sex"]),
        asa_class=int(row["asa_class"]),
        surgery_duration_min=float(row["surgery_duration_min"]),
        surgery_type=int(row["surgery_type"]),
        chronic_opioid_use=_parse_bool(row["chronic_opioid_use"]),
        comorbidity_score=float(row["comorbidity_score"]),
    )
    orades = OradeRecord(
        nausea=NauseaLevel(row["nausea"]),
        vomiting=_parse_bool(row["vomiting"]),
        sedation=SedationLevel(row["sedation"]),
        dizziness=_parse_bool(row["dizziness"]),
        itching=_parse_bool(row["itching"]),
        urinary_retention=_parse_bool(row["urinary_retention"]),
        confusion=_parse_bool(row["confusion"]),
        hallucinations=_parse_bool(row["hallucinations"]),
        respiratory_depression=_parse_bool(row["respiratory_depression"]),
        rescue_naloxone=_parse_bool(row["rescue_naloxone"]),
        rescue_antiemetic=_parse_bool(row["rescue_antiemetic"]),
        impact_score=None if row["impact_score"] == "" else int(row["impact_score"]),
    )
    pre = tuple(PainScore(int(v)) for v in row["pain_pre_dosing"].split(";") if v != "")
    return EncounterRecord(
        features=features,
        treatment=Treatment(opiate_id=registry.index(row["opiate"]), registry=registry),
        administered_dose=DoseMeq(float(row["administered_dose_meq"])),
        pain_arrival=PainScore(int(row["pain_arrival"])),
        pain_pre_dosing=pre,
        pain_discharge=PainScore(int(row["pain_discharge"])),
        orades=orades,
        rescue_analgesia_meq=float(row["rescue_analgesia_meq"]),
        pacu_los_min=float(row["pacu_los_min"]),
        ambulation_cas=int(row["ambulation_cas"]),
    )


def cohort_to_csv(cohort: Cohort) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COHORT_COLUMNS)
    for record in cohort.records:
        writer.writerow(record_to_row(record))
    return buf.getvalue()


def schema_sidecar(cohort: Cohort) -> dict:
    registry = (cohort.records[0].treatment.registry if cohort.records
                else ("morphine",))
    return {
        "format": "doselab-cohort-schema",
        "schema_version": DATA_SCHEMA_VERSION,
        "columns": list(COHORT_COLUMNS),
        "treatment_registry": list(registry),
        "meq_table_version": DEFAULT_MEQ_TABLE.version,
        "generator_version": cohort.version,
        "seed": cohort.seed,
        "n_records": len(cohort.records),
    }


# Ground truth ------------------------------------------------------------------

def scm_to_dict(gt: ScmGroundTruth) -> dict:
    payload = dataclasses.asdict(gt)
    if gt.positivity_violation is not None:
        payload["positivity_violation"] = dataclasses.asdict(gt.positivity_violation)
    payload["format"] = "doselab-scm"
    payload["schema_version"] = DATA_SCHEMA_VERSION
    return payload


def scm_from_dict(payload: dict) -> ScmGroundTruth:
    if payload.get("format") != "doselab-scm":
        raise CorruptArtifact("not a doselab-scm ground truth file")
    if payload.get("schema_version") != DATA_SCHEMA_VERSION:
        raise VersionMismatch(
            f"ground truth schema version {payload.get('schema_version')!r}, "
            f"this build reads {DATA_SCHEMA_VERSION}"
        )
    body = {k: v for k, v in payload.items() if k not in ("format", "schema_version")}
    violation = body.pop("positivity_violation", None)
    tuple_fields = {f.name for f in dataclasses.fields(ScmGroundTruth)
                    if "tuple" in str(f.type)}
    for key in list(body):
        if key in tuple_fields and isinstance(body[key], list):
            body[key] = tuple(body[key])
    return ScmGroundTruth(
        **body,
        positivity_violation=(None if violation is None
                              else PositivityViolation(**violation)),
    )


def write_cohort(cohort: Cohort, out_dir: Path | str) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "cohort": out / COHORT_FILE,
        "schema": out / SCHEMA_FILE,
        "ground_truth": out / GROUND_TRUTH_FILE,
    }
    atomic_write_text(paths["cohort"], cohort_to_csv(cohort))
    atomic_write_text(paths["schema"],
                      json.dumps(schema_sidecar(cohort), indent=2, sort_keys=True) + "\n")
    atomic_write_text(paths["ground_truth"],
                      json.dumps(scm_to_dict(cohort.ground_truth), indent=2,
                                 sort_keys=True) + "\n")
    return paths


def read_cohort(in_dir: Path | str) -> Cohort:
    src = Path(in_dir)
    sidecar = json.loads((src / SCHEMA_FILE).read_text())
    if sidecar.get("format") != "doselab-cohort-schema":
        raise CorruptArtifact(f"{src / SCHEMA_FILE} is not a cohort schema sidecar")
    if sidecar.get("schema_version") != DATA_SCHEMA_VERSION:
        raise VersionMismatch("cohort sidecar schema version unsupported")
    registry = tuple(sidecar["treatment_registry"])
    gt = scm_from_dict(json.loads((src / GROUND_TRUTH_FILE).read_text()))
    with open(src / COHORT_FILE, newline="") as fh:
        reader = csv.DictReader(fh)
        records = tuple(row_to_record(row, registry) for row in reader)
    return Cohort(records=records, ground_truth=gt,
                  version=sidecar.get("generator_version", GENERATOR_VERSION),
                  seed=int(sidecar.get("seed", 0)))
