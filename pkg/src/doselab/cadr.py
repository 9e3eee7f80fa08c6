"""Dose-response model fitting and per-case curve evaluation.

Both endpoints (pain and adverse-event severity) are fitted as single
outcome models over (treatment one-hot, dose, case features), with dose as
an ordinary input feature. Sweeping a fitted pair over the dose grid yields
the per-case curves that drive dose recommendation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import (
    CaseFeatures,
    DoseGrid,
    DoseMeq,
    DomainError,
    EncounterRecord,
    OutOfRange,
    SURGERY_TYPES,
    Sex,
    Treatment,
    UtilityWeights,
    orade_severity,
)
from .learners import (
    CLASSIFICATION_ONLY,
    CorruptArtifact,
    FittedModel,
    LearnerKind,
    Task,
    VersionMismatch,
    model_from_dict,
    model_to_dict,
    predict,
    train,
)

CADR_SCHEMA_VERSION = 1


class PainTimepoint(str, Enum):
    ARRIVAL = "arrival"
    DISCHARGE = "discharge"
    PRE_DOSING_MEAN = "pre_dosing_mean"


def feature_names(registry: tuple[str, ...]) -> tuple[str, ...]:
    return (
        *(f"treat_{name}" for name in registry),
        "dose_meq",
        "age",
        "weight_kg",
        "sex_male",
        "asa_class",
        "surgery_duration_min",
        "chronic_opioid_use",
        "comorbidity_score",
        *(f"surgery_{name}" for name in SURGERY_TYPES),
    )


def encode_row(t: Treatment, dose: float, x: CaseFeatures,
               registry: tuple[str, ...]) -> np.ndarray:
    row = np.zeros(len(registry) + 8 + len(SURGERY_TYPES))
    row[t.opiate_id] = 1.0
    base = len(registry)
    row[base] = dose
    row[base + 1] = float(x.age)
    row[base + 2] = x.weight_kg
    row[base + 3] = float(x.sex is Sex.MALE)
    row[base + 4] = float(x.asa_class)
    row[base + 5] = x.surgery_duration_min
    row[base + 6] = float(x.chronic_opioid_use)
    row[base + 7] = x.comorbidity_score
    row[base + 8 + x.surgery_type] = 1.0
    return row


def design_matrix(records: tuple[EncounterRecord, ...] | list[EncounterRecord],
                  registry: tuple[str, ...]) -> np.ndarray:
    return np.stack([
        encode_row(r.treatment, r.administered_dose.value, r.features, registry)
        for r in records
    ])


def _pain_target(record: EncounterRecord, timepoint: PainTimepoint) -> float:
    if timepoint is PainTimepoint.ARRIVAL:
        return float(record.pain_arrival.nrs)
    if timepoint is PainTimepoint.DISCHARGE:
        return float(record.pain_discharge.nrs)
    scores = record.pain_pre_dosing or (record.pain_arrival,)
    return float(np.mean([p.nrs for p in scores]))


@dataclass(frozen=True)
class CadrModel:
    """Fitted pain and adverse-event models sharing one feature layout."""

    pain_model: FittedModel
    orade_model: FittedModel
    grid: DoseGrid
    registry: tuple[str, ...]
    pain_timepoint: PainTimepoint
    warnings: tuple[str, ...] = ()
    version: str = "cadr-1"

    def default_treatment(self) -> Treatment:
        return Treatment(opiate_id=0, registry=self.registry)


@dataclass(frozen=True)
class CadrCurve:
    """Predicted outcomes and utility over the dose grid for one case."""

    doses: tuple[float, ...]
    pain_hat: tuple[float, ...]
    orade_hat: tuple[float, ...]
    utility: tuple[float, ...]
    pain_spread: tuple[float, ...] | None = None
    orade_spread: tuple[float, ...] | None = None


def fit_cadr(
    records: tuple[EncounterRecord, ...] | list[EncounterRecord],
    pain_kind: LearnerKind,
    orade_kind: LearnerKind,
    grid: DoseGrid = DoseGrid(),
    hyper_pain: dict | None = None,
    hyper_orade: dict | None = None,
    seed: int = 0,
    pain_timepoint: PainTimepoint = PainTimepoint.ARRIVAL,
    pain_task: Task | None = None,
) -> CadrModel:
    """Fit both endpoint models on a training split.

    Pain defaults to regression on the configured timepoint's NRS value;
    learners that only classify get an 11-class mode automatically (and the
    adverse-event target is binned to integer classes for them likewise).
    """
    if not records:
        raise DomainError("training split is empty")
    registry = records[0].treatment.registry
    doses = np.array([r.administered_dose.value for r in records])
    if doses.min() < grid.min_meq or doses.max() > grid.max_meq:
        raise OutOfRange(
            f"administered doses span [{doses.min()}, {doses.max()}], "
            f"outside the grid [{grid.min_meq}, {grid.max_meq}]"
        )

    warnings: list[str] = []
    if float(np.std(doses)) == 0.0:
        warnings.append("overlap_degenerate")

    pain_kind = LearnerKind(pain_kind)
    orade_kind = LearnerKind(orade_kind)
    if pain_task is None:
        pain_task = (Task.CLASSIFICATION if pain_kind in CLASSIFICATION_ONLY
                     else Task.REGRESSION)
    orade_task = (Task.CLASSIFICATION if orade_kind in CLASSIFICATION_ONLY
                  else Task.REGRESSION)

    X = design_matrix(records, registry)
    names = feature_names(registry)
    pain_y = np.array([_pain_target(r, pain_timepoint) for r in records])
    orade_y = np.array([orade_severity(r.orades) for r in records])
    if pain_task is Task.CLASSIFICATION:
        pain_y = np.rint(pain_y)
    if orade_task is Task.CLASSIFICATION:
        orade_y = np.rint(orade_y)

    pain_model = train(pain_kind, X, pain_y, task=pain_task, hyper=hyper_pain,
                       seed=seed, feature_names=names)
    orade_model = train(orade_kind, X, orade_y, task=orade_task, hyper=hyper_orade,
                        seed=seed + 1, feature_names=names)
    return CadrModel(
        pain_model=pain_model,
        orade_model=orade_model,
        grid=grid,
        registry=registry,
        pain_timepoint=pain_timepoint,
        warnings=tuple(warnings),
    )


def _expected_value(prob: np.ndarray, classes: list[int]) -> np.ndarray:
    """Expected class value per row; einsum keeps rows batch-independent."""
    return np.einsum("ij,j->i", prob, np.asarray(classes, dtype=float))


def _predict_endpoint(model: FittedModel, X: np.ndarray) -> np.ndarray:
    raw = predict(model, X)
    if model.task is Task.CLASSIFICATION:
        raw = _expected_value(raw, model.classes)
    return np.clip(raw, 0.0, 10.0)


def predict_outcomes(
    model: CadrModel, t: Treatment, d: DoseMeq | float, x: CaseFeatures
) -> tuple[float, float]:
    """Predicted (pain, adverse-event severity) at one dose, clamped to [0, 10]."""
    dv = d.value if isinstance(d, DoseMeq) else float(d)
    if not model.grid.contains(dv):
        raise OutOfRange(f"dose {dv} outside grid "
                         f"[{model.grid.min_meq}, {model.grid.max_meq}]")
    row = encode_row(t, dv, x, model.registry)[None, :]
    pain = _predict_endpoint(model.pain_model, row)
    orade = _predict_endpoint(model.orade_model, row)
    return float(pain[0]), float(orade[0])


def predict_grid(
    model: CadrModel, x: CaseFeatures, t: Treatment
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized endpoint predictions over every grid dose."""
    doses = np.asarray(model.grid.points())
    X = np.stack([encode_row(t, dv, x, model.registry) for dv in doses])
    return doses, _predict_endpoint(model.pain_model, X), _predict_endpoint(model.orade_model, X)


def _member_spread(model: FittedModel, X: np.ndarray) -> np.ndarray | None:
    if model.kind is not LearnerKind.RANDOM_FOREST:
        return None
    from .learners import member_predictions

    members = member_predictions(model, X)
    if model.task is Task.CLASSIFICATION:
        classes = np.asarray(model.classes, dtype=float)
        members = np.einsum("tmj,j->tm", members, classes)
    return members.std(axis=0)


def cadr_curve(
    model: CadrModel,
    x: CaseFeatures,
    t: Treatment | None = None,
    w: UtilityWeights = UtilityWeights(),
) -> CadrCurve:
    """Evaluate both endpoints and the utility at every grid dose."""
    from .recommendation import utility  # local import breaks the module cycle

    if t is None:
        t = model.default_treatment()
    doses, pain, orade = predict_grid(model, x, t)
    util = np.array([utility(p, s, w) for p, s in zip(pain, orade)])
    X = np.stack([encode_row(t, dv, x, model.registry) for dv in doses])
    pain_spread = _member_spread(model.pain_model, X)
    orade_spread = _member_spread(model.orade_model, X)
    return CadrCurve(
        doses=tuple(float(v) for v in doses),
        pain_hat=tuple(float(v) for v in pain),
        orade_hat=tuple(float(v) for v in orade),
        utility=tuple(float(v) for v in util),
        pain_spread=None if pain_spread is None else tuple(float(v) for v in pain_spread),
        orade_spread=None if orade_spread is None else tuple(float(v) for v in orade_spread),
    )


def curve_to_csv_rows(curve: CadrCurve) -> list[str]:
    """Plot-ready CSV lines (header included)."""
    lines = ["dose_meq,pain_hat,orade_hat,utility,pain_spread,orade_spread"]
    for i in range(len(curve.doses)):
        ps = "" if curve.pain_spread is None else repr(curve.pain_spread[i])
        os_ = "" if curve.orade_spread is None else repr(curve.orade_spread[i])
        lines.append(f"{curve.doses[i]!r},{curve.pain_hat[i]!r},"
                     f"{curve.orade_hat[i]!r},{curve.utility[i]!r},{ps},{os_}")
    return lines


# Persistence -------------------------------------------------------------------

def cadr_to_dict(model: CadrModel) -> dict:
    return {
        "format": "doselab-cadr",
        "schema_version": CADR_SCHEMA_VERSION,
        "grid": {"min_meq": model.grid.min_meq, "max_meq": model.grid.max_meq,
                 "step_meq": model.grid.step_meq},
        "registry": list(model.registry),
        "pain_timepoint": model.pain_timepoint.value,
        "warnings": list(model.warnings),
        "version": model.version,
        "pain_model": model_to_dict(model.pain_model),
        "orade_model": model_to_dict(model.orade_model),
    }


def cadr_from_dict(payload: dict) -> CadrModel:
    if payload.get("format") != "doselab-cadr":
        raise CorruptArtifact("not a doselab-cadr artifact")
    if payload.get("schema_version") != CADR_SCHEMA_VERSION:
        raise VersionMismatch(
            f"cadr artifact schema version {payload.get('schema_version')!r}, "
            f"this build reads {CADR_SCHEMA_VERSION}"
        )
    grid = payload["grid"]
    return CadrModel(
        pain_model=model_from_dict(payload["pain_model"]),
        orade_model=model_from_dict(payload["orade_model"]),
        grid=DoseGrid(min_meq=grid["min_meq"], max_meq=grid["max_meq"],
                      step_meq=grid["step_meq"]),
        registry=tuple(payload["registry"]),
        pain_timepoint=PainTimepoint(payload["pain_timepoint"]),
        warnings=tuple(payload["warnings"]),
        version=payload["version"],
    )


def serialize_cadr(model: CadrModel) -> bytes:
    payload = cadr_to_dict(model)
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(body.encode()).hexdigest()
    return json.dumps({"payload": payload, "checksum": checksum},
                      sort_keys=True, separators=(",", ":")).encode()


def deserialize_cadr(data: bytes) -> CadrModel:
    try:
        wrapper = json.loads(data.decode())
        payload = wrapper["payload"]
        checksum = wrapper["checksum"]
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CorruptArtifact(f"unreadable cadr artifact: {exc}") from None
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if hashlib.sha256(body.encode()).hexdigest() != checksum:
        raise CorruptArtifact("cadr artifact failed its checksum")
    return cadr_from_dict(payload)
