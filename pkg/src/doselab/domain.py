"""Core clinical domain types: case covariates, doses, pain scores, adverse
event records, and the conversions between them.

All types are immutable after construction and all operations are pure
functions, so everything here is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence


class DomainError(ValueError):
    """Base class for domain validation failures."""


class OutOfRange(DomainError):
    """A scalar value fell outside its clinically valid range."""


class MalformedSeries(DomainError):
    """A timestamped vital-sign series is not strictly increasing in time."""


class UnknownOpiate(DomainError):
    """Opiate has no entry in the morphine-equivalence conversion table."""


class AllZeroWeights(DomainError):
    """A weighted aggregation was requested with every weight set to zero."""


class Sex(str, Enum):
    FEMALE = "female"
    MALE = "male"


class NauseaLevel(str, Enum):
    NONE = "none"
    MILD = "mild"
    MODERATE = "moderate"
    SEVERE = "severe"


class SedationLevel(str, Enum):
    """AVPU responsiveness scale."""

    ALERT = "alert"
    VERBAL = "verbal"
    PAIN = "pain"
    UNRESPONSIVE = "unresponsive"


# Registry of surgery-type categorical ids used by CaseFeatures.surgery_type.
SURGERY_TYPES: tuple[str, ...] = (
    "orthopedic",
    "abdominal",
    "gynecologic",
    "urologic",
    "ent",
    "breast",
    "vascular",
    "plastic",
)

MIN_ADULT_AGE = 18
ASA_CLASSES = (1, 2, 3, 4, 5)
CAS_MIN, CAS_MAX = 0, 6


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise OutOfRange(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class CaseFeatures:
    """Patient and surgery covariates available at the end of surgery."""

    age: int
    weight_kg: float
    sex: Sex
    asa_class: int
    surgery_duration_min: float
    surgery_type: int
    chronic_opioid_use: bool
    comorbidity_score: float

    def __post_init__(self) -> None:
        if self.age < MIN_ADULT_AGE:
            raise OutOfRange(f"age must be >= {MIN_ADULT_AGE}, got {self.age}")
        _require_finite("weight_kg", self.weight_kg)
        if self.weight_kg <= 0:
            raise OutOfRange(f"weight_kg must be positive, got {self.weight_kg}")
        if self.asa_class not in ASA_CLASSES:
            raise OutOfRange(f"asa_class must be in 1..5, got {self.asa_class}")
        _require_finite("surgery_duration_min", self.surgery_duration_min)
        if self.surgery_duration_min <= 0:
            raise OutOfRange(
                f"surgery_duration_min must be positive, got {self.surgery_duration_min}"
            )
        if not 0 <= self.surgery_type < len(SURGERY_TYPES):
            raise OutOfRange(
                f"surgery_type must be in 0..{len(SURGERY_TYPES) - 1}, "
                f"got {self.surgery_type}"
            )
        _require_finite("comorbidity_score", self.comorbidity_score)
        if self.comorbidity_score < 0:
            raise OutOfRange(
                f"comorbidity_score must be >= 0, got {self.comorbidity_score}"
            )


@dataclass(frozen=True)
class Treatment:
    """An opiate choice, identified by index into an ordered registry.

    The default registry holds a single entry, morphine; alternatives slot in
    by extending the registry, not by changing any downstream interface.
    """

    opiate_id: int = 0
    registry: tuple[str, ...] = ("morphine",)

    def __post_init__(self) -> None:
        if not self.registry:
            raise DomainError("treatment registry must not be empty")
        if not 0 <= self.opiate_id < len(self.registry):
            raise OutOfRange(
                f"opiate_id {self.opiate_id} outside registry of size {len(self.registry)}"
            )

    @property
    def name(self) -> str:
        return self.registry[self.opiate_id]


MORPHINE = Treatment()


@dataclass(frozen=True)
class DoseMeq:
    """An opioid dose in mg morphine equivalents."""

    value: float

    def __post_init__(self) -> None:
        _require_finite("dose", self.value)
        if self.value < 0:
            raise OutOfRange(f"dose must be >= 0 MEQ, got {self.value}")


@dataclass(frozen=True)
class DoseGrid:
    """Uniform discretization of the dose axis used for argmax search."""

    min_meq: float = 0.0
    max_meq: float = 20.0
    step_meq: float = 0.5

    def __post_init__(self) -> None:
        if self.min_meq < 0:
            raise OutOfRange(f"grid min must be >= 0, got {self.min_meq}")
        if self.max_meq <= self.min_meq:
            raise OutOfRange("grid max must exceed grid min")
        if self.step_meq <= 0:
            raise OutOfRange(f"grid step must be positive, got {self.step_meq}")
        if self.n_points < 2:
            raise OutOfRange("grid must contain at least 2 points")

    @property
    def n_points(self) -> int:
        return int(math.floor((self.max_meq - self.min_meq) / self.step_meq)) + 1

    def points(self) -> list[float]:
        return [self.min_meq + i * self.step_meq for i in range(self.n_points)]

    def contains(self, dose: float) -> bool:
        return self.min_meq <= dose <= self.max_meq


@dataclass(frozen=True)
class PainScore:
    """Pain at rest on the 11-point numeric rating scale (0 = no pain)."""

    nrs: int

    def __post_init__(self) -> None:
        if not 0 <= self.nrs <= 10:
            raise OutOfRange(f"NRS pain must be in 0..10, got {self.nrs}")


def validate_pain(raw: int) -> PainScore:
    """Validate a raw pain rating; only the integers 0..10 are accepted."""
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise OutOfRange(f"NRS pain must be an integer, got {raw!r}")
    if raw < 0 or raw > 10:
        raise OutOfRange(f"NRS pain must be in 0..10, got {raw}")
    return PainScore(int(raw))


@dataclass(frozen=True)
class OradeRecord:
    """Opioid-related adverse events observed during the PACU stay.

    ``impact_score`` is the optional day-1 patient rating of how badly the
    events affected recovery (0 = no negative impact, 10 = extreme).
    """

    nausea: NauseaLevel = NauseaLevel.NONE
    vomiting: bool = False
    sedation: SedationLevel = SedationLevel.ALERT
    dizziness: bool = False
    itching: bool = False
    urinary_retention: bool = False
    confusion: bool = False
    hallucinations: bool = False
    respiratory_depression: bool = False
    rescue_naloxone: bool = False
    rescue_antiemetic: bool = False
    impact_score: int | None = None

    def __post_init__(self) -> None:
        if self.rescue_naloxone and not self.respiratory_depression:
            raise DomainError(
                "rescue_naloxone implies respiratory_depression "
                "(naloxone use is itself a respiratory-depression criterion)"
            )
        if self.impact_score is not None and not 0 <= self.impact_score <= 10:
            raise OutOfRange(
                f"impact_score must be in 0..10, got {self.impact_score}"
            )


# Per-component severities on [0, 1] used by orade_severity.
_LEVEL_SEVERITY: dict[NauseaLevel, float] = {
    NauseaLevel.NONE: 0.0,
    NauseaLevel.MILD: 1.0 / 3.0,
    NauseaLevel.MODERATE: 2.0 / 3.0,
    NauseaLevel.SEVERE: 1.0,
}
_SEDATION_SEVERITY: dict[SedationLevel, float] = {
    SedationLevel.ALERT: 0.0,
    SedationLevel.VERBAL: 1.0 / 3.0,
    SedationLevel.PAIN: 2.0 / 3.0,
    SedationLevel.UNRESPONSIVE: 1.0,
}

ORADE_COMPONENTS: tuple[str, ...] = (
    "nausea",
    "vomiting",
    "sedation",
    "dizziness",
    "itching",
    "urinary_retention",
    "confusion",
    "hallucinations",
    "respiratory_depression",
    "rescue_naloxone",
    "rescue_antiemetic",
)

# Respiratory depression is weighted heaviest as the clinically gravest event;
# every other component gets unit weight. Overridable per call.
DEFAULT_ORADE_WEIGHTS: dict[str, float] = {c: 1.0 for c in ORADE_COMPONENTS}
DEFAULT_ORADE_WEIGHTS["respiratory_depression"] = 3.0


def component_severities(rec: OradeRecord) -> dict[str, float]:
    """Map each adverse-event component to a severity on [0, 1]."""
    return {
        "nausea": _LEVEL_SEVERITY[rec.nausea],
        "vomiting": float(rec.vomiting),
        "sedation": _SEDATION_SEVERITY[rec.sedation],
        "dizziness": float(rec.dizziness),
        "itching": float(rec.itching),
        "urinary_retention": float(rec.urinary_retention),
        "confusion": float(rec.confusion),
        "hallucinations": float(rec.hallucinations),
        "respiratory_depression": float(rec.respiratory_depression),
        "rescue_naloxone": float(rec.rescue_naloxone),
        "rescue_antiemetic": float(rec.rescue_antiemetic),
    }


def orade_severity(
    rec: OradeRecord, weights: Mapping[str, float] | None = None
) -> float:
    """Scalarize an adverse-event record to a 0..10 severity.

    Weighted mean of per-component severities, rescaled to be commensurate
    with the NRS pain scale. Monotone nondecreasing in every component.
    """
    if weights is None:
        weights = DEFAULT_ORADE_WEIGHTS
    total_w = 0.0
    total = 0.0
    for name in ORADE_COMPONENTS:
        w = float(weights.get(name, 0.0))
        if w < 0:
            raise DomainError(f"orade component weight {name} must be >= 0, got {w}")
        total_w += w
    if total_w <= 0:
        raise AllZeroWeights("at least one orade component weight must be positive")
    sev = component_severities(rec)
    for name in ORADE_COMPONENTS:
        total += float(weights.get(name, 0.0)) * sev[name]
    return 10.0 * total / total_w


def _longest_low_run_minutes(
    series: Sequence[tuple[float, float]], threshold: float
) -> float:
    """Longest time spent below ``threshold`` under sample-and-hold semantics.

    Each sample's value holds from its timestamp until the next sample; an
    episode ends at the first at-or-above-threshold sample. A series that ends
    while still below the threshold is only credited until its last sample
    (no extrapolation past the observed data).
    """
    last_t = None
    for t, _ in series:
        if last_t is not None and t <= last_t:
            raise MalformedSeries(
                f"series timestamps must be strictly increasing ({last_t} -> {t})"
            )
        last_t = t
    longest = 0.0
    run_start: float | None = None
    for t, v in series:
        if v < threshold:
            if run_start is None:
                run_start = t
        else:
            if run_start is not None:
                longest = max(longest, t - run_start)
                run_start = None
    if run_start is not None and series:
        longest = max(longest, series[-1][0] - run_start)
    return longest


def derive_respiratory_depression(
    naloxone_used: bool,
    rr_series: Sequence[tuple[float, float]] = (),
    spo2_series: Sequence[tuple[float, float]] = (),
    perceived_opioid_induced: bool = False,
) -> bool:
    """Apply the three respiratory-depression criteria.

    True on naloxone use, or -- when the nurse perceives the episode as
    possibly opioid-induced -- on a respiratory rate below 10/min sustained
    for at least 10 minutes, or an SpO2 below 90% sustained for at least
    10 minutes. Series are (minute, value) pairs, strictly increasing in time.
    """
    rr_low = _longest_low_run_minutes(rr_series, 10.0)
    spo2_low = _longest_low_run_minutes(spo2_series, 90.0)
    if naloxone_used:
        return True
    if perceived_opioid_induced and rr_low >= 10.0:
        return True
    if perceived_opioid_induced and spo2_low >= 10.0:
        return True
    return False


class Route(str, Enum):
    IV = "iv"


@dataclass(frozen=True)
class MeqConversionTable:
    """Opiate-to-morphine-equivalence factors, keyed by (name, route).

    Shipped defaults (morphine 1, iv fentanyl 100) are engineering defaults
    for the synthetic pipeline, not clinical conversion guidance.
    """

    factors: Mapping[tuple[str, Route], float] = field(
        default_factory=lambda: {
            ("morphine", Route.IV): 1.0,
            ("fentanyl", Route.IV): 100.0,
        }
    )
    version: str = "meq-1"

    def factor(self, opiate: str, route: Route) -> float:
        try:
            return self.factors[(opiate, route)]
        except KeyError:
            raise UnknownOpiate(
                f"no MEQ conversion factor for ({opiate!r}, {route.value})"
            ) from None


DEFAULT_MEQ_TABLE = MeqConversionTable()


def _opiate_name(opiate: Treatment | str) -> str:
    return opiate.name if isinstance(opiate, Treatment) else opiate


def to_meq(
    opiate: Treatment | str,
    dose_mg: float,
    route: Route = Route.IV,
    table: MeqConversionTable = DEFAULT_MEQ_TABLE,
) -> DoseMeq:
    """Convert an opiate dose in mg to mg morphine equivalents."""
    if dose_mg < 0:
        raise OutOfRange(f"dose must be >= 0 mg, got {dose_mg}")
    return DoseMeq(dose_mg * table.factor(_opiate_name(opiate), route))


def aggregate_titrated_administrations(
    admins: Iterable[tuple[Treatment | str, float, float]],
    window_minutes: float = 30.0,
    end_minute: float = 0.0,
    route: Route = Route.IV,
    table: MeqConversionTable = DEFAULT_MEQ_TABLE,
) -> DoseMeq:
    """Sum titrated administrations into one end-of-surgery MEQ dose.

    Each administration is (opiate, dose mg, minute), with minutes relative to
    the end of surgery (negative = before the end). Only administrations inside
    the attribution window [end_minute - window_minutes, end_minute] count;
    fentanyl titrations in particular arrive as several such entries.
    """
    total = 0.0
    lo = end_minute - window_minutes
    for opiate, dose_mg, minute in admins:
        if lo <= minute <= end_minute:
            total += to_meq(opiate, dose_mg, route, table).value
    return DoseMeq(total)


@dataclass(frozen=True)
class EncounterRecord:
    """One surgical encounter: covariates, treatment, and observed outcomes."""

    features: CaseFeatures
    treatment: Treatment
    administered_dose: DoseMeq
    pain_arrival: PainScore
    pain_pre_dosing: tuple[PainScore, ...]
    pain_discharge: PainScore
    orades: OradeRecord
    rescue_analgesia_meq: float
    pacu_los_min: float
    ambulation_cas: int

    def __post_init__(self) -> None:
        _require_finite("rescue_analgesia_meq", self.rescue_analgesia_meq)
        if self.rescue_analgesia_meq < 0:
            raise OutOfRange("rescue_analgesia_meq must be >= 0")
        _require_finite("pacu_los_min", self.pacu_los_min)
        if self.pacu_los_min < 0:
            raise OutOfRange("pacu_los_min must be >= 0")
        if not CAS_MIN <= self.ambulation_cas <= CAS_MAX:
            raise OutOfRange(
                f"ambulation_cas must be in {CAS_MIN}..{CAS_MAX}, "
                f"got {self.ambulation_cas}"
            )


@dataclass(frozen=True)
class UtilityWeights:
    """Relative importance of minimizing pain versus adverse events."""

    w_pain: float = 0.5
    w_orades: float = 0.5

    def __post_init__(self) -> None:
        if self.w_pain < 0 or self.w_orades < 0:
            raise OutOfRange("utility weights must be >= 0")
        if self.w_pain + self.w_orades <= 0:
            raise OutOfRange("utility weights must not both be zero")


DEFAULT_WEIGHTS = UtilityWeights()
