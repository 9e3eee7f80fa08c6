"""Synthetic EHR cohort generator with known ground truth.

Cases are drawn from a structural causal model: covariates X drive both the
observational dose policy (confounding) and the true pain / adverse-event
responses, so counterfactual quantities like the per-case optimal dose can be
computed exactly and used as an oracle when validating recommenders.

Randomness is fully reproducible: record ``i`` of a cohort draws from two
PCG64 streams seeded with ``SeedSequence(seed, spawn_key=(i, 0))`` (covariates)
and ``(i, 1)`` (dose and outcomes), so generating records sequentially,
concurrently, or in any order yields bit-identical cohorts.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import strata
from .domain import (
    CaseFeatures,
    DomainError,
    DoseGrid,
    DoseMeq,
    EncounterRecord,
    MORPHINE,
    NauseaLevel,
    OradeRecord,
    PainScore,
    SedationLevel,
    Sex,
    SURGERY_TYPES,
    Treatment,
    UtilityWeights,
    orade_severity,
)

GENERATOR_VERSION = "scm-cohort-1"

# Standardization constants for the feature map phi(x). Fixed by convention
# (not fitted), so phi is a pure function of the case.
_PHI_NAMES = ("age", "weight", "male", "asa", "duration", "chronic", "comorbidity")


def standardized_features(x: CaseFeatures) -> np.ndarray:
    """Documented affine feature map phi(x) used by all SCM coefficient vectors."""
    return np.array(
        [
            (x.age - 55.0) / 16.0,
            (x.weight_kg - 80.0) / 16.0,
            float(x.sex is Sex.MALE) - 0.5,
            (x.asa_class - 2.4) / 1.0,
            (x.surgery_duration_min - 100.0) / 55.0,
            float(x.chronic_opioid_use) - 0.12,
            (x.comorbidity_score - 2.0) / 1.4,
        ]
    )


@dataclass(frozen=True)
class PositivityViolation:
    """Truncate the dose policy to a subinterval within one severity stratum.

    Strata are quantile bins of the case-severity score, matching the overlap
    diagnostic's stratification exactly.
    """

    stratum: int = 0
    n_strata: int = 5
    dose_min: float = 0.0
    dose_max: float = 5.0


@dataclass(frozen=True)
class ScmGroundTruth:
    """All structural parameters of the synthetic cohort generator.

    Per-case response parameters are affine in the standardized feature map
    and clipped to their stated ranges: pain baseline p0 in [4, 10], pain
    half-decay dose ed50 in [3, 12] MEQ, adverse-event ceiling s_max in
    [2, 10], half-rise dose od50 in [6, 14] MEQ.
    """

    seed: int = 0
    dose_max: float = 20.0

    # Observational dose policy: clamp(intercept + coef . phi(x) + noise, 0, dose_max)
    policy_intercept: float = 8.5
    policy_coef: tuple[float, ...] = (-1.0, 1.8, 0.3, 0.8, 1.2, 3.0, 0.6)
    policy_noise_sd: float = 4.5

    # Pain response: p0(x) * ed50(x) / (d + ed50(x)), clipped to [0, 10]
    pain_base: float = 7.5
    pain_coef: tuple[float, ...] = (-0.5, 0.0, -0.3, 0.4, 0.5, 1.5, 0.4)
    pain_surgery_offset: tuple[float, ...] = (0.5, 0.8, 0.0, -0.3, -0.6, -0.8, 0.2, -0.4)
    ed50_base: float = 4.5
    ed50_coef: tuple[float, ...] = (-0.8, 0.5, 0.0, 0.0, 0.0, 2.0, 0.0)
    pain_noise_sd: float = 0.6

    # Adverse-event response: s_max(x) * d^2 / (d^2 + od50(x)^2), clipped to [0, 10]
    smax_base: float = 7.0
    smax_coef: tuple[float, ...] = (0.8, -0.3, -0.2, 0.5, 0.0, -1.0, 0.5)
    od50_base: float = 8.0
    od50_coef: tuple[float, ...] = (-1.5, 1.0, 0.0, -0.5, 0.0, 2.0, -0.5)
    orade_noise_sd: float = 0.8

    # PACU length of stay: max(0, l0 + l1*pain + l2*severity + noise), minutes
    los_intercept: float = 30.0
    los_pain_coef: float = 5.0
    los_orade_coef: float = 5.0
    los_noise_sd: float = 8.0

    # Rescue analgesia: max(0, coef * (pain - 4) + noise), MEQ
    rescue_coef: float = 1.5
    rescue_noise_sd: float = 1.0

    positivity_violation: PositivityViolation | None = None
    version: str = GENERATOR_VERSION

    def __post_init__(self) -> None:
        for name in ("policy_noise_sd", "pain_noise_sd", "orade_noise_sd",
                     "los_noise_sd", "rescue_noise_sd"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if len(self.pain_surgery_offset) != len(SURGERY_TYPES):
            raise DomainError(
                f"pain_surgery_offset must have {len(SURGERY_TYPES)} entries"
            )

    def noiseless(self) -> "ScmGroundTruth":
        """Copy with all outcome noise removed.

        Policy noise is retained: it is treatment-assignment randomness, and
        without it the observed doses would collapse onto a deterministic
        function of X, leaving no dose variation to learn from.
        """
        return dataclasses.replace(
            self, pain_noise_sd=0.0, orade_noise_sd=0.0,
            los_noise_sd=0.0, rescue_noise_sd=0.0,
        )

    # Per-case response parameters -------------------------------------------

    def pain_baseline(self, x: CaseFeatures) -> float:
        phi = standardized_features(x)
        raw = self.pain_base + float(np.dot(self.pain_coef, phi))
        raw += self.pain_surgery_offset[x.surgery_type]
        return float(np.clip(raw, 4.0, 10.0))

    def pain_ed50(self, x: CaseFeatures) -> float:
        phi = standardized_features(x)
        return float(np.clip(self.ed50_base + np.dot(self.ed50_coef, phi), 3.0, 12.0))

    def orade_ceiling(self, x: CaseFeatures) -> float:
        phi = standardized_features(x)
        return float(np.clip(self.smax_base + np.dot(self.smax_coef, phi), 2.0, 10.0))

    def orade_od50(self, x: CaseFeatures) -> float:
        phi = standardized_features(x)
        return float(np.clip(self.od50_base + np.dot(self.od50_coef, phi), 6.0, 14.0))


DEFAULT_GROUND_TRUTH = ScmGroundTruth()


@dataclass(frozen=True)
class Cohort:
    """A generated cohort together with the ground truth that produced it."""

    records: tuple[EncounterRecord, ...]
    ground_truth: ScmGroundTruth
    version: str = GENERATOR_VERSION
    seed: int = 0

    def __len__(self) -> int:
        return len(self.records)


def _record_rng(seed: int, index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, stream)))


def _dose_value(d: DoseMeq | float) -> float:
    return d.value if isinstance(d, DoseMeq) else float(d)


# Covariate sampling ----------------------------------------------------------

_ASA_PROBS = (0.15, 0.35, 0.35, 0.12, 0.03)
_SURGERY_PROBS = (0.22, 0.18, 0.12, 0.10, 0.12, 0.09, 0.09, 0.08)


def _sample_case(rng: np.random.Generator) -> CaseFeatures:
    age = int(np.clip(round(rng.normal(55.0, 16.0)), 18, 95))
    weight = float(np.clip(rng.normal(80.0, 16.0), 40.0, 160.0))
    sex = Sex.MALE if rng.random() < 0.5 else Sex.FEMALE
    asa = int(rng.choice(5, p=_ASA_PROBS)) + 1
    duration = float(np.clip(np.exp(rng.normal(4.45, 0.5)), 15.0, 480.0))
    surgery = int(rng.choice(len(SURGERY_TYPES), p=_SURGERY_PROBS))
    chronic = bool(rng.random() < 0.12)
    comorbidity = float(min(rng.gamma(2.0, 1.0), 10.0))
    return CaseFeatures(
        age=age,
        weight_kg=weight,
        sex=sex,
        asa_class=asa,
        surgery_duration_min=duration,
        surgery_type=surgery,
        chronic_opioid_use=chronic,
        comorbidity_score=comorbidity,
    )


def sample_features(gt: ScmGroundTruth, n: int, seed: int | None = None) -> list[CaseFeatures]:
    """Draw n i.i.d. cases from the covariate distribution."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    s = gt.seed if seed is None else seed
    return [_sample_case(_record_rng(s, i, 0)) for i in range(n)]


# Structural equations --------------------------------------------------------

def assign_observational_dose(gt: ScmGroundTruth, x: CaseFeatures, noise: float) -> DoseMeq:
    """Confounded standard-of-care dose policy: dose depends on X."""
    raw = gt.policy_intercept + float(np.dot(gt.policy_coef, standardized_features(x)))
    return DoseMeq(float(np.clip(raw + noise, 0.0, gt.dose_max)))


def true_pain_response(
    gt: ScmGroundTruth, t: Treatment, d: DoseMeq | float, x: CaseFeatures
) -> float:
    """Noiseless expected pain at dose d: saturating decay from p0(x)."""
    dv = _dose_value(d)
    ed50 = gt.pain_ed50(x)
    return float(np.clip(gt.pain_baseline(x) * ed50 / (dv + ed50), 0.0, 10.0))


def true_orade_response(
    gt: ScmGroundTruth, t: Treatment, d: DoseMeq | float, x: CaseFeatures
) -> float:
    """Noiseless expected adverse-event severity at dose d: sigmoidal rise to s_max(x)."""
    dv = _dose_value(d)
    od50 = gt.orade_od50(x)
    return float(np.clip(gt.orade_ceiling(x) * dv * dv / (dv * dv + od50 * od50), 0.0, 10.0))


def _true_curves(gt: ScmGroundTruth, x: CaseFeatures, doses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized pain and adverse-event responses over a dose vector."""
    p0 = gt.pain_baseline(x)
    ed50 = gt.pain_ed50(x)
    smax = gt.orade_ceiling(x)
    od50 = gt.orade_od50(x)
    pain = np.clip(p0 * ed50 / (doses + ed50), 0.0, 10.0)
    orade = np.clip(smax * doses**2 / (doses**2 + od50**2), 0.0, 10.0)
    return pain, orade


def true_optimal_dose(
    gt: ScmGroundTruth,
    x: CaseFeatures,
    t: Treatment = MORPHINE,
    grid: DoseGrid = DoseGrid(),
    w: UtilityWeights = UtilityWeights(),
) -> DoseMeq:
    """Oracle optimal dose: exhaustive grid scan of the true weighted outcome.

    Minimizes w_pain * pain + w_orades * severity; ties break toward the
    lowest dose.
    """
    doses = np.asarray(grid.points())
    pain, orade = _true_curves(gt, x, doses)
    combined = w.w_pain * pain + w.w_orades * orade
    return DoseMeq(float(doses[int(np.argmin(combined))]))


# Adverse-event component generation ------------------------------------------
#
# A latent severity (true response + noise) is discretized into the component
# record through a bank of logistic links. Thresholds sit at the cumulative
# midpoints of each component's contribution to the 0..10 severity scale, so
# the expected scalarized severity tracks the latent closely over [0, ~7].
# Respiratory depression sits high (8.5) with a 10x-reduced base rate.

_LINK_TAU = 0.15

_NAUSEA_THRESHOLDS = (0.128, 1.154, 3.205)  # mild, moderate, severe
_SEDATION_THRESHOLDS = (2.179, 5.0, 6.795)  # verbal, pain, unresponsive
_BOOL_THRESHOLDS = {
    "vomiting": 0.641,
    "dizziness": 1.667,
    "itching": 2.692,
    "rescue_antiemetic": 3.718,
    "urinary_retention": 4.487,
    "confusion": 5.513,
    "hallucinations": 6.282,
}
_RESP_THRESHOLD = 8.5
_RESP_RATE_SCALE = 0.1
_NALOXONE_GIVEN_RESP = 0.5

_NAUSEA_LEVELS = (NauseaLevel.NONE, NauseaLevel.MILD, NauseaLevel.MODERATE, NauseaLevel.SEVERE)
_SEDATION_LEVELS = (SedationLevel.ALERT, SedationLevel.VERBAL, SedationLevel.PAIN, SedationLevel.UNRESPONSIVE)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    ez = np.exp(z)
    return float(ez / (1.0 + ez))


def _graded_level(latent: float, thresholds: tuple[float, ...], u: float) -> int:
    """Highest level whose logistic link fires for a single uniform draw.

    One shared draw keeps the level ladder internally consistent: passing a
    higher threshold implies passing every lower one.
    """
    level = 0
    for k, theta in enumerate(thresholds, start=1):
        if u < _sigmoid((latent - theta) / _LINK_TAU):
            level = k
    return level


def _sample_orades(latent: float, rng: np.random.Generator) -> OradeRecord:
    nausea = _NAUSEA_LEVELS[_graded_level(latent, _NAUSEA_THRESHOLDS, rng.random())]
    sedation = _SEDATION_LEVELS[_graded_level(latent, _SEDATION_THRESHOLDS, rng.random())]
    bools = {
        name: rng.random() < _sigmoid((latent - theta) / _LINK_TAU)
        for name, theta in _BOOL_THRESHOLDS.items()
    }
    resp = rng.random() < _RESP_RATE_SCALE * _sigmoid((latent - _RESP_THRESHOLD) / _LINK_TAU)
    naloxone = bool(resp and rng.random() < _NALOXONE_GIVEN_RESP)
    return OradeRecord(
        nausea=nausea,
        vomiting=bools["vomiting"],
        sedation=sedation,
        dizziness=bools["dizziness"],
        itching=bools["itching"],
        urinary_retention=bools["urinary_retention"],
        confusion=bools["confusion"],
        hallucinations=bools["hallucinations"],
        respiratory_depression=bool(resp),
        rescue_naloxone=naloxone,
        rescue_antiemetic=bools["rescue_antiemetic"],
    )


def expected_orade_severity_given_latent(latent: float) -> float:
    """E[scalarized severity | latent], the generator's discretization map."""
    inc_step = 10.0 / 13.0  # weight-1 component increment on the 0..10 scale
    total = 0.0
    for theta in _NAUSEA_THRESHOLDS + _SEDATION_THRESHOLDS:
        total += (inc_step / 3.0) * _sigmoid((latent - theta) / _LINK_TAU)
    for theta in _BOOL_THRESHOLDS.values():
        total += inc_step * _sigmoid((latent - theta) / _LINK_TAU)
    resp_p = _RESP_RATE_SCALE * _sigmoid((latent - _RESP_THRESHOLD) / _LINK_TAU)
    total += 3.0 * inc_step * resp_p
    total += inc_step * resp_p * _NALOXONE_GIVEN_RESP
    return total


# Cohort assembly --------------------------------------------------------------

def _round_int(value: float) -> int:
    return int(np.rint(value))


def _generate_record(
    gt: ScmGroundTruth,
    x: CaseFeatures,
    dose: float,
    rng: np.random.Generator,
) -> EncounterRecord:
    """Draw outcomes for one case at its administered dose (outcome stream)."""
    t = MORPHINE
    mu_pain = true_pain_response(gt, t, dose, x)
    mu_orade = true_orade_response(gt, t, dose, x)

    # sd=0 makes each normal() collapse to its mean while still consuming the
    # same draws, so noisy and noiseless cohorts share covariates and doses.
    pain_arrival = _round_int(np.clip(
        mu_pain + rng.normal(0.0, gt.pain_noise_sd), 0.0, 10.0))
    n_pre = int(rng.integers(0, 3))
    pre = tuple(
        PainScore(_round_int(np.clip(
            mu_pain + rng.normal(0.0, gt.pain_noise_sd), 0.0, 10.0)))
        for _ in range(n_pre)
    )
    pain_discharge = _round_int(np.clip(
        0.6 * mu_pain + rng.normal(0.0, gt.pain_noise_sd), 0.0, 10.0))

    latent = mu_orade + rng.normal(0.0, gt.orade_noise_sd)
    orades = _sample_orades(latent, rng)
    severity = orade_severity(orades)

    rescue = max(0.0, gt.rescue_coef * (pain_arrival - 4.0)
                 + rng.normal(0.0, gt.rescue_noise_sd))
    los = max(0.0, gt.los_intercept + gt.los_pain_coef * pain_arrival
              + gt.los_orade_coef * severity
              + rng.normal(0.0, gt.los_noise_sd))
    cas = int(np.clip(_round_int(6.0 - 0.3 * pain_arrival - 0.3 * severity), 0, 6))

    return EncounterRecord(
        features=x,
        treatment=t,
        administered_dose=DoseMeq(dose),
        pain_arrival=PainScore(pain_arrival),
        pain_pre_dosing=pre,
        pain_discharge=PainScore(pain_discharge),
        orades=orades,
        rescue_analgesia_meq=rescue,
        pacu_los_min=los,
        ambulation_cas=cas,
    )


def generate_cohort(gt: ScmGroundTruth, n: int, seed: int | None = None) -> Cohort:
    """Generate a fully reproducible cohort of n encounters.

    Pass 1 draws covariates per record; the positivity-violation mode (if
    configured) then computes severity-score quantile edges over the whole
    cohort; pass 2 draws doses and outcomes per record. Both passes use
    per-record substreams, so the output is independent of evaluation order.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    s = gt.seed if seed is None else seed
    cases = [_sample_case(_record_rng(s, i, 0)) for i in range(n)]

    violation = gt.positivity_violation
    strata_idx: np.ndarray | None = None
    if violation is not None:
        scores = strata.severity_scores(cases)
        edges = strata.quantile_edges(scores, violation.n_strata)
        strata_idx = strata.stratum_of(scores, edges)

    records = []
    for i, x in enumerate(cases):
        rng = _record_rng(s, i, 1)
        noise = rng.normal(0.0, gt.policy_noise_sd)
        dose = assign_observational_dose(gt, x, float(noise)).value
        if violation is not None and strata_idx is not None and strata_idx[i] == violation.stratum:
            dose = float(np.clip(dose, violation.dose_min, violation.dose_max))
        records.append(_generate_record(gt, x, dose, rng))
    return Cohort(records=tuple(records), ground_truth=gt, version=GENERATOR_VERSION, seed=s)
