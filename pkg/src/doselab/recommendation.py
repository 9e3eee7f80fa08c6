"""Weighted utility of predicted outcomes and grid-argmax dose recommendation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cadr import CadrModel, cadr_curve, predict_outcomes
from .domain import CaseFeatures, DoseMeq, Treatment, UtilityWeights

FLAT_UTILITY_EPS = 1e-6


class RecommendationWarning(str, Enum):
    OVERLAP_VIOLATION = "overlap_violation"
    EXTRAPOLATED_DOSE = "extrapolated_dose"
    FLAT_UTILITY = "flat_utility"


def utility(pain: float, orade: float, w: UtilityWeights,
            rescue: float = 0.0, rescue_weight: float = 0.0) -> float:
    """Negated weighted burden of predicted pain and adverse events.

    Always <= 0 for nonnegative inputs; higher (closer to zero) is better.
    The rescue term is an optional extension and is off (weight 0) unless
    explicitly configured.
    """
    return -(w.w_pain * pain + w.w_orades * orade + rescue_weight * rescue)


def expected_utility(model: CadrModel, t: Treatment, d: DoseMeq | float,
                     x: CaseFeatures, w: UtilityWeights) -> float:
    """Utility of the model's expected outcomes at one dose.

    The utility is linear in (pain, severity), so for ensemble learners the
    utility of the member-mean prediction equals the mean of per-member
    utilities; the point prediction therefore serves as the expectation.
    """
    pain, orade = predict_outcomes(model, t, d, x)
    return utility(pain, orade, w)


@dataclass(frozen=True)
class Recommendation:
    """The dose maximizing expected utility over the grid, with context."""

    dose: DoseMeq
    expected_utility: float
    pain_at_dose: float
    orade_at_dose: float
    weights: UtilityWeights
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "dose_meq": self.dose.value,
            "expected_utility": self.expected_utility,
            "pain_at_dose": self.pain_at_dose,
            "orade_at_dose": self.orade_at_dose,
            "weights": {"w_pain": self.weights.w_pain,
                        "w_orades": self.weights.w_orades},
            "warnings": list(self.warnings),
        }


def recommend_dose(
    model: CadrModel,
    x: CaseFeatures,
    t: Treatment | None = None,
    w: UtilityWeights = UtilityWeights(),
    diagnostics=None,
) -> Recommendation:
    """Exhaustive grid scan for the utility-maximizing dose.

    Ties break toward the lowest dose (opioid-sparing). A diagnostics
    context, when provided, contributes overlap and extrapolation warnings
    for the recommended dose via its ``warnings_for(x, dose)`` hook.
    """
    if t is None:
        t = model.default_treatment()
    curve = cadr_curve(model, x, t, w)
    util = np.asarray(curve.utility)
    best = int(np.argmax(util))  # first maximum = lowest dose on ties
    dose = curve.doses[best]

    warnings = list(model.warnings)
    if float(util.max() - util.min()) < FLAT_UTILITY_EPS:
        warnings.append(RecommendationWarning.FLAT_UTILITY.value)
    if diagnostics is not None:
        warnings.extend(diagnostics.warnings_for(x, dose))

    return Recommendation(
        dose=DoseMeq(dose),
        expected_utility=curve.utility[best],
        pain_at_dose=curve.pain_hat[best],
        orade_at_dose=curve.orade_hat[best],
        weights=w,
        warnings=tuple(dict.fromkeys(warnings)),
    )
