"""Personalized opioid dose recommendation from synthetic EHR cohorts.

Learn per-case dose-response models for pain and opioid-related adverse
events from observational (synthetic) data, recommend doses by maximizing a
weighted utility, and validate the counterfactual recommendations against
the generator's known ground truth.
"""

__version__ = "0.1.0"

from .domain import (  # noqa: F401
    CaseFeatures,
    DoseGrid,
    DoseMeq,
    EncounterRecord,
    OradeRecord,
    PainScore,
    Treatment,
    UtilityWeights,
    orade_severity,
    to_meq,
    validate_pain,
)
from .synthgen import (  # noqa: F401
    Cohort,
    ScmGroundTruth,
    generate_cohort,
    true_optimal_dose,
    true_orade_response,
    true_pain_response,
)
from .learners import FittedModel, LearnerKind, Task  # noqa: F401
from .cadr import CadrCurve, CadrModel, cadr_curve, fit_cadr, predict_outcomes  # noqa: F401
from .recommendation import Recommendation, expected_utility, recommend_dose, utility  # noqa: F401
