"""Case-severity scoring and quantile stratification.

The same scalar score and the same quantile edges are used by the cohort
generator (to carve positivity violations into a specific stratum) and by the
overlap diagnostic (to detect them), so the two always agree on stratum
membership.
"""

from __future__ import annotations

import numpy as np

from .domain import CaseFeatures, Sex

# Fixed affine case-severity score. Coefficients are documented constants,
# not fitted quantities; the score only needs to order cases consistently.
_SC_AGE = 0.04
_SC_ASA = 0.8
_SC_DURATION = 0.01
_SC_COMORBIDITY = 0.5
_SC_CHRONIC = 1.0
_SC_MALE = 0.2


def case_severity_score(x: CaseFeatures) -> float:
    """Scalar severity summary of a case's covariates (higher = sicker)."""
    return (
        _SC_AGE * (x.age - 18)
        + _SC_ASA * x.asa_class
        + _SC_DURATION * x.surgery_duration_min
        + _SC_COMORBIDITY * x.comorbidity_score
        + _SC_CHRONIC * float(x.chronic_opioid_use)
        + _SC_MALE * float(x.sex is Sex.MALE)
    )


def severity_scores(cases: list[CaseFeatures] | tuple[CaseFeatures, ...]) -> np.ndarray:
    return np.array([case_severity_score(x) for x in cases], dtype=float)


def quantile_edges(scores: np.ndarray, n_strata: int) -> np.ndarray:
    """Interior quantile cut points splitting scores into n_strata bins."""
    if n_strata < 1:
        raise ValueError(f"n_strata must be >= 1, got {n_strata}")
    qs = np.arange(1, n_strata) / n_strata
    return np.quantile(np.asarray(scores, dtype=float), qs)


def stratum_of(score: float | np.ndarray, edges: np.ndarray) -> np.ndarray:
    """0-based stratum index for a score given interior quantile edges."""
    return np.searchsorted(edges, score, side="right")
