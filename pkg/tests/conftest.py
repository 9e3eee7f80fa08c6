import numpy as np
import pytest

from doselab.domain import (
    CaseFeatures,
    DoseGrid,
    Sex,
    UtilityWeights,
)
from doselab.synthgen import DEFAULT_GROUND_TRUTH, ScmGroundTruth, generate_cohort
from doselab.validation import SplitSpec, split


@pytest.fixture(scope="session")
def default_gt() -> ScmGroundTruth:
    return DEFAULT_GROUND_TRUTH


@pytest.fixture(scope="session")
def noiseless_gt() -> ScmGroundTruth:
    return DEFAULT_GROUND_TRUTH.noiseless()


@pytest.fixture(scope="session")
def small_cohort(noiseless_gt):
    """Cheap noiseless cohort for unit-level checks."""
    return generate_cohort(noiseless_gt, 400, seed=11)


@pytest.fixture(scope="session")
def cohort5000(noiseless_gt):
    """The desk-scale noiseless cohort shared by fitting-heavy tests."""
    return generate_cohort(noiseless_gt, 5000, seed=2026)


@pytest.fixture(scope="session")
def splits5000(cohort5000):
    return split(cohort5000.records, SplitSpec(seed=0))


def constant_response_gt(**overrides) -> ScmGroundTruth:
    """Ground truth whose response curves are identical for every case."""
    zeros = (0.0,) * 7
    params = dict(
        pain_base=8.0, pain_coef=zeros, pain_surgery_offset=(0.0,) * 8,
        ed50_base=5.0, ed50_coef=zeros,
        smax_base=6.0, smax_coef=zeros,
        od50_base=10.0, od50_coef=zeros,
    )
    params.update(overrides)
    return ScmGroundTruth(**params)


@pytest.fixture(scope="session")
def sample_case() -> CaseFeatures:
    return CaseFeatures(
        age=62, weight_kg=85.0, sex=Sex.MALE, asa_class=3,
        surgery_duration_min=120.0, surgery_type=1,
        chronic_opioid_use=False, comorbidity_score=2.5,
    )


@pytest.fixture(scope="session")
def default_grid() -> DoseGrid:
    return DoseGrid()


@pytest.fixture(scope="session")
def equal_weights() -> UtilityWeights:
    return UtilityWeights(w_pain=0.5, w_orades=0.5)


def sample_cases(n: int, seed: int = 0) -> list[CaseFeatures]:
    """Deterministic case sampler for property-style loops in tests."""
    from doselab.synthgen import sample_features

    return sample_features(DEFAULT_GROUND_TRUTH, n, seed=seed)
