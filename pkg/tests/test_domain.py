import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doselab import domain
from doselab.domain import (
    AllZeroWeights,
    CaseFeatures,
    DEFAULT_ORADE_WEIGHTS,
    DoseGrid,
    DoseMeq,
    DomainError,
    MalformedSeries,
    NauseaLevel,
    OradeRecord,
    OutOfRange,
    PainScore,
    SedationLevel,
    Sex,
    Treatment,
    UnknownOpiate,
    UtilityWeights,
    aggregate_titrated_administrations,
    derive_respiratory_depression,
    orade_severity,
    to_meq,
    validate_pain,
)


class TestValidatePain:
    def test_lower_bound(self):
        assert validate_pain(0) == PainScore(0)

    def test_upper_bound(self):
        assert validate_pain(10) == PainScore(10)

    def test_above_range_rejected(self):
        with pytest.raises(OutOfRange):
            validate_pain(11)

    def test_below_range_rejected(self):
        with pytest.raises(OutOfRange):
            validate_pain(-1)

    @given(st.integers(min_value=-50, max_value=50))
    def test_accepts_exactly_zero_to_ten(self, raw):
        if 0 <= raw <= 10:
            assert validate_pain(raw).nrs == raw
        else:
            with pytest.raises(OutOfRange):
                validate_pain(raw)

    def test_non_integers_rejected(self):
        for bad in (3.5, "4", True, None):
            with pytest.raises(OutOfRange):
                validate_pain(bad)


def _orade_strategy():
    return st.builds(
        lambda nausea, sedation, flags, resp, nal, anti: OradeRecord(
            nausea=nausea,
            vomiting=flags[0],
            sedation=sedation,
            dizziness=flags[1],
            itching=flags[2],
            urinary_retention=flags[3],
            confusion=flags[4],
            hallucinations=flags[5],
            respiratory_depression=resp or nal,
            rescue_naloxone=nal,
            rescue_antiemetic=anti,
        ),
        nausea=st.sampled_from(list(NauseaLevel)),
        sedation=st.sampled_from(list(SedationLevel)),
        flags=st.tuples(*([st.booleans()] * 6)),
        resp=st.booleans(),
        nal=st.booleans(),
        anti=st.booleans(),
    )


class TestOradeSeverity:
    def test_all_clear_is_zero(self):
        assert orade_severity(OradeRecord()) == 0.0

    def test_everything_maximal_is_ten(self):
        rec = OradeRecord(
            nausea=NauseaLevel.SEVERE, vomiting=True,
            sedation=SedationLevel.UNRESPONSIVE, dizziness=True, itching=True,
            urinary_retention=True, confusion=True, hallucinations=True,
            respiratory_depression=True, rescue_naloxone=True,
            rescue_antiemetic=True,
        )
        assert orade_severity(rec) == pytest.approx(10.0, abs=1e-12)

    def test_severe_nausea_alone_with_default_weights(self):
        # weighted mean: weight 1 out of a total of 13 (resp weighs 3),
        # scaled to the 0..10 range -> 10 * 1/13
        rec = OradeRecord(nausea=NauseaLevel.SEVERE)
        assert orade_severity(rec) == pytest.approx(10.0 / 13.0, abs=1e-12)

    def test_all_zero_weights_rejected(self):
        with pytest.raises(AllZeroWeights):
            orade_severity(OradeRecord(), weights={})

    def test_negative_weight_rejected(self):
        weights = dict(DEFAULT_ORADE_WEIGHTS)
        weights["vomiting"] = -1.0
        with pytest.raises(DomainError):
            orade_severity(OradeRecord(), weights=weights)

    @given(_orade_strategy())
    def test_bounded(self, rec):
        assert 0.0 <= orade_severity(rec) <= 10.0 + 1e-12

    @given(_orade_strategy())
    def test_monotone_in_each_component(self, rec):
        base = orade_severity(rec)
        nausea_order = list(NauseaLevel)
        i = nausea_order.index(rec.nausea)
        if i < 3:
            worse = OradeRecord(**{**vars(rec), "nausea": nausea_order[i + 1]})
            assert orade_severity(worse) >= base
        if not rec.vomiting:
            worse = OradeRecord(**{**vars(rec), "vomiting": True})
            assert orade_severity(worse) >= base
        if not rec.respiratory_depression:
            worse = OradeRecord(**{**vars(rec), "respiratory_depression": True})
            assert orade_severity(worse) >= base


class TestRespiratoryDepression:
    def test_naloxone_alone_is_positive(self):
        assert derive_respiratory_depression(True) is True

    def test_sustained_low_rate_perceived(self):
        series = [(float(m), 8.0) for m in range(13)]
        assert derive_respiratory_depression(False, rr_series=series,
                                             perceived_opioid_induced=True) is True

    def test_short_desaturation_is_negative(self):
        series = [(float(m), 89.0) for m in range(6)]
        assert derive_respiratory_depression(False, spo2_series=series,
                                             perceived_opioid_induced=True) is False

    def test_sustained_desaturation_perceived(self):
        series = [(float(m), 88.0) for m in range(0, 22, 2)]
        assert derive_respiratory_depression(False, spo2_series=series,
                                             perceived_opioid_induced=True) is True

    def test_not_perceived_opioid_induced_gates_both_criteria(self):
        rr = [(float(m), 8.0) for m in range(13)]
        assert derive_respiratory_depression(False, rr_series=rr,
                                             perceived_opioid_induced=False) is False

    def test_recovery_resets_the_run(self):
        # below threshold for two 6-minute stints separated by a recovery
        series = [(0.0, 8.0), (6.0, 12.0), (7.0, 8.0), (13.0, 12.0)]
        assert derive_respiratory_depression(False, rr_series=series,
                                             perceived_opioid_induced=True) is False

    def test_non_monotone_timestamps_rejected(self):
        with pytest.raises(MalformedSeries):
            derive_respiratory_depression(False, rr_series=[(5.0, 8.0), (5.0, 8.0)],
                                          perceived_opioid_induced=True)

    @given(
        values=st.lists(st.floats(min_value=4.0, max_value=16.0), min_size=2, max_size=12),
        split_at=st.integers(min_value=0, max_value=10),
        frac=st.floats(min_value=0.1, max_value=0.9),
    )
    @settings(max_examples=200)
    def test_invariant_to_splitting_a_sample(self, values, split_at, frac):
        series = [(float(m), v) for m, v in enumerate(values)]
        split_at = min(split_at, len(series) - 2)
        t_new = series[split_at][0] + frac  # strictly between two samples
        split_series = (series[:split_at + 1]
                        + [(t_new, series[split_at][1])]
                        + series[split_at + 1:])
        before = derive_respiratory_depression(False, rr_series=series,
                                               perceived_opioid_induced=True)
        after = derive_respiratory_depression(False, rr_series=split_series,
                                              perceived_opioid_induced=True)
        assert before == after


class TestMeqConversion:
    def test_morphine_identity(self):
        assert to_meq("morphine", 10.0).value == 10.0

    def test_fentanyl_factor(self):
        # shipped table: iv fentanyl converts at 100x
        assert to_meq("fentanyl", 0.1).value == pytest.approx(10.0, abs=1e-12)

    def test_zero_dose(self):
        assert to_meq("morphine", 0.0).value == 0.0

    def test_unknown_opiate(self):
        with pytest.raises(UnknownOpiate):
            to_meq("oxycodone", 5.0)

    def test_negative_dose_rejected(self):
        with pytest.raises(OutOfRange):
            to_meq("morphine", -1.0)

    def test_accepts_treatment_objects(self):
        t = Treatment(opiate_id=1, registry=("morphine", "fentanyl"))
        assert to_meq(t, 0.05).value == pytest.approx(5.0)

    @given(st.floats(min_value=0.0, max_value=50.0),
           st.floats(min_value=0.0, max_value=50.0))
    def test_linear_in_dose(self, a, b):
        for opiate in ("morphine", "fentanyl"):
            combined = to_meq(opiate, a + b).value
            parts = to_meq(opiate, a).value + to_meq(opiate, b).value
            assert combined == pytest.approx(parts, rel=1e-12, abs=1e-9)


class TestTitrationAggregation:
    def test_empty_sum(self):
        assert aggregate_titrated_administrations([]).value == 0.0

    def test_additivity_inside_window(self):
        admins = [("morphine", 5.0, -10.0), ("morphine", 5.0, -2.0)]
        assert aggregate_titrated_administrations(admins).value == 10.0

    def test_fentanyl_titration(self):
        assert aggregate_titrated_administrations(
            [("fentanyl", 0.05, -5.0)]).value == pytest.approx(5.0)

    def test_outside_window_excluded(self):
        admins = [("morphine", 5.0, -45.0), ("morphine", 3.0, -10.0)]
        assert aggregate_titrated_administrations(admins).value == 3.0

    def test_unknown_opiate_propagates(self):
        with pytest.raises(UnknownOpiate):
            aggregate_titrated_administrations([("oxycodone", 5.0, -1.0)])

    @given(st.permutations(list(range(4))))
    def test_permutation_invariant(self, order):
        admins = [("morphine", 2.0, -1.0), ("fentanyl", 0.01, -5.0),
                  ("morphine", 1.5, -20.0), ("morphine", 4.0, -29.0)]
        shuffled = [admins[i] for i in order]
        assert (aggregate_titrated_administrations(shuffled).value
                == pytest.approx(aggregate_titrated_administrations(admins).value,
                                 rel=1e-12))


class TestTypeInvariants:
    def test_minor_rejected(self):
        with pytest.raises(OutOfRange):
            CaseFeatures(age=17, weight_kg=70.0, sex=Sex.FEMALE, asa_class=2,
                         surgery_duration_min=60.0, surgery_type=0,
                         chronic_opioid_use=False, comorbidity_score=0.0)

    def test_nonfinite_weight_rejected(self):
        with pytest.raises(OutOfRange):
            CaseFeatures(age=30, weight_kg=math.nan, sex=Sex.FEMALE, asa_class=2,
                         surgery_duration_min=60.0, surgery_type=0,
                         chronic_opioid_use=False, comorbidity_score=0.0)

    def test_surgery_type_bounds(self):
        with pytest.raises(OutOfRange):
            CaseFeatures(age=30, weight_kg=70.0, sex=Sex.FEMALE, asa_class=2,
                         surgery_duration_min=60.0, surgery_type=99,
                         chronic_opioid_use=False, comorbidity_score=0.0)

    def test_default_registry_is_single_morphine(self):
        assert Treatment().registry == ("morphine",)
        assert Treatment().name == "morphine"

    def test_treatment_id_bounds(self):
        with pytest.raises(OutOfRange):
            Treatment(opiate_id=1)

    def test_naloxone_implies_respiratory_depression(self):
        with pytest.raises(DomainError):
            OradeRecord(rescue_naloxone=True, respiratory_depression=False)

    def test_impact_score_bounds(self):
        with pytest.raises(OutOfRange):
            OradeRecord(impact_score=11)

    def test_negative_dose_rejected(self):
        with pytest.raises(OutOfRange):
            DoseMeq(-0.5)

    def test_grid_point_count(self):
        assert DoseGrid(0.0, 20.0, 0.5).n_points == 41
        assert DoseGrid(0.0, 20.0, 0.5).points()[-1] == 20.0

    def test_grid_invariants(self):
        with pytest.raises(OutOfRange):
            DoseGrid(5.0, 5.0, 0.5)
        with pytest.raises(OutOfRange):
            DoseGrid(0.0, 10.0, -1.0)
        with pytest.raises(OutOfRange):
            DoseGrid(0.0, 0.4, 0.5)  # single point

    def test_weights_must_not_vanish(self):
        with pytest.raises(OutOfRange):
            UtilityWeights(0.0, 0.0)
        with pytest.raises(OutOfRange):
            UtilityWeights(-0.1, 0.5)
