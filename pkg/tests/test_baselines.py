import numpy as np
import pytest

from doselab.baselines import (
    DEFAULT_RULE_TABLE,
    InsufficientData,
    NoMatchingRule,
    ProxyReport,
    Rule,
    RuleTable,
    default_rule_table,
    deviations_csv_rows,
    proxy_marker_score,
    rule_based_dose_from_administrations,
    rule_based_optimal_dose,
    severity_band,
)
from doselab.domain import (
    DoseMeq,
    NauseaLevel,
    OradeRecord,
    PainScore,
)
from doselab.synthgen import generate_cohort, true_optimal_dose


NO_ORADES = OradeRecord()
RESP_DEPRESSION = OradeRecord(respiratory_depression=True)


class TestRuleBasedDose:
    def test_moderate_pain_anchor(self):
        # the one established adjustment: +2 mg MEQ for moderate pain
        out = rule_based_optimal_dose(DoseMeq(10.0), PainScore(5), NO_ORADES)
        assert out.value == 12.0

    def test_no_pain_no_orades_keeps_dose(self):
        out = rule_based_optimal_dose(DoseMeq(10.0), PainScore(0), NO_ORADES)
        assert out.value == 10.0

    def test_respiratory_depression_clamps_at_zero(self):
        out = rule_based_optimal_dose(DoseMeq(1.0), PainScore(0), RESP_DEPRESSION)
        assert out.value == 0.0

    def test_severe_pain(self):
        out = rule_based_optimal_dose(DoseMeq(10.0), PainScore(8), NO_ORADES)
        assert out.value == 14.0

    def test_no_pain_with_marked_orades_reduces(self):
        orades = OradeRecord(nausea=NauseaLevel.SEVERE, vomiting=True,
                             dizziness=True, itching=True, confusion=True,
                             urinary_retention=True)
        assert severity_band(
            __import__("doselab.domain", fromlist=["orade_severity"]).orade_severity(orades)
        ) >= 1
        out = rule_based_optimal_dose(DoseMeq(10.0), PainScore(0), orades)
        assert out.value == 8.0

    def test_respiratory_depression_overrides_pain(self):
        out = rule_based_optimal_dose(DoseMeq(10.0), PainScore(9), RESP_DEPRESSION)
        assert out.value == 6.0

    def test_upper_clamp(self):
        out = rule_based_optimal_dose(DoseMeq(19.0), PainScore(9), NO_ORADES,
                                      dose_max=20.0)
        assert out.value == 20.0

    def test_first_match_wins_on_overlapping_table(self):
        table = RuleTable(rules=(
            Rule(adjustment_meq=1.0, pain_min=0, pain_max=10),
            Rule(adjustment_meq=99.0, pain_min=0, pain_max=10),
        ))
        out = rule_based_optimal_dose(DoseMeq(5.0), PainScore(5), NO_ORADES, table)
        assert out.value == 6.0

    def test_determinism(self):
        a = rule_based_optimal_dose(DoseMeq(7.0), PainScore(6), NO_ORADES)
        b = rule_based_optimal_dose(DoseMeq(7.0), PainScore(6), NO_ORADES)
        assert a == b

    def test_non_exhaustive_table_raises(self):
        table = RuleTable(rules=(Rule(adjustment_meq=1.0, pain_min=5, pain_max=10),))
        with pytest.raises(NoMatchingRule):
            rule_based_optimal_dose(DoseMeq(5.0), PainScore(0), NO_ORADES, table)

    def test_default_table_is_exhaustive(self):
        table = default_rule_table()
        for pain in range(11):
            for band in (0, 1, 2):
                for resp in (False, True):
                    rule = table.first_match(pain, band, resp)
                    assert np.isfinite(rule.adjustment_meq)

    def test_table_json_round_trip(self):
        table = default_rule_table()
        restored = RuleTable.from_json(table.to_json())
        assert restored == table

    def test_titrated_fentanyl_entry_point(self):
        # two fentanyl pushes inside the attribution window aggregate to
        # 10 MEQ, then moderate pain adds 2
        admins = [("fentanyl", 0.05, -10.0), ("fentanyl", 0.05, -2.0)]
        out = rule_based_dose_from_administrations(admins, PainScore(5), NO_ORADES)
        assert out.value == pytest.approx(12.0)


class TestProxyMarker:
    def test_zero_deviation_is_degenerate(self, small_cohort):
        report = proxy_marker_score(small_cohort.records,
                                    lambda r: r.administered_dose.value)
        assert report.degenerate is True
        assert report.pacu_los.pearson_r is None

    def test_insufficient_data(self, small_cohort):
        with pytest.raises(InsufficientData):
            proxy_marker_score(small_cohort.records[:5], lambda r: 0.0)

    def test_oracle_recommender_correlates_with_los(self, cohort5000, noiseless_gt):
        report = proxy_marker_score(
            cohort5000.records,
            lambda r: true_optimal_dose(noiseless_gt, r.features).value,
        )
        assert report.pacu_los.pearson_r > 0.3
        assert report.ambulation.pearson_r < 0.0

    def test_anti_recommender_scores_lower(self, cohort5000, noiseless_gt):
        oracle = proxy_marker_score(
            cohort5000.records,
            lambda r: true_optimal_dose(noiseless_gt, r.features).value,
        )
        anti = proxy_marker_score(
            cohort5000.records,
            lambda r: 20.0 - true_optimal_dose(noiseless_gt, r.features).value,
        )
        assert anti.pacu_los.pearson_r < oracle.pacu_los.pearson_r

    def test_random_recommender_scores_lower(self, cohort5000, noiseless_gt):
        rng = np.random.default_rng(5)
        random_doses = rng.uniform(0, 20, len(cohort5000.records))
        lookup = {id(r): d for r, d in zip(cohort5000.records, random_doses)}
        oracle = proxy_marker_score(
            cohort5000.records,
            lambda r: true_optimal_dose(noiseless_gt, r.features).value,
        )
        random_report = proxy_marker_score(cohort5000.records,
                                           lambda r: lookup[id(r)])
        assert oracle.pacu_los.pearson_r > random_report.pacu_los.pearson_r

    def test_report_serializes(self, small_cohort):
        report = proxy_marker_score(small_cohort.records, lambda r: 5.0)
        payload = report.to_dict()
        assert payload["n"] == len(small_cohort.records)
        rows = deviations_csv_rows(report, small_cohort.records)
        assert len(rows) == len(small_cohort.records) + 1
