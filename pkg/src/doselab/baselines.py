"""Non-causal-ML comparison methods: the rule-based dose calculator and the
treatment-success proxy analysis against PACU stay and ambulation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .domain import (
    DomainError,
    DoseMeq,
    EncounterRecord,
    MeqConversionTable,
    DEFAULT_MEQ_TABLE,
    OradeRecord,
    PainScore,
    Treatment,
    aggregate_titrated_administrations,
    orade_severity,
)


class NoMatchingRule(DomainError):
    """A rule table failed to cover the presented response."""


class InsufficientData(DomainError):
    """Too few records for a meaningful proxy analysis."""


# Adverse-event severity bands: thirds of the 0..10 scale.
SEVERITY_BAND_EDGES = (10.0 / 3.0, 20.0 / 3.0)


def severity_band(severity: float) -> int:
    """0 = low, 1 = moderate, 2 = high, by thirds of the severity scale."""
    if severity <= SEVERITY_BAND_EDGES[0]:
        return 0
    if severity <= SEVERITY_BAND_EDGES[1]:
        return 1
    return 2


@dataclass(frozen=True)
class Rule:
    """One adjustment rule; None conditions match anything, first match wins."""

    adjustment_meq: float
    pain_min: int = 0
    pain_max: int = 10
    severity_bands: tuple[int, ...] = (0, 1, 2)
    requires_resp: bool | None = None
    label: str = ""

    def matches(self, pain: int, band: int, resp: bool) -> bool:
        if not self.pain_min <= pain <= self.pain_max:
            return False
        if band not in self.severity_bands:
            return False
        if self.requires_resp is not None and resp is not self.requires_resp:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "adjustment_meq": self.adjustment_meq,
            "pain_min": self.pain_min,
            "pain_max": self.pain_max,
            "severity_bands": list(self.severity_bands),
            "requires_resp": self.requires_resp,
            "label": self.label,
        }


@dataclass(frozen=True)
class RuleTable:
    """Ordered rules mapping the observed response to a dose adjustment."""

    rules: tuple[Rule, ...]

    def first_match(self, pain: int, band: int, resp: bool) -> Rule:
        for rule in self.rules:
            if rule.matches(pain, band, resp):
                return rule
        raise NoMatchingRule(
            f"no rule matches pain={pain}, severity band={band}, resp={resp}"
        )

    def to_json(self) -> str:
        return json.dumps({"rules": [r.to_dict() for r in self.rules]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RuleTable":
        payload = json.loads(text)
        rules = tuple(
            Rule(
                adjustment_meq=float(r["adjustment_meq"]),
                pain_min=int(r.get("pain_min", 0)),
                pain_max=int(r.get("pain_max", 10)),
                severity_bands=tuple(r.get("severity_bands", (0, 1, 2))),
                requires_resp=r.get("requires_resp"),
                label=r.get("label", ""),
            )
            for r in payload["rules"]
        )
        return cls(rules=rules)


def default_rule_table() -> RuleTable:
    """Shipped adjustment table.

    Only the moderate-pain +2 MEQ anchor is an established adjustment; the
    remaining entries are configurable engineering defaults standing in for
    clinician-specified rules.
    """
    return RuleTable(rules=(
        Rule(adjustment_meq=-4.0, requires_resp=True, label="respiratory depression"),
        Rule(adjustment_meq=4.0, pain_min=7, label="severe pain"),
        Rule(adjustment_meq=2.0, pain_min=4, pain_max=6, label="moderate pain"),
        Rule(adjustment_meq=0.0, pain_min=1, pain_max=3, label="mild pain"),
        Rule(adjustment_meq=-2.0, pain_max=0, severity_bands=(1, 2),
             label="no pain with adverse events"),
        Rule(adjustment_meq=0.0, pain_max=0, label="no pain"),
    ))


DEFAULT_RULE_TABLE = default_rule_table()


def rule_based_optimal_dose(
    administered: DoseMeq | float,
    pain_0_1h: PainScore,
    orades: OradeRecord,
    table: RuleTable = DEFAULT_RULE_TABLE,
    dose_max: float = 20.0,
) -> DoseMeq:
    """Retrospective calculated optimal dose: administered + first-match adjustment."""
    base = administered.value if isinstance(administered, DoseMeq) else float(administered)
    if base < 0:
        raise DomainError(f"administered dose must be >= 0, got {base}")
    band = severity_band(orade_severity(orades))
    rule = table.first_match(pain_0_1h.nrs, band, orades.respiratory_depression)
    return DoseMeq(float(np.clip(base + rule.adjustment_meq, 0.0, dose_max)))


def rule_based_dose_from_administrations(
    admins: Sequence[tuple[Treatment | str, float, float]],
    pain_0_1h: PainScore,
    orades: OradeRecord,
    table: RuleTable = DEFAULT_RULE_TABLE,
    dose_max: float = 20.0,
    window_minutes: float = 30.0,
    meq_table: MeqConversionTable = DEFAULT_MEQ_TABLE,
) -> DoseMeq:
    """Calculator entry point for titrated administrations (fentanyl handling):
    aggregate them into one end-of-surgery MEQ dose, then adjust."""
    administered = aggregate_titrated_administrations(
        admins, window_minutes=window_minutes, table=meq_table)
    return rule_based_optimal_dose(administered, pain_0_1h, orades, table, dose_max)


# Proxy-marker analysis -----------------------------------------------------------

@dataclass(frozen=True)
class ProxyCorrelations:
    pearson_r: float | None
    spearman_rho: float | None
    slope: float | None


@dataclass(frozen=True)
class ProxyReport:
    """Correlation of |administered - recommended| with recovery markers.

    A good recommender should see PACU stay lengthen (positive correlation)
    and ambulation worsen (negative) as clinicians deviate from its doses.
    """

    n: int
    pacu_los: ProxyCorrelations
    ambulation: ProxyCorrelations
    degenerate: bool
    deviations: tuple[float, ...] = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "degenerate": self.degenerate,
            "pacu_los": vars(self.pacu_los),
            "ambulation": vars(self.ambulation),
        }


def _correlations(deviation: np.ndarray, target: np.ndarray) -> ProxyCorrelations:
    if np.std(deviation) == 0.0 or np.std(target) == 0.0:
        return ProxyCorrelations(None, None, None)
    pearson = float(np.corrcoef(deviation, target)[0, 1])
    rho = float(stats.spearmanr(deviation, target).statistic)
    slope = float(np.cov(deviation, target)[0, 1] / np.var(deviation, ddof=1))
    return ProxyCorrelations(pearson_r=pearson, spearman_rho=rho, slope=slope)


def proxy_marker_score(
    records: Sequence[EncounterRecord],
    recommender: Callable[[EncounterRecord], float],
) -> ProxyReport:
    """Score a dose recommender against recovery proxies on a test split.

    The recommender receives the full record (covariates via
    ``record.features``); observed-response fields let rule-style methods
    participate.
    """
    if len(records) < 10:
        raise InsufficientData(f"proxy analysis needs >= 10 records, got {len(records)}")
    deviation = np.array([
        abs(r.administered_dose.value - float(recommender(r))) for r in records
    ])
    los = np.array([r.pacu_los_min for r in records])
    cas = np.array([float(r.ambulation_cas) for r in records])
    degenerate = bool(np.std(deviation) == 0.0)
    return ProxyReport(
        n=len(records),
        pacu_los=_correlations(deviation, los),
        ambulation=_correlations(deviation, cas),
        degenerate=degenerate,
        deviations=tuple(float(d) for d in deviation),
    )


def deviations_csv_rows(report: ProxyReport, records: Sequence[EncounterRecord]) -> list[str]:
    lines = ["deviation_meq,pacu_los_min,ambulation_cas"]
    for d, r in zip(report.deviations, records):
        lines.append(f"{d!r},{r.pacu_los_min!r},{r.ambulation_cas}")
    return lines
