"""Internal-validation harness: splits, metrics, overfitting detection,
overlap diagnostics, and ranked method comparison against the synthetic
ground-truth oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import strata
from .baselines import RuleTable, DEFAULT_RULE_TABLE, rule_based_optimal_dose
from .cadr import CadrModel, design_matrix, _pain_target, encode_row
from .domain import (
    CaseFeatures,
    DomainError,
    DoseGrid,
    EncounterRecord,
    MORPHINE,
    UtilityWeights,
    orade_severity,
)
from .learners import FittedModel, LearnerKind, Task, predict
from .recommendation import recommend_dose
from .synthgen import (
    Cohort,
    ScmGroundTruth,
    true_optimal_dose,
    true_orade_response,
    true_pain_response,
)


class TooSmall(DomainError):
    """Not enough records for the requested split or diagnostic."""


class SingleClass(DomainError):
    """AUC needs both classes present."""


# Splits --------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """Train/test/retention fractions; they must sum to one."""

    train_frac: float = 0.80
    test_frac: float = 0.15
    retention_frac: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        fracs = (self.train_frac, self.test_frac, self.retention_frac)
        if any(f <= 0 for f in fracs):
            raise DomainError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise DomainError(f"split fractions must sum to 1, got {sum(fracs)}")


def _round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def split(
    records: Sequence[EncounterRecord], spec: SplitSpec = SplitSpec()
) -> tuple[list[EncounterRecord], list[EncounterRecord], list[EncounterRecord]]:
    """Seed-deterministic disjoint exhaustive split.

    Test and retention sizes are the rounded fractions; the remainder goes
    to train.
    """
    n = len(records)
    if n < 20:
        raise TooSmall(f"need >= 20 records to split, got {n}")
    n_test = _round_half_up(spec.test_frac * n)
    n_ret = _round_half_up(spec.retention_frac * n)
    n_train = n - n_test - n_ret
    order = np.random.default_rng(spec.seed).permutation(n)
    train_idx = order[:n_train]
    test_idx = order[n_train:n_train + n_test]
    ret_idx = order[n_train + n_test:]
    return ([records[i] for i in train_idx],
            [records[i] for i in test_idx],
            [records[i] for i in ret_idx])


# Metrics -------------------------------------------------------------------------

def metric_accuracy(pred: np.ndarray, true: np.ndarray) -> float:
    pred = np.asarray(pred)
    true = np.asarray(true)
    if len(pred) != len(true):
        raise DomainError("prediction and truth lengths differ")
    return float(np.mean(pred == true))


def metric_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-statistic AUC with half credit for score ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    if len(scores) != len(labels):
        raise DomainError("scores and labels lengths differ")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC requires both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    rank = 1.0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (rank + rank + (j - i)) / 2.0  # average tied rank
        rank += j - i + 1
        i = j + 1
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def metric_rmse(pred: np.ndarray, true: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=float)
    true = np.asarray(true, dtype=float)
    if len(pred) != len(true):
        raise DomainError("prediction and truth lengths differ")
    return float(np.sqrt(np.mean((pred - true) ** 2)))


# Overfitting ----------------------------------------------------------------------

@dataclass(frozen=True)
class OverfitReport:
    flag: bool
    best_round: int
    min_val_loss: float
    final_val_loss: float


def detect_overfit(loss_curve: Sequence[tuple[int, float, float]],
                   ratio: float = 1.10) -> OverfitReport:
    """Flag when the final validation loss sits above the minimum by > ratio."""
    if len(loss_curve) < 2:
        raise DomainError("loss curve needs at least 2 entries")
    vals = np.array([v for _, _, v in loss_curve])
    best = int(np.argmin(vals))
    final = float(vals[-1])
    return OverfitReport(
        flag=bool(final > ratio * float(vals[best])),
        best_round=int(loss_curve[best][0]),
        min_val_loss=float(vals[best]),
        final_val_loss=final,
    )


# Overlap diagnostic ----------------------------------------------------------------

@dataclass(frozen=True)
class OverlapDiagnostic:
    """Counts of (severity stratum x dose bin) cells with sparse-cell flags."""

    strata_edges: tuple[float, ...]
    dose_bin_edges: tuple[float, ...]
    counts: tuple[tuple[int, ...], ...]
    violations: tuple[tuple[int, int], ...]
    min_count: int
    observed_dose_min: float
    observed_dose_max: float

    @property
    def n_strata(self) -> int:
        return len(self.counts)

    @property
    def n_dose_bins(self) -> int:
        return len(self.dose_bin_edges) - 1

    def stratum_of(self, x: CaseFeatures) -> int:
        return int(strata.stratum_of(strata.case_severity_score(x),
                                     np.asarray(self.strata_edges)))

    def dose_bin_of(self, dose: float) -> int:
        edges = np.asarray(self.dose_bin_edges)
        idx = int(np.searchsorted(edges, dose, side="right") - 1)
        return min(max(idx, 0), self.n_dose_bins - 1)

    def is_violated(self, stratum: int, dose_bin: int) -> bool:
        return (stratum, dose_bin) in set(self.violations)

    def warnings_for(self, x: CaseFeatures, dose: float) -> list[str]:
        out = []
        if self.is_violated(self.stratum_of(x), self.dose_bin_of(dose)):
            out.append("overlap_violation")
        if dose < self.observed_dose_min or dose > self.observed_dose_max:
            out.append("extrapolated_dose")
        return out

    def to_dict(self) -> dict:
        return {
            "strata_edges": list(self.strata_edges),
            "dose_bin_edges": list(self.dose_bin_edges),
            "counts": [list(row) for row in self.counts],
            "violations": [list(v) for v in self.violations],
            "min_count": self.min_count,
            "observed_dose_min": self.observed_dose_min,
            "observed_dose_max": self.observed_dose_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OverlapDiagnostic":
        return cls(
            strata_edges=tuple(d["strata_edges"]),
            dose_bin_edges=tuple(d["dose_bin_edges"]),
            counts=tuple(tuple(int(c) for c in row) for row in d["counts"]),
            violations=tuple((int(a), int(b)) for a, b in d["violations"]),
            min_count=int(d["min_count"]),
            observed_dose_min=float(d["observed_dose_min"]),
            observed_dose_max=float(d["observed_dose_max"]),
        )


def overlap_diagnostic(
    records: Sequence[EncounterRecord],
    grid: DoseGrid = DoseGrid(),
    n_strata: int = 5,
    n_dose_bins: int = 10,
    min_count: int = 5,
) -> OverlapDiagnostic:
    """Tabulate dose exposure per severity stratum and flag sparse cells.

    Strata are quantile bins of the case-severity score; dose bins are
    equal-width over the grid. Cells with fewer than min_count records are
    positivity-violation candidates.
    """
    n = len(records)
    if n < n_strata * n_dose_bins:
        raise TooSmall(
            f"need >= {n_strata * n_dose_bins} records for "
            f"{n_strata}x{n_dose_bins} cells, got {n}"
        )
    scores = strata.severity_scores([r.features for r in records])
    edges = strata.quantile_edges(scores, n_strata)
    stratum = strata.stratum_of(scores, edges)
    doses = np.array([r.administered_dose.value for r in records])
    bin_edges = np.linspace(grid.min_meq, grid.max_meq, n_dose_bins + 1)
    dose_bin = np.clip(np.searchsorted(bin_edges, doses, side="right") - 1,
                       0, n_dose_bins - 1)
    counts = np.zeros((n_strata, n_dose_bins), dtype=int)
    np.add.at(counts, (stratum, dose_bin), 1)
    violations = tuple(
        (int(s), int(b))
        for s in range(n_strata)
        for b in range(n_dose_bins)
        if counts[s, b] < min_count
    )
    return OverlapDiagnostic(
        strata_edges=tuple(float(e) for e in edges),
        dose_bin_edges=tuple(float(e) for e in bin_edges),
        counts=tuple(tuple(int(c) for c in row) for row in counts),
        violations=violations,
        min_count=min_count,
        observed_dose_min=float(doses.min()),
        observed_dose_max=float(doses.max()),
    )


# Dose-recommendation methods --------------------------------------------------------

class CadrPolicy:
    """Dose method backed by a fitted dose-response model pair."""

    def __init__(self, model: CadrModel, w: UtilityWeights, name: str | None = None):
        self.model = model
        self.w = w
        self.name = name or f"causal_ml({model.pain_model.kind.value})"

    def doses(self, records: Sequence[EncounterRecord]) -> np.ndarray:
        return np.array([
            recommend_dose(self.model, r.features, w=self.w).dose.value
            for r in records
        ])


class RuleBasedPolicy:
    """The retrospective rule-based calculated optimal dose."""

    name = "rule_based"

    def __init__(self, table: RuleTable = DEFAULT_RULE_TABLE, dose_max: float = 20.0):
        self.table = table
        self.dose_max = dose_max

    def doses(self, records: Sequence[EncounterRecord]) -> np.ndarray:
        return np.array([
            rule_based_optimal_dose(r.administered_dose, r.pain_arrival, r.orades,
                                    self.table, self.dose_max).value
            for r in records
        ])


class ProxyMarkerPolicy:
    """Dose method minimizing a fitted PACU length-of-stay model over the grid.

    Operationalizes treatment-success proxies as a recommender: shorter
    predicted discharge-readiness time is treated as better treatment.
    """

    name = "proxy_marker"

    def __init__(self, los_model: FittedModel, registry: tuple[str, ...],
                 grid: DoseGrid):
        self.los_model = los_model
        self.registry = registry
        self.grid = grid

    @classmethod
    def fit(cls, train_records: Sequence[EncounterRecord],
            grid: DoseGrid = DoseGrid(),
            kind: LearnerKind = LearnerKind.GRADIENT_BOOSTED_TREES,
            seed: int = 0) -> "ProxyMarkerPolicy":
        registry = train_records[0].treatment.registry
        X = design_matrix(tuple(train_records), registry)
        y = np.array([r.pacu_los_min for r in train_records])
        from .cadr import feature_names

        model = train_learner(kind, X, y, seed=seed,
                              feature_names=feature_names(registry))
        return cls(los_model=model, registry=registry, grid=grid)

    def doses(self, records: Sequence[EncounterRecord]) -> np.ndarray:
        doses = np.asarray(self.grid.points())
        out = np.empty(len(records))
        for i, r in enumerate(records):
            X = np.stack([encode_row(r.treatment, d, r.features, self.registry)
                          for d in doses])
            los_hat = predict(self.los_model, X)
            out[i] = doses[int(np.argmin(los_hat))]
        return out


class OraclePolicy:
    """The ground-truth optimal dose (available only synthetically)."""

    name = "oracle"

    def __init__(self, gt: ScmGroundTruth, grid: DoseGrid, w: UtilityWeights):
        self.gt = gt
        self.grid = grid
        self.w = w

    def doses(self, records: Sequence[EncounterRecord]) -> np.ndarray:
        return np.array([
            true_optimal_dose(self.gt, r.features, MORPHINE, self.grid, self.w).value
            for r in records
        ])


class RandomPolicy:
    """Uniformly random grid dose per case; a floor for comparisons."""

    name = "random_dose"

    def __init__(self, grid: DoseGrid, seed: int = 0):
        self.grid = grid
        self.seed = seed

    def doses(self, records: Sequence[EncounterRecord]) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        points = np.asarray(self.grid.points())
        return points[rng.integers(0, len(points), size=len(records))]


class ConstantPolicy:
    """One fixed dose for everyone."""

    def __init__(self, dose: float, name: str | None = None):
        self.dose = dose
        self.name = name or f"constant({dose})"

    def doses(self, records: Sequence[EncounterRecord]) -> np.ndarray:
        return np.full(len(records), self.dose)


# Method evaluation -------------------------------------------------------------------

@dataclass(frozen=True)
class MethodReport:
    method_id: str
    regret: float
    dose_mae: float
    rmse_pain: float | None = None
    rmse_orade: float | None = None
    accuracy: float | None = None
    auc: float | None = None
    overfit: bool | None = None

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "regret": self.regret,
            "dose_mae": self.dose_mae,
            "rmse_pain": self.rmse_pain,
            "rmse_orade": self.rmse_orade,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "overfit": self.overfit,
        }


@dataclass(frozen=True)
class EvaluationResult:
    reports: tuple[MethodReport, ...]
    carried_forward: tuple[str, str]

    def to_dict(self) -> dict:
        return {
            "reports": [r.to_dict() for r in self.reports],
            "carried_forward": list(self.carried_forward),
        }


def _snap_to_grid(doses: np.ndarray, grid: DoseGrid) -> np.ndarray:
    points = np.asarray(grid.points())
    idx = np.clip(np.round((doses - grid.min_meq) / grid.step_meq).astype(int),
                  0, len(points) - 1)
    return points[idx]


def _combined_true_loss(gt: ScmGroundTruth, x: CaseFeatures, dose: float,
                        w: UtilityWeights) -> float:
    return (w.w_pain * true_pain_response(gt, MORPHINE, dose, x)
            + w.w_orades * true_orade_response(gt, MORPHINE, dose, x))


def _model_metrics(policy, test_records: Sequence[EncounterRecord]) -> dict:
    """Outcome-model quality metrics for causal-ML methods on the test split."""
    model: CadrModel = policy.model
    X = design_matrix(tuple(test_records), model.registry)
    pain_true = np.array([_pain_target(r, model.pain_timepoint) for r in test_records])
    orade_true = np.array([orade_severity(r.orades) for r in test_records])
    out: dict = {}

    from .cadr import _predict_endpoint

    pain_hat = _predict_endpoint(model.pain_model, X)
    orade_hat = _predict_endpoint(model.orade_model, X)
    out["rmse_pain"] = metric_rmse(pain_hat, pain_true)
    out["rmse_orade"] = metric_rmse(orade_hat, orade_true)

    if model.pain_model.task is Task.CLASSIFICATION:
        prob = predict(model.pain_model, X)
        classes = np.asarray(model.pain_model.classes)
        pred_class = classes[np.argmax(prob, axis=1)]
        out["accuracy"] = metric_accuracy(pred_class, np.rint(pain_true).astype(int))
        # AUC on the clinically meaningful moderate-plus split (NRS >= 4)
        labels = (pain_true >= 4).astype(int)
        if 0 < labels.sum() < len(labels):
            scores = prob[:, classes >= 4].sum(axis=1)
            out["auc"] = metric_auc(scores, labels)

    curves = [policy.model.pain_model.loss_curve, policy.model.orade_model.loss_curve]
    flags = [detect_overfit(c).flag for c in curves if len(c) >= 2]
    if flags:
        out["overfit"] = bool(any(flags))
    return out


def evaluate_methods(
    cohort: Cohort,
    methods: Sequence,
    w: UtilityWeights = UtilityWeights(),
    oracle: ScmGroundTruth | None = None,
    spec: SplitSpec = SplitSpec(),
    grid: DoseGrid = DoseGrid(),
    test_records: Sequence[EncounterRecord] | None = None,
    retention_records: Sequence[EncounterRecord] | None = None,
) -> EvaluationResult:
    """Rank dose methods by mean true-utility regret on the retention split.

    Method doses are snapped to the grid so regret against the grid-optimal
    oracle is nonnegative by construction. Ties rank by dose MAE. The top
    two method ids are carried forward.
    """
    if len(methods) < 2:
        raise DomainError("need at least 2 methods to compare")
    gt = oracle if oracle is not None else cohort.ground_truth
    if retention_records is None or test_records is None:
        _, test_records, retention_records = split(cohort.records, spec)

    oracle_doses = np.array([
        true_optimal_dose(gt, r.features, MORPHINE, grid, w).value
        for r in retention_records
    ])
    oracle_loss = np.array([
        _combined_true_loss(gt, r.features, d, w)
        for r, d in zip(retention_records, oracle_doses)
    ])

    reports = []
    for policy in methods:
        doses = _snap_to_grid(np.asarray(policy.doses(retention_records), dtype=float),
                              grid)
        loss = np.array([
            _combined_true_loss(gt, r.features, d, w)
            for r, d in zip(retention_records, doses)
        ])
        regret = float(np.mean(loss - oracle_loss))
        dose_mae = float(np.mean(np.abs(doses - oracle_doses)))
        extra = _model_metrics(policy, test_records) if isinstance(policy, CadrPolicy) else {}
        reports.append(MethodReport(method_id=policy.name, regret=regret,
                                    dose_mae=dose_mae, **extra))

    ranked = tuple(sorted(reports, key=lambda r: (r.regret, r.dose_mae, r.method_id)))
    return EvaluationResult(
        reports=ranked,
        carried_forward=(ranked[0].method_id, ranked[1].method_id),
    )


def train_learner(kind, X, y, seed=0, feature_names=None):
    """Thin re-export used by policies; avoids importing learners at call sites."""
    from .learners import train

    return train(kind, X, y, task=Task.REGRESSION, seed=seed,
                 feature_names=feature_names)
