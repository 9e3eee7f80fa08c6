"""Pluggable supervised-learning registry.

Eight model families sit behind one train/predict interface so any of them
can drive the dose-response models interchangeably. Fits are deterministic
functions of (data, hyperparameters, seed); iterative learners record
per-round train/validation loss curves from an internal 90/10 fit-time split.
Fitted models serialize to versioned, checksummed JSON.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import linear, nets, simple, trees

SCHEMA_VERSION = 1


class LearnerError(ValueError):
    pass


class DegenerateTarget(LearnerError):
    """Classification target with fewer than two classes."""


class DimensionMismatch(LearnerError):
    """Training inputs are malformed: shapes disagree, too few rows, or NaNs."""


class SchemaMismatch(LearnerError):
    """Prediction features do not match the schema fixed at fit time."""


class VersionMismatch(LearnerError):
    """Model artifact was produced under an unsupported schema version."""


class CorruptArtifact(LearnerError):
    """Model artifact bytes fail to parse or fail their checksum."""


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class LearnerKind(str, Enum):
    MULTINOMIAL_LOGISTIC = "multinomial_logistic"
    KNN = "knn"
    DECISION_TREE = "decision_tree"
    RANDOM_FOREST = "random_forest"
    GRADIENT_BOOSTED_TREES = "gradient_boosted_trees"
    MLP = "mlp"
    LINEAR_SVM = "linear_svm"
    GAUSSIAN_NAIVE_BAYES = "gaussian_naive_bayes"


CLASSIFICATION_ONLY = frozenset(
    {LearnerKind.MULTINOMIAL_LOGISTIC, LearnerKind.GAUSSIAN_NAIVE_BAYES}
)

SUPPORTED_TASKS: dict[LearnerKind, frozenset[Task]] = {
    kind: (frozenset({Task.CLASSIFICATION}) if kind in CLASSIFICATION_ONLY
           else frozenset({Task.REGRESSION, Task.CLASSIFICATION}))
    for kind in LearnerKind
}

ITERATIVE_KINDS = frozenset({
    LearnerKind.MULTINOMIAL_LOGISTIC,
    LearnerKind.GRADIENT_BOOSTED_TREES,
    LearnerKind.MLP,
    LearnerKind.LINEAR_SVM,
})

DEFAULT_HYPER: dict[LearnerKind, dict] = {
    LearnerKind.MULTINOMIAL_LOGISTIC: {"epochs": 200, "lr": 0.5, "l2": 1e-4},
    LearnerKind.KNN: {"k": 15},
    LearnerKind.DECISION_TREE: {"max_depth": None, "min_samples_leaf": 1,
                                "min_samples_split": 2},
    LearnerKind.RANDOM_FOREST: {"n_trees": 100, "max_depth": 12,
                                "min_samples_leaf": 2, "max_features": 0.7,
                                "bootstrap": True},
    LearnerKind.GRADIENT_BOOSTED_TREES: {"n_rounds": 300, "learning_rate": 0.05,
                                         "max_depth": 4, "reg_lambda": 1.0,
                                         "gamma": 0.0, "colsample": 0.8,
                                         "min_samples_leaf": 1},
    LearnerKind.MLP: {"hidden": (32,), "epochs": 300, "lr": 0.05, "l2": 0.0},
    LearnerKind.LINEAR_SVM: {"epochs": 60, "reg_lambda": 1e-3, "batch_size": 64,
                             "epsilon": 0.1},
    LearnerKind.GAUSSIAN_NAIVE_BAYES: {"var_smoothing": 1e-9},
}

# Small documented grids for optional tuning on the test split.
TUNING_GRID: dict[LearnerKind, list[dict]] = {
    LearnerKind.MULTINOMIAL_LOGISTIC: [{"l2": 1e-4}, {"l2": 1e-2}],
    LearnerKind.KNN: [{"k": 5}, {"k": 15}, {"k": 31}],
    LearnerKind.DECISION_TREE: [{"max_depth": 6}, {"max_depth": 12}, {"max_depth": None}],
    LearnerKind.RANDOM_FOREST: [{"max_depth": 8}, {"max_depth": 12}, {"max_depth": 16}],
    LearnerKind.GRADIENT_BOOSTED_TREES: [{"n_rounds": 100}, {"n_rounds": 150},
                                         {"n_rounds": 250, "learning_rate": 0.05}],
    LearnerKind.MLP: [{"hidden": (32,)}, {"hidden": (32, 16)}, {"epochs": 600}],
    LearnerKind.LINEAR_SVM: [{"reg_lambda": 1e-2}, {"reg_lambda": 1e-3}, {"reg_lambda": 1e-4}],
    LearnerKind.GAUSSIAN_NAIVE_BAYES: [{"var_smoothing": 1e-9}, {"var_smoothing": 1e-6}],
}

_VAL_SPAWN_KEY = 7  # rng substream for the internal fit-time split


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names plus the standardization fixed at fit time."""

    names: tuple[str, ...]
    means: tuple[float, ...]
    sds: tuple[float, ...]

    def transform(self, X: np.ndarray) -> np.ndarray:
        means = np.asarray(self.means)
        sds = np.asarray(self.sds)
        return (X - means) / np.where(sds > 0, sds, 1.0)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "means": list(self.means),
                "sds": list(self.sds)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(names=tuple(d["names"]), means=tuple(d["means"]),
                   sds=tuple(d["sds"]))


@dataclass(frozen=True)
class FittedModel:
    """A trained learner: kind, task, serializable state, and provenance."""

    kind: LearnerKind
    task: Task
    params: dict
    feature_schema: FeatureSchema
    loss_curve: tuple[tuple[int, float, float], ...]
    train_meta: dict = field(default_factory=dict)

    @property
    def classes(self) -> list[int]:
        return list(self.train_meta.get("classes", []))


def _data_hash(X: np.ndarray, y: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    digest.update(np.ascontiguousarray(y, dtype=np.float64).tobytes())
    return digest.hexdigest()[:16]


def _check_training_inputs(X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2:
        raise DimensionMismatch(f"feature matrix must be 2-d, got shape {X.shape}")
    if len(X) != len(y):
        raise DimensionMismatch(f"{len(X)} feature rows but {len(y)} targets")
    if len(X) < 2:
        raise DimensionMismatch("training requires at least 2 rows")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise DimensionMismatch("training data contains NaN or infinite values")


def _fit_val_split(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_VAL_SPAWN_KEY,)))
    order = rng.permutation(n)
    n_val = max(1, int(round(0.1 * n)))
    if n_val >= n:
        n_val = n - 1
    return order[n_val:], order[:n_val]


def train(
    kind: LearnerKind,
    X: np.ndarray,
    y: np.ndarray,
    task: Task = Task.REGRESSION,
    hyper: dict | None = None,
    seed: int = 0,
    feature_names: tuple[str, ...] | None = None,
) -> FittedModel:
    """Fit one learner; deterministic given (data, task, hyper, seed)."""
    kind = LearnerKind(kind)
    task = Task(task)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_training_inputs(X, y)
    if task not in SUPPORTED_TASKS[kind]:
        raise LearnerError(f"{kind.value} does not support {task.value}")

    merged = dict(DEFAULT_HYPER[kind])
    merged.update(hyper or {})

    names = feature_names or tuple(f"f{i}" for i in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise DimensionMismatch("feature_names length does not match matrix width")
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    schema = FeatureSchema(names=tuple(names),
                           means=tuple(float(m) for m in means),
                           sds=tuple(float(s) for s in sds))
    Xs = schema.transform(X)

    classes: list[int] = []
    if task is Task.CLASSIFICATION:
        class_values = np.unique(y.astype(int))
        if len(class_values) < 2:
            raise DegenerateTarget("classification target has a single class")
        classes = [int(c) for c in class_values]
        lookup = {c: i for i, c in enumerate(classes)}
        y_enc = np.array([lookup[int(v)] for v in y], dtype=float)
    else:
        y_enc = y

    n_classes = len(classes)
    curve: list[tuple[int, float, float]] = []

    if kind in ITERATIVE_KINDS:
        fit_idx, val_idx = _fit_val_split(len(Xs), seed)
        X_fit, y_fit = Xs[fit_idx], y_enc[fit_idx]
        X_val, y_val = Xs[val_idx], y_enc[val_idx]
        if task is Task.CLASSIFICATION and len(np.unique(y_fit)) < n_classes:
            # the internal split must keep every class in the fit partition
            fit_idx, val_idx = np.arange(len(Xs)), np.arange(len(Xs))
            X_fit, y_fit, X_val, y_val = Xs, y_enc, Xs, y_enc
    else:
        X_fit, y_fit, X_val, y_val = Xs, y_enc, None, None

    if kind is LearnerKind.DECISION_TREE:
        if task is Task.REGRESSION:
            params = trees.fit_tree_regression(X_fit, y_fit, **merged)
        else:
            params = trees.fit_tree_classification(X_fit, y_fit.astype(int),
                                                   n_classes, **merged)
    elif kind is LearnerKind.RANDOM_FOREST:
        params = trees.fit_forest(X_fit, y_fit, task.value, n_classes, seed, **merged)
    elif kind is LearnerKind.GRADIENT_BOOSTED_TREES:
        params, curve = trees.fit_gbt(X_fit, y_fit, task.value, n_classes, seed,
                                      X_val=X_val, y_val=y_val, **merged)
    elif kind is LearnerKind.MLP:
        params, curve = nets.fit_mlp(X_fit, y_fit, task.value, n_classes, seed,
                                     X_val=X_val, y_val=y_val, **merged)
    elif kind is LearnerKind.MULTINOMIAL_LOGISTIC:
        params, curve = linear.fit_logistic(X_fit, y_fit, n_classes, seed,
                                            X_val=X_val, y_val=y_val, **merged)
    elif kind is LearnerKind.LINEAR_SVM:
        if task is Task.REGRESSION:
            params, curve = linear.fit_svm_regression(X_fit, y_fit, seed,
                                                      X_val=X_val, y_val=y_val,
                                                      **merged)
        else:
            merged.pop("epsilon", None)
            params, curve = linear.fit_svm_classification(X_fit, y_fit, n_classes,
                                                          seed, X_val=X_val,
                                                          y_val=y_val, **merged)
    elif kind is LearnerKind.KNN:
        params = simple.fit_knn(X_fit, y_fit, task.value, **merged)
    elif kind is LearnerKind.GAUSSIAN_NAIVE_BAYES:
        params = simple.fit_gaussian_nb(X_fit, y_fit, n_classes, **merged)
    else:  # pragma: no cover
        raise LearnerError(f"unhandled learner kind {kind}")

    train_meta = {
        "seed": int(seed),
        "hyper": _jsonable(merged),
        "data_hash": _data_hash(X, y),
        "classes": classes,
    }
    model = FittedModel(
        kind=kind,
        task=task,
        params=params,
        feature_schema=schema,
        loss_curve=tuple((int(r), float(a), float(b)) for r, a, b in curve),
        train_meta=train_meta,
    )
    # residual statistics on the training data: the unexplained-variability
    # summary that travels with the artifact
    fitted = predict(model, X)
    if task is Task.REGRESSION:
        train_meta["residual_sd"] = float(np.std(fitted - y))
    else:
        lookup = {c: i for i, c in enumerate(classes)}
        idx = np.array([lookup[int(v)] for v in y])
        picked = np.clip(fitted[np.arange(len(idx)), idx], 1e-12, None)
        train_meta["train_log_loss"] = float(-np.mean(np.log(picked)))
    return model


def predict(model: FittedModel, X: np.ndarray) -> np.ndarray:
    """Regression values (m,) or class probability rows (m, n_classes)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.feature_schema.names):
        raise SchemaMismatch(
            f"expected {len(model.feature_schema.names)} features, "
            f"got shape {X.shape}"
        )
    Xs = model.feature_schema.transform(X)
    kind, task = model.kind, model.task
    if kind is LearnerKind.DECISION_TREE:
        if task is Task.REGRESSION:
            return trees.tree_predict_regression(model.params, Xs)
        return trees.tree_predict_proba(model.params, Xs)
    if kind is LearnerKind.RANDOM_FOREST:
        return trees.forest_predict(model.params, Xs, task.value)
    if kind is LearnerKind.GRADIENT_BOOSTED_TREES:
        return trees.gbt_predict(model.params, Xs, task.value)
    if kind is LearnerKind.MLP:
        return nets.mlp_predict(model.params, Xs, task.value)
    if kind is LearnerKind.MULTINOMIAL_LOGISTIC:
        return linear.logistic_predict(model.params, Xs)
    if kind is LearnerKind.LINEAR_SVM:
        if task is Task.REGRESSION:
            return linear.svm_predict_regression(model.params, Xs)
        return linear.svm_predict_proba(model.params, Xs)
    if kind is LearnerKind.KNN:
        return simple.knn_predict(model.params, Xs, task.value,
                                  n_classes=len(model.classes))
    if kind is LearnerKind.GAUSSIAN_NAIVE_BAYES:
        return simple.gaussian_nb_predict(model.params, Xs)
    raise LearnerError(f"unhandled learner kind {kind}")  # pragma: no cover


def member_predictions(model: FittedModel, X: np.ndarray) -> np.ndarray:
    """Per-member predictions of an ensemble: (n_members, m[, n_classes])."""
    if model.kind is not LearnerKind.RANDOM_FOREST:
        raise LearnerError(f"{model.kind.value} has no ensemble members")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.feature_schema.names):
        raise SchemaMismatch(f"expected {len(model.feature_schema.names)} features")
    Xs = model.feature_schema.transform(X)
    return trees.forest_member_predictions(model.params, Xs, model.task.value)


def check_gradient(model: FittedModel, X: np.ndarray, y: np.ndarray,
                   epsilon: float = 1e-5, _corrupt_scale: float = 1.0) -> float:
    """Max relative error of the network's analytic gradient vs central differences."""
    if model.kind is not LearnerKind.MLP:
        raise LearnerError("gradient check applies to mlp models only")
    if epsilon <= 0:
        raise LearnerError("epsilon must be positive")
    X = np.asarray(X, dtype=float)
    Xs = model.feature_schema.transform(X)
    y = np.asarray(y, dtype=float)
    if model.task is Task.CLASSIFICATION:
        lookup = {c: i for i, c in enumerate(model.classes)}
        y = np.array([lookup[int(v)] for v in y], dtype=float)
    return nets.gradient_check(model.params, Xs, y, model.task.value,
                               epsilon=epsilon, grad_scale=_corrupt_scale)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def model_to_dict(model: FittedModel) -> dict:
    return {
        "format": "doselab-model",
        "schema_version": SCHEMA_VERSION,
        "kind": model.kind.value,
        "task": model.task.value,
        "feature_schema": model.feature_schema.to_dict(),
        "params": _jsonable(model.params),
        "loss_curve": [[r, tr, va] for r, tr, va in model.loss_curve],
        "train_meta": _jsonable(model.train_meta),
    }


def model_from_dict(payload: dict) -> FittedModel:
    if payload.get("format") != "doselab-model":
        raise CorruptArtifact("not a doselab model artifact")
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise VersionMismatch(
            f"artifact schema version {payload.get('schema_version')!r}, "
            f"this build reads {SCHEMA_VERSION}"
        )
    return FittedModel(
        kind=LearnerKind(payload["kind"]),
        task=Task(payload["task"]),
        params=payload["params"],
        feature_schema=FeatureSchema.from_dict(payload["feature_schema"]),
        loss_curve=tuple((int(r), float(a), float(b))
                         for r, a, b in payload["loss_curve"]),
        train_meta=payload["train_meta"],
    )


def serialize_model(model: FittedModel) -> bytes:
    """Canonical JSON bytes with an embedded payload checksum."""
    payload = model_to_dict(model)
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(body.encode()).hexdigest()
    return json.dumps({"payload": payload, "checksum": checksum},
                      sort_keys=True, separators=(",", ":")).encode()


def deserialize_model(data: bytes) -> FittedModel:
    try:
        wrapper = json.loads(data.decode())
        payload = wrapper["payload"]
        checksum = wrapper["checksum"]
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CorruptArtifact(f"unreadable model artifact: {exc}") from None
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if hashlib.sha256(body.encode()).hexdigest() != checksum:
        raise CorruptArtifact("model artifact failed its checksum")
    return model_from_dict(payload)


def grid_search(
    kind: LearnerKind,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: np.ndarray,
    y_test: np.ndarray,
    task: Task = Task.REGRESSION,
    seed: int = 0,
    grid: list[dict] | None = None,
) -> tuple[dict, FittedModel]:
    """Pick the best hyperparameters from a small grid scored on the test split.

    Regression is scored by RMSE, classification by error rate; ties keep the
    earliest grid entry.
    """
    best = None
    for overrides in grid if grid is not None else TUNING_GRID[LearnerKind(kind)]:
        model = train(kind, X_train, y_train, task=task, hyper=overrides, seed=seed)
        pred = predict(model, X_test)
        if Task(task) is Task.REGRESSION:
            score = float(np.sqrt(np.mean((pred - y_test) ** 2)))
        else:
            lookup = {c: i for i, c in enumerate(model.classes)}
            y_idx = np.array([lookup[int(v)] for v in y_test])
            score = float(np.mean(np.argmax(pred, axis=1) != y_idx))
        if best is None or score < best[0]:
            best = (score, overrides, model)
    return best[1], best[2]
