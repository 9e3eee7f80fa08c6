import numpy as np
import pytest

from doselab.learners import (
    CLASSIFICATION_ONLY,
    CorruptArtifact,
    DegenerateTarget,
    DimensionMismatch,
    ITERATIVE_KINDS,
    LearnerKind,
    SchemaMismatch,
    SUPPORTED_TASKS,
    Task,
    VersionMismatch,
    check_gradient,
    deserialize_model,
    grid_search,
    member_predictions,
    model_to_dict,
    predict,
    serialize_model,
    train,
)

REG_KINDS = [k for k in LearnerKind if Task.REGRESSION in SUPPORTED_TASKS[k]]
ALL_KINDS = list(LearnerKind)

_SMALL_HYPER = {
    LearnerKind.RANDOM_FOREST: {"n_trees": 10},
    LearnerKind.GRADIENT_BOOSTED_TREES: {"n_rounds": 30},
    LearnerKind.MLP: {"epochs": 40},
    LearnerKind.LINEAR_SVM: {"epochs": 15},
    LearnerKind.MULTINOMIAL_LOGISTIC: {"epochs": 60},
}


def _regression_data(n=300, p=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = 2.0 * X[:, 0] - X[:, 1] ** 2 + 0.3 * X[:, 2] + rng.normal(0, 0.05, n)
    return X, y


def _classification_data(n=300, p=6, seed=0, n_classes=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = np.clip(np.floor(X[:, 0] + X[:, 1] + n_classes / 2), 0, n_classes - 1)
    return X, y.astype(int)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_determinism(kind):
    task = Task.CLASSIFICATION if kind in CLASSIFICATION_ONLY else Task.REGRESSION
    X, y = (_classification_data() if task is Task.CLASSIFICATION
            else _regression_data())
    hyper = _SMALL_HYPER.get(kind)
    a = train(kind, X, y, task=task, hyper=hyper, seed=42)
    b = train(kind, X, y, task=task, hyper=hyper, seed=42)
    assert serialize_model(a) == serialize_model(b)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_serialization_round_trip(kind):
    task = Task.CLASSIFICATION if kind in CLASSIFICATION_ONLY else Task.REGRESSION
    X, y = (_classification_data() if task is Task.CLASSIFICATION
            else _regression_data())
    model = train(kind, X, y, task=task, hyper=_SMALL_HYPER.get(kind), seed=1)
    restored = deserialize_model(serialize_model(model))
    assert np.array_equal(predict(restored, X), predict(model, X))


def test_truncated_artifact_rejected():
    X, y = _regression_data(50)
    model = train(LearnerKind.DECISION_TREE, X, y, seed=1)
    data = serialize_model(model)
    with pytest.raises(CorruptArtifact):
        deserialize_model(data[: len(data) // 2])


def test_bit_flip_fails_checksum():
    X, y = _regression_data(50)
    model = train(LearnerKind.DECISION_TREE, X, y, seed=1)
    data = bytearray(serialize_model(model))
    idx = data.index(b"0"[0], 200)
    data[idx] = b"1"[0]
    with pytest.raises(CorruptArtifact):
        deserialize_model(bytes(data))


def test_newer_schema_version_rejected():
    import json

    X, y = _regression_data(50)
    model = train(LearnerKind.DECISION_TREE, X, y, seed=1)
    payload = model_to_dict(model)
    payload["schema_version"] = 99
    import hashlib

    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    data = json.dumps({"payload": payload,
                       "checksum": hashlib.sha256(body.encode()).hexdigest()}).encode()
    with pytest.raises(VersionMismatch):
        deserialize_model(data)


class TestKnn:
    def test_one_nn_memorizes_training_targets(self):
        X, y = _regression_data(120)
        model = train(LearnerKind.KNN, X, y, hyper={"k": 1}, seed=0)
        assert np.array_equal(predict(model, X), y)

    def test_one_nn_classification_memorizes(self):
        X, y = _classification_data(120)
        model = train(LearnerKind.KNN, X, y, task=Task.CLASSIFICATION,
                      hyper={"k": 1}, seed=0)
        prob = predict(model, X)
        classes = np.array(model.classes)
        assert np.array_equal(classes[np.argmax(prob, axis=1)], y)


class TestLogistic:
    def test_separable_four_points(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]])
        y = np.array([0, 0, 1, 1])
        model = train(LearnerKind.MULTINOMIAL_LOGISTIC, X, y,
                      task=Task.CLASSIFICATION, seed=0)
        prob = predict(model, X)
        assert np.array_equal(np.argmax(prob, axis=1), y)

    def test_records_loss_curve(self):
        X, y = _classification_data()
        model = train(LearnerKind.MULTINOMIAL_LOGISTIC, X, y,
                      task=Task.CLASSIFICATION, seed=0)
        assert len(model.loss_curve) > 0


class TestTree:
    def test_unbounded_tree_memorizes_distinct_rows(self):
        X, y = _regression_data(150)
        model = train(LearnerKind.DECISION_TREE, X, y, seed=0)
        assert np.allclose(predict(model, X), y, atol=1e-12)

    def test_classification_pure_leaves(self):
        X, y = _classification_data(150)
        model = train(LearnerKind.DECISION_TREE, X, y, task=Task.CLASSIFICATION, seed=0)
        prob = predict(model, X)
        classes = np.array(model.classes)
        assert np.array_equal(classes[np.argmax(prob, axis=1)], y)


class TestForest:
    def test_single_tree_no_bootstrap_equals_decision_tree(self):
        X, y = _regression_data(200)
        hyper = {"max_depth": 8, "min_samples_leaf": 1}
        tree = train(LearnerKind.DECISION_TREE, X, y, hyper=hyper, seed=5)
        forest = train(LearnerKind.RANDOM_FOREST, X, y, seed=5,
                       hyper={"n_trees": 1, "bootstrap": False,
                              "max_features": 1.0, **hyper})
        assert np.array_equal(predict(tree, X), predict(forest, X))

    def test_member_predictions_shape(self):
        X, y = _regression_data(100)
        model = train(LearnerKind.RANDOM_FOREST, X, y, hyper={"n_trees": 7}, seed=2)
        members = member_predictions(model, X[:13])
        assert members.shape == (7, 13)
        acc = members[0].copy()
        for m in members[1:]:
            acc += m
        assert np.array_equal(acc / 7, predict(model, X[:13]))

    def test_members_unavailable_for_non_ensembles(self):
        X, y = _regression_data(60)
        model = train(LearnerKind.DECISION_TREE, X, y, seed=2)
        with pytest.raises(Exception):
            member_predictions(model, X)


class TestMlp:
    def test_fits_a_linear_function(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(0.0, 1.0, size=(200, 1))
        y = 2.0 * X[:, 0]
        model = train(LearnerKind.MLP, X, y, seed=4,
                      hyper={"hidden": (8,), "epochs": 2000, "lr": 0.1})
        rmse = float(np.sqrt(np.mean((predict(model, X) - y) ** 2)))
        assert rmse < 0.05

    @pytest.mark.parametrize("seed", list(range(10)))
    def test_gradient_check_under_threshold(self, seed):
        rng = np.random.default_rng(seed + 100)
        X = rng.normal(size=(20, 5))
        y = rng.normal(size=20)
        model = train(LearnerKind.MLP, X, y, seed=seed,
                      hyper={"hidden": (6,), "epochs": 3})
        assert check_gradient(model, X, y, epsilon=1e-5) < 1e-4

    def test_gradient_check_detects_corruption(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 5))
        y = rng.normal(size=20)
        model = train(LearnerKind.MLP, X, y, seed=1, hyper={"hidden": (6,), "epochs": 3})
        err = check_gradient(model, X, y, epsilon=1e-5, _corrupt_scale=2.0)
        assert err == pytest.approx(1.0, abs=0.05)

    def test_gradient_check_zero_network_zero_targets(self):
        X = np.zeros((10, 3))
        y = np.zeros(10)
        model = train(LearnerKind.MLP, X + 1e-9, y, seed=0,
                      hyper={"hidden": (4,), "epochs": 1})
        zeroed = dict(model.params)
        zeroed["theta"] = [0.0] * len(model.params["theta"])
        from dataclasses import replace

        model0 = replace(model, params=zeroed)
        assert check_gradient(model0, X, y, epsilon=1e-5) < 1e-8

    def test_classification_mode(self):
        X, y = _classification_data(200)
        model = train(LearnerKind.MLP, X, y, task=Task.CLASSIFICATION, seed=3,
                      hyper={"hidden": (16,), "epochs": 200})
        prob = predict(model, X)
        classes = np.array(model.classes)
        acc = np.mean(classes[np.argmax(prob, axis=1)] == y)
        assert acc > 0.8


class TestTrainLossMonotone:
    def test_mlp_default_steps(self):
        X, y = _regression_data(250, seed=6)
        model = train(LearnerKind.MLP, X, y, seed=6, hyper={"epochs": 120})
        losses = [tr for _, tr, _ in model.loss_curve]
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))

    def test_gbt_default_steps(self):
        X, y = _regression_data(250, seed=6)
        model = train(LearnerKind.GRADIENT_BOOSTED_TREES, X, y, seed=6,
                      hyper={"n_rounds": 60})
        losses = [tr for _, tr, _ in model.loss_curve]
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))

    def test_gbt_classification_monotone(self):
        X, y = _classification_data(250, seed=6)
        model = train(LearnerKind.GRADIENT_BOOSTED_TREES, X, y,
                      task=Task.CLASSIFICATION, seed=6, hyper={"n_rounds": 40})
        losses = [tr for _, tr, _ in model.loss_curve]
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_probability_rows_are_valid(kind):
    X, y = _classification_data(200, seed=8)
    model = train(kind, X, y, task=Task.CLASSIFICATION,
                  hyper=_SMALL_HYPER.get(kind), seed=8)
    prob = predict(model, X[:50])
    assert prob.shape == (50, len(model.classes))
    assert (prob >= 0).all()
    assert np.allclose(prob.sum(axis=1), 1.0, atol=1e-9)


def test_iterative_kinds_record_curves():
    X, y = _regression_data(100)
    Xc, yc = _classification_data(100)
    for kind in ITERATIVE_KINDS:
        task = Task.CLASSIFICATION if kind in CLASSIFICATION_ONLY else Task.REGRESSION
        data = (Xc, yc) if task is Task.CLASSIFICATION else (X, y)
        model = train(kind, *data, task=task, hyper=_SMALL_HYPER.get(kind), seed=0)
        assert len(model.loss_curve) > 0
        for _, tr, va in model.loss_curve:
            assert np.isfinite(tr) and np.isfinite(va)


class TestErrors:
    def test_degenerate_classification_target(self):
        X = np.random.default_rng(0).normal(size=(30, 3))
        with pytest.raises(DegenerateTarget):
            train(LearnerKind.GAUSSIAN_NAIVE_BAYES, X, np.zeros(30),
                  task=Task.CLASSIFICATION)

    def test_length_mismatch(self):
        X, y = _regression_data(40)
        with pytest.raises(DimensionMismatch):
            train(LearnerKind.DECISION_TREE, X, y[:-3])

    def test_nan_rejected(self):
        X, y = _regression_data(40)
        X[0, 0] = np.nan
        with pytest.raises(DimensionMismatch):
            train(LearnerKind.DECISION_TREE, X, y)

    def test_too_few_rows(self):
        with pytest.raises(DimensionMismatch):
            train(LearnerKind.DECISION_TREE, np.ones((1, 2)), np.ones(1))

    def test_classification_only_kinds_refuse_regression(self):
        X, y = _regression_data(40)
        for kind in CLASSIFICATION_ONLY:
            with pytest.raises(Exception):
                train(kind, X, y, task=Task.REGRESSION)

    def test_predict_schema_mismatch(self):
        X, y = _regression_data(40)
        model = train(LearnerKind.DECISION_TREE, X, y, seed=0)
        with pytest.raises(SchemaMismatch):
            predict(model, X[:, :3])


def test_grid_search_picks_from_grid():
    X, y = _regression_data(200, seed=9)
    hyper, model = grid_search(LearnerKind.DECISION_TREE, X[:150], y[:150],
                               X[150:], y[150:], task=Task.REGRESSION, seed=0)
    assert hyper in [{"max_depth": 6}, {"max_depth": 12}, {"max_depth": None}]
    assert model.kind is LearnerKind.DECISION_TREE


def test_train_meta_carries_residual_statistics():
    X, y = _regression_data(120)
    model = train(LearnerKind.DECISION_TREE, X, y, seed=0)
    assert model.train_meta["residual_sd"] == pytest.approx(0.0, abs=1e-9)
    rough = train(LearnerKind.DECISION_TREE, X, y, seed=0, hyper={"max_depth": 1})
    assert rough.train_meta["residual_sd"] > 0.1
    Xc, yc = _classification_data(120)
    clf = train(LearnerKind.GAUSSIAN_NAIVE_BAYES, Xc, yc, task=Task.CLASSIFICATION)
    assert clf.train_meta["train_log_loss"] >= 0.0
