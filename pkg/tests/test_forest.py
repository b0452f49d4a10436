"""Random forest: determinism, voting, persistence, verdicts."""

import json

import numpy as np
import pytest

from ecuprint.errors import TrainingError, ValidationError
from ecuprint.forest import (
    BENIGN,
    MASQUERADE_ALERT,
    UNKNOWN_MID,
    DecisionTree,
    ForestHyperparams,
    ForestModel,
    detect_masquerade,
    load_model,
    predict,
    save_model,
    train,
)


def cluster_data(rng, n_per_class=40, n_classes=3, sep=10.0, sigma=1.0, d=6):
    """Well-separated Gaussian blobs: mean spacing sep x sigma."""
    X, y = [], []
    for c in range(n_classes):
        X.append(rng.normal(c * sep * sigma, sigma, size=(n_per_class, d)))
        y.append(np.full(n_per_class, c + 1))
    return np.vstack(X), np.concatenate(y)


def nearest_centroid_predict(X_train, y_train, X):
    classes = np.unique(y_train)
    centroids = np.vstack([X_train[y_train == c].mean(axis=0) for c in classes])
    dists = np.linalg.norm(X[:, None, :] - centroids[None, :, :], axis=2)
    return classes[np.argmin(dists, axis=1)]


class TestTrain:
    def test_empty_dataset_rejected(self):
        with pytest.raises(TrainingError):
            train(np.empty((0, 4)), np.empty(0, dtype=int))

    def test_single_class_rejected(self):
        X = np.random.default_rng(1).normal(size=(10, 4))
        with pytest.raises(TrainingError):
            train(X, np.full(10, 3))

    def test_undersized_class_rejected(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(5, 4))
        with pytest.raises(TrainingError):
            train(X, np.array([1, 1, 1, 1, 2]))

    def test_separated_clusters_memorized(self):
        rng = np.random.default_rng(3)
        X, y = cluster_data(rng)
        # Independent separability oracle first: nearest centroid is perfect.
        assert np.array_equal(nearest_centroid_predict(X, y, X), y)
        model = train(X, y, ForestHyperparams(n_trees=25), seed=7)
        pred, fractions = predict(model, X)
        assert np.array_equal(pred, y)
        assert np.allclose(fractions.sum(axis=1), 1.0)

    def test_deterministic_per_seed(self, tmp_path):
        rng = np.random.default_rng(4)
        X, y = cluster_data(rng, sep=3.0)
        a = train(X, y, ForestHyperparams(n_trees=10), seed=11)
        b = train(X, y, ForestHyperparams(n_trees=10), seed=11)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        save_model(a, pa)
        save_model(b, pb)
        assert pa.read_bytes() == pb.read_bytes()
        c = train(X, y, ForestHyperparams(n_trees=10), seed=12)
        pc = tmp_path / "c.json"
        save_model(c, pc)
        assert pa.read_bytes() != pc.read_bytes()

    def test_per_tree_seeding_gives_prefix_property(self):
        rng = np.random.default_rng(5)
        X, y = cluster_data(rng, sep=3.0)
        small = train(X, y, ForestHyperparams(n_trees=3), seed=21)
        big = train(X, y, ForestHyperparams(n_trees=6), seed=21)
        for ts, tb in zip(small.trees, big.trees):
            assert np.array_equal(ts.feature, tb.feature)
            assert np.array_equal(ts.threshold, tb.threshold)
            assert np.array_equal(ts.counts, tb.counts)

    def test_min_samples_leaf_respected(self):
        rng = np.random.default_rng(6)
        X, y = cluster_data(rng, sep=1.0, n_per_class=30)
        model = train(X, y, ForestHyperparams(n_trees=5, min_samples_leaf=5), seed=2)
        for tree in model.trees:
            leaves = tree.feature == -1
            assert tree.counts[leaves].sum(axis=1).min() >= 5


class TestPredict:
    def test_wrong_dimensionality_rejected(self):
        rng = np.random.default_rng(7)
        X, y = cluster_data(rng)
        model = train(X, y, ForestHyperparams(n_trees=5), seed=1)
        with pytest.raises(ValidationError):
            predict(model, np.zeros(5))

    def test_exact_tie_breaks_to_smaller_label(self):
        # Two hand-built stumps: one always votes class 2, one class 7.
        leaf2 = DecisionTree(feature=np.array([-1]), threshold=np.array([0.0]),
                             left=np.array([-1]), right=np.array([-1]),
                             counts=np.array([[5, 0]]))
        leaf7 = DecisionTree(feature=np.array([-1]), threshold=np.array([0.0]),
                             left=np.array([-1]), right=np.array([-1]),
                             counts=np.array([[0, 5]]))
        model = ForestModel(trees=[leaf2, leaf7], classes=np.array([2, 7]),
                            hyperparams=ForestHyperparams(n_trees=2), seed=0,
                            n_features=3)
        label, fractions = predict(model, np.zeros(3))
        assert label == 2
        assert np.allclose(fractions, [0.5, 0.5])

    def test_vote_fractions_sum_to_one(self):
        rng = np.random.default_rng(8)
        X, y = cluster_data(rng, sep=0.5)  # overlapping: votes split
        model = train(X, y, ForestHyperparams(n_trees=30), seed=3)
        _, fractions = predict(model, rng.normal(size=(50, 6)))
        assert np.allclose(fractions.sum(axis=1), 1.0)


class TestPersistence:
    def test_reload_reproduces_predictions(self, tmp_path):
        rng = np.random.default_rng(9)
        X, y = cluster_data(rng, sep=2.0)
        model = train(X, y, seed=5)
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        probe = rng.normal(2.0, 5.0, size=(200, 6))
        pred_a, frac_a = predict(model, probe)
        pred_b, frac_b = predict(back, probe)
        assert np.array_equal(pred_a, pred_b)
        assert np.array_equal(frac_a, frac_b)
        # And a rewrite is byte-identical.
        path2 = tmp_path / "model2.json"
        save_model(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_model_file_is_self_describing(self, tmp_path):
        rng = np.random.default_rng(10)
        X, y = cluster_data(rng)
        model = train(X, y, ForestHyperparams(n_trees=4), seed=6)
        path = tmp_path / "model.json"
        save_model(model, path)
        doc = json.loads(path.read_text())
        assert doc["format"] == "ecuprint-forest"
        assert doc["hyperparams"]["n_trees"] == 4
        assert doc["seed"] == 6
        assert doc["classes"] == [1, 2, 3]
        tree = doc["trees"][0]
        for key in ("feature", "threshold", "left", "right", "counts"):
            assert key in tree

    def test_foreign_file_rejected(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(ValidationError):
            load_model(path)


class TestDetectMasquerade:
    @pytest.fixture()
    def model_and_data(self):
        rng = np.random.default_rng(11)
        X, y = cluster_data(rng, n_classes=4)
        model = train(X, y, ForestHyperparams(n_trees=15), seed=4)
        return model, X, y

    def test_benign_match(self, model_and_data):
        model, X, y = model_and_data
        ownership = {10: 1, 20: 2, 30: 3, 40: 4}
        verdict = detect_masquerade(model, X[0], 10, ownership)
        assert verdict.decision == BENIGN
        assert verdict.predicted_ecu == 1
        assert verdict.claimed_ecu == 1

    def test_mismatch_alerts(self, model_and_data):
        model, X, y = model_and_data
        ownership = {10: 1, 20: 2}
        # Feature vector of ECU 2, claimed MID owned by ECU 1.
        idx = int(np.flatnonzero(y == 2)[0])
        verdict = detect_masquerade(model, X[idx], 10, ownership)
        assert verdict.decision == MASQUERADE_ALERT
        assert verdict.predicted_ecu == 2
        assert verdict.claimed_ecu == 1

    def test_unknown_mid(self, model_and_data):
        model, X, _ = model_and_data
        verdict = detect_masquerade(model, X[0], 0x7FF, {10: 1})
        assert verdict.decision == UNKNOWN_MID
        assert verdict.claimed_ecu is None

    def test_alert_iff_mismatch(self, model_and_data):
        model, X, y = model_and_data
        ownership = {100 + c: c for c in (1, 2, 3, 4)}
        rng = np.random.default_rng(12)
        for _ in range(60):
            i = int(rng.integers(0, len(X)))
            mid = int(rng.choice([101, 102, 103, 104, 999]))
            verdict = detect_masquerade(model, X[i], mid, ownership)
            claimed = ownership.get(mid)
            if claimed is None:
                assert verdict.decision == UNKNOWN_MID
            elif verdict.predicted_ecu == claimed:
                assert verdict.decision == BENIGN
            else:
                assert verdict.decision == MASQUERADE_ALERT
