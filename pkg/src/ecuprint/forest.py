"""Phase 3: random-forest ECU identification and masquerade verdicts.

The forest is implemented here rather than borrowed so that its exact
semantics are pinned: T trees on bootstrap resamples of size n, Gini
splits over ceil(sqrt(d)) features drawn per node, nodes grown until pure
or below min-samples-per-leaf, majority vote across trees with ties going
to the smallest label, and per-tree generators seeded seed+tree_index so
serial and parallel training build identical forests.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import TrainingError, ValidationError

BENIGN = "benign"
MASQUERADE_ALERT = "masquerade-alert"
UNKNOWN_MID = "unknown-mid"

_LEAF = -1


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 100
    min_samples_leaf: int = 1
    max_features: int | None = None  # None: ceil(sqrt(n_features))

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be at least 1")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be at least 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValidationError("max_features must be at least 1")


@dataclass
class DecisionTree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, n_classes) training-sample counts

    def __post_init__(self):
        # Majority class per node, ties to the smallest class index.
        self.vote = np.argmax(self.counts, axis=1)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    classes: np.ndarray
    hyperparams: ForestHyperparams
    seed: int
    n_features: int


def _best_split(X, y_idx, idx, feat_candidates, min_leaf, n_classes):
    """Lowest weighted-Gini split over the candidate features.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Returns (feature, threshold) or None when no feature admits a
    split that leaves min_leaf samples on each side.
    """
    n = idx.size
    total = np.bincount(y_idx[idx], minlength=n_classes).astype(float)
    best_score = np.inf
    best = None
    for f in feat_candidates:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        ys = y_idx[idx[order]]
        cuts = np.nonzero(vs[:-1] < vs[1:])[0]
        if min_leaf > 1:
            cuts = cuts[(cuts + 1 >= min_leaf) & (n - cuts - 1 >= min_leaf)]
        if cuts.size == 0:
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = 1.0
        cum = np.cumsum(onehot, axis=0)
        n_left = (cuts + 1).astype(float)
        left = cum[cuts]
        right = total[None, :] - left
        # n * weighted Gini, up to the constant n: smaller is purer.
        score = -((left ** 2).sum(axis=1) / n_left
                  + (right ** 2).sum(axis=1) / (n - n_left))
        j = int(np.argmin(score))
        if score[j] < best_score:
            best_score = score[j]
            best = (int(f), 0.5 * (float(vs[cuts[j]]) + float(vs[cuts[j] + 1])))
    return best


def _grow_tree(X, y_idx, boot_idx, n_classes, max_features, min_leaf, rng):
    n_features = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def alloc() -> int:
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        counts.append(None)
        return len(feature) - 1

    stack = [(alloc(), boot_idx)]
    while stack:
        node, idx = stack.pop()
        c = np.bincount(y_idx[idx], minlength=n_classes)
        counts[node] = c
        if np.count_nonzero(c) <= 1 or idx.size < 2 * min_leaf:
            continue
        cand = rng.choice(n_features, size=min(max_features, n_features),
                          replace=False)
        split = _best_split(X, y_idx, idx, cand, min_leaf, n_classes)
        if split is None:
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        lid = alloc()
        rid = alloc()
        feature[node] = f
        threshold[node] = thr
        left[node] = lid
        right[node] = rid
        # Pop order: left subtree first, keeping rng consumption in preorder.
        stack.append((rid, idx[~go_left]))
        stack.append((lid, idx[go_left]))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.vstack(counts).astype(np.int64),
    )


def train(X, y, hyperparams: ForestHyperparams | None = None, seed: int = 0) -> ForestModel:
    """Train a forest on labeled feature vectors; deterministic given seed."""
    hp = hyperparams or ForestHyperparams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise TrainingError("X must be (n_samples, n_features) matching y")
    n = X.shape[0]
    if n == 0:
        raise TrainingError("empty training set")
    classes, class_counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise TrainingError("training needs at least two classes")
    if class_counts.min() < 2:
        lonely = classes[class_counts.argmin()]
        raise TrainingError(f"class {lonely} has fewer than 2 samples")
    y_idx = np.searchsorted(classes, y)
    max_features = hp.max_features or math.ceil(math.sqrt(X.shape[1]))

    trees = []
    for t in range(hp.n_trees):
        rng = np.random.default_rng(seed + t)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X, y_idx, boot, classes.size, max_features,
                                hp.min_samples_leaf, rng))
    return ForestModel(trees=trees, classes=classes, hyperparams=hp,
                       seed=seed, n_features=X.shape[1])


def _apply_tree(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        f = tree.feature[node]
        active = np.flatnonzero(f != _LEAF)
        if active.size == 0:
            return node
        cur = node[active]
        go_left = X[active, f[active]] <= tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])


def predict(model: ForestModel, features):
    """Majority-vote label(s) and per-class vote fractions.

    1-D input returns (label, fractions); 2-D input returns arrays. Ties
    resolve to the smallest class label.
    """
    X = np.asarray(features, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValidationError(
            f"expected {model.n_features} features, got shape {X.shape}")
    votes = np.zeros((X.shape[0], model.classes.size), dtype=np.int64)
    for tree in model.trees:
        leaf = _apply_tree(tree, X)
        votes[np.arange(X.shape[0]), tree.vote[leaf]] += 1
    fractions = votes / len(model.trees)
    labels = model.classes[np.argmax(votes, axis=1)]
    if single:
        return int(labels[0]), fractions[0]
    return labels, fractions


@dataclass(frozen=True)
class Verdict:
    """Outcome of checking one message's predicted sender against its MID."""

    predicted_ecu: int
    claimed_ecu: int | None
    decision: str
    confidence: float  # vote fraction of the predicted class

    def __post_init__(self):
        if self.decision not in (BENIGN, MASQUERADE_ALERT, UNKNOWN_MID):
            raise ValidationError(f"unknown decision {self.decision!r}")


def detect_masquerade(model: ForestModel, features, observed_mid: int,
                      ownership: dict[int, int]) -> Verdict:
    """Compare the fingerprinted sender with the MID's registered owner."""
    label, fractions = predict(model, np.asarray(features, dtype=float))
    confidence = float(np.max(fractions))
    claimed = ownership.get(int(observed_mid))
    if claimed is None:
        return Verdict(label, None, UNKNOWN_MID, confidence)
    decision = BENIGN if label == claimed else MASQUERADE_ALERT
    return Verdict(label, int(claimed), decision, confidence)


def save_model(model: ForestModel, path) -> None:
    """Self-describing JSON persistence; reload preserves every prediction."""
    doc = {
        "format": "ecuprint-forest",
        "version": 1,
        "hyperparams": asdict(model.hyperparams),
        "seed": model.seed,
        "n_features": model.n_features,
        "classes": [int(c) for c in model.classes],
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "counts": tree.counts.tolist(),
            }
            for tree in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> ForestModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "ecuprint-forest":
        raise ValidationError(f"{path}: not an ecuprint forest model file")
    trees = [
        DecisionTree(
            feature=np.asarray(t["feature"], dtype=np.int64),
            threshold=np.asarray(t["threshold"], dtype=float),
            left=np.asarray(t["left"], dtype=np.int64),
            right=np.asarray(t["right"], dtype=np.int64),
            counts=np.asarray(t["counts"], dtype=np.int64),
        )
        for t in doc["trees"]
    ]
    return ForestModel(
        trees=trees,
        classes=np.asarray(doc["classes"], dtype=np.int64),
        hyperparams=ForestHyperparams(**doc["hyperparams"]),
        seed=int(doc["seed"]),
        n_features=int(doc["n_features"]),
    )
