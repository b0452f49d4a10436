"""Metrics and experiment mechanics: confusion matrices, P/R/F1, splits,
stratified k-fold cross-validation and attack-campaign scoring.

Zero-denominator convention: precision or recall of 0/0 is 0, and F1 is 0
when P + R == 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import FeatureDataset
from .forest import (
    ForestHyperparams,
    ForestModel,
    predict,
    train,
)


@dataclass
class ConfusionMatrix:
    """Rows: true label, columns: predicted label, in ``classes`` order."""

    classes: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.classes.size, self.classes.size):
            raise ValidationError("counts must be square over the class list")
        if (self.counts < 0).any():
            raise ValidationError("counts must be nonnegative")

    def index_of(self, label: int) -> int:
        pos = np.searchsorted(self.classes, label)
        if pos >= self.classes.size or self.classes[pos] != label:
            raise ValidationError(f"class {label} not present in matrix")
        return int(pos)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(y_true, y_pred, classes=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValidationError("true and predicted label sequences differ in length")
    if classes is None:
        classes = np.union1d(y_true, y_pred)
    classes = np.asarray(classes, dtype=np.int64)
    lookup = {int(c): i for i, c in enumerate(classes)}
    counts = np.zeros((classes.size, classes.size), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        try:
            counts[lookup[int(t)], lookup[int(p)]] += 1
        except KeyError as exc:
            raise ValidationError(f"label {exc.args[0]} not in class list") from exc
    return ConfusionMatrix(classes, counts)


def precision_recall_f1(matrix: ConfusionMatrix, label: int) -> tuple[float, float, float]:
    i = matrix.index_of(label)
    tp = float(matrix.counts[i, i])
    fp = float(matrix.counts[:, i].sum() - tp)
    fn = float(matrix.counts[i, :].sum() - tp)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def macro_f1(matrix: ConfusionMatrix) -> float:
    if matrix.classes.size == 0:
        raise ValidationError("empty confusion matrix")
    return float(np.mean([precision_recall_f1(matrix, int(c))[2]
                          for c in matrix.classes]))


@dataclass
class EvalReport:
    """Per-class and macro metrics for one evaluation."""

    matrix: ConfusionMatrix
    precision: dict[int, float]
    recall: dict[int, float]
    f1: dict[int, float]
    macro_f1: float
    split: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "seed": self.seed,
            "macro_f1": self.macro_f1,
            "per_class": {
                str(c): {
                    "precision": self.precision[c],
                    "recall": self.recall[c],
                    "f1": self.f1[c],
                }
                for c in map(int, self.matrix.classes)
            },
            "classes": [int(c) for c in self.matrix.classes],
            "confusion": self.matrix.counts.tolist(),
        }


def build_report(y_true, y_pred, classes=None, split: str = "", seed: int = 0) -> EvalReport:
    matrix = confusion_matrix(y_true, y_pred, classes)
    precision, recall, f1 = {}, {}, {}
    for c in map(int, matrix.classes):
        precision[c], recall[c], f1[c] = precision_recall_f1(matrix, c)
    return EvalReport(matrix=matrix, precision=precision, recall=recall, f1=f1,
                      macro_f1=float(np.mean(list(f1.values()))),
                      split=split, seed=seed)


def _class_indices(labels: np.ndarray) -> list[tuple[int, np.ndarray]]:
    classes = np.unique(labels)
    return [(int(c), np.flatnonzero(labels == c)) for c in classes]


def train_test_split(labels, train_fraction: float, stratified: bool = True,
                     seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint, exhaustive index split; train size is floor(fraction * n).

    Stratified mode preserves per-class proportions to within one sample
    (largest-remainder allocation, remainder ties to the smaller label).
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if not 0 < train_fraction < 1:
        raise ValidationError("train_fraction must be in (0, 1)")
    if n == 0:
        raise ValidationError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    n_train = int(np.floor(train_fraction * n + 1e-9))

    if not stratified:
        perm = rng.permutation(n)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])

    per_class = _class_indices(labels)
    base = []
    remainders = []
    for c, idx in per_class:
        exact = train_fraction * idx.size
        b = int(np.floor(exact + 1e-9))
        base.append(b)
        remainders.append(exact - b)
    shortfall = n_train - sum(base)
    order = sorted(range(len(per_class)),
                   key=lambda i: (-remainders[i], per_class[i][0]))
    for i in order[:max(shortfall, 0)]:
        base[i] += 1

    train_parts, test_parts = [], []
    for (c, idx), take in zip(per_class, base):
        if take < 1:
            raise ValidationError(
                f"class {c} would get no training samples at fraction {train_fraction}")
        perm = idx[rng.permutation(idx.size)]
        train_parts.append(perm[:take])
        test_parts.append(perm[take:])
    return (np.sort(np.concatenate(train_parts)),
            np.sort(np.concatenate(test_parts)))


def stratified_kfold(labels, k: int, seed: int = 0) -> list[np.ndarray]:
    """k disjoint folds; per-class counts differ by at most one across folds."""
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValidationError("k must be at least 2")
    rng = np.random.default_rng(seed)
    folds: list[list[np.ndarray]] = [[] for _ in range(k)]
    for ci, (c, idx) in enumerate(_class_indices(labels)):
        if idx.size < k:
            raise ValidationError(f"class {c} has {idx.size} samples, fewer than k={k}")
        perm = idx[rng.permutation(idx.size)]
        # Rotate the starting fold per class so fold sizes stay balanced.
        for j in range(k):
            folds[(j + ci) % k].append(perm[j::k])
    return [np.sort(np.concatenate(parts)) for parts in folds]


@dataclass
class CvResult:
    fold_reports: list[EvalReport]
    pooled: EvalReport


def cross_validate(dataset: FeatureDataset, k: int, seed: int = 0,
                   hyperparams: ForestHyperparams | None = None) -> CvResult:
    """Stratified k-fold loop: train on k-1 folds, test on the held-out one.

    Fold i trains its forest with seed ``seed + i`` so folds can run in any
    order (or in parallel) with identical results.
    """
    folds = stratified_kfold(dataset.labels, k, seed)
    fold_reports = []
    pooled_true: list[np.ndarray] = []
    pooled_pred: list[np.ndarray] = []
    all_idx = np.arange(len(dataset))
    for i, held_out in enumerate(folds):
        train_idx = np.setdiff1d(all_idx, held_out, assume_unique=True)
        model = train(dataset.X[train_idx], dataset.labels[train_idx],
                      hyperparams, seed=seed + i)
        pred, _ = predict(model, dataset.X[held_out])
        truth = dataset.labels[held_out]
        fold_reports.append(build_report(truth, pred, classes=model.classes,
                                         split=f"fold {i + 1}/{k}", seed=seed + i))
        pooled_true.append(truth)
        pooled_pred.append(pred)
    pooled = build_report(np.concatenate(pooled_true), np.concatenate(pooled_pred),
                          split=f"stratified {k}-fold (pooled)", seed=seed)
    return CvResult(fold_reports=fold_reports, pooled=pooled)


def score_attack_campaign(model: ForestModel, attack_set: FeatureDataset,
                          ownership: dict[int, int]) -> tuple[EvalReport, float]:
    """Classify an attack stream and measure how often it raises alerts.

    The report's matrix tallies true transmitter (the attacker) against
    the predicted ECU; alert rate is the fraction of messages whose
    predicted ECU differs from the observed MID's registered owner.
    """
    if len(attack_set) == 0:
        raise ValidationError("attack stream is empty")
    pred, _ = predict(model, attack_set.X)
    classes = np.union1d(model.classes, attack_set.labels)
    report = build_report(attack_set.labels, pred, classes=classes,
                          split="attack campaign", seed=0)
    claimed = np.array([ownership.get(int(m), -1) for m in attack_set.mids])
    alerts = (claimed != -1) & (pred != claimed)
    return report, float(np.mean(alerts))


def write_report(report: EvalReport, path, config_hash: str | None = None,
                 extra: dict | None = None, timestamp: bool = False) -> None:
    """Structured text report: metrics plus provenance (seed, config hash)."""
    doc = report.to_dict()
    if config_hash is not None:
        doc["config_hash"] = config_hash
    if extra:
        doc.update(extra)
    if timestamp:
        import datetime

        doc["generated_at"] = datetime.datetime.now().isoformat()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_matrix_csv(matrix: ConfusionMatrix, path) -> None:
    """Tabular confusion matrix: first column true label, then predictions."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("true_label," + ",".join(f"pred_{int(c)}" for c in matrix.classes) + "\n")
        for i, c in enumerate(matrix.classes):
            fh.write(f"{int(c)}," + ",".join(str(int(v)) for v in matrix.counts[i]) + "\n")
