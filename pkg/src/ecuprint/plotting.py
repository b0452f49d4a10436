"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ConfusionMatrix
from .features import FEATURE_NAMES, FeatureDataset

_SAVE_KWARGS = {"dpi": 150, "metadata": {"Software": None}}


def plot_confusion_matrix(matrix: ConfusionMatrix, path, title="Confusion matrix") -> None:
    """Annotated heatmap, rows true / columns predicted."""
    n = matrix.classes.size
    fig, ax = plt.subplots(figsize=(0.7 * n + 2.5, 0.7 * n + 2))
    im = ax.imshow(matrix.counts, cmap="Blues")
    ax.set_xticks(range(n), [str(int(c)) for c in matrix.classes])
    ax.set_yticks(range(n), [str(int(c)) for c in matrix.classes])
    ax.set_xlabel("predicted ECU")
    ax.set_ylabel("true ECU")
    ax.set_title(title)
    vmax = matrix.counts.max() if matrix.counts.size else 1
    for i in range(n):
        for j in range(n):
            v = int(matrix.counts[i, j])
            if v:
                ax.text(j, i, str(v), ha="center", va="center", fontsize=8,
                        color="white" if v > 0.6 * vmax else "black")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def plot_ratio_separation(dataset: FeatureDataset, path) -> None:
    """Distribution of the mean inter-point ratio per ECU label."""
    classes = np.unique(dataset.labels)
    mean_idx = FEATURE_NAMES.index("mean")
    data = [dataset.X[dataset.labels == c, mean_idx] for c in classes]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.boxplot(data, tick_labels=[str(int(c)) for c in classes], showfliers=True)
    ax.set_xlabel("ECU")
    ax.set_ylabel("mean ratio per message")
    ax.set_title("Inter-point ratio separation by ECU")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def plot_class_f1(f1_by_class: dict[int, float], path, title="Per-ECU F1") -> None:
    classes = sorted(f1_by_class)
    values = [f1_by_class[c] for c in classes]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar([str(c) for c in classes], values, color="#3465a4")
    lo = min(values + [0.99])
    ax.set_ylim(max(0.0, lo - 0.01), 1.001)
    ax.set_xlabel("ECU")
    ax.set_ylabel("F1")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def plot_trace(trace_path, out_path, max_samples: int = 4000) -> None:
    """Render the start of an exported trace (both sampling points)."""
    t, va, vb = [], [], []
    with open(trace_path, "r", encoding="utf-8") as fh:
        next(fh)  # header
        for line in fh:
            parts = line.split(",")
            t.append(float(parts[0]))
            va.append(float(parts[1]))
            vb.append(float(parts[2]))
            if len(t) >= max_samples:
                break
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(np.asarray(t) * 1e6, va, label="SP_a", linewidth=0.8)
    ax.plot(np.asarray(t) * 1e6, vb, label="SP_b", linewidth=0.8)
    ax.set_xlabel("time (µs)")
    ax.set_ylabel("differential volts")
    ax.set_title("Two-point capture")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)
