"""Phase 2: reduce a ratio vector to the fixed 40-dimensional fingerprint.

Feature blocks, in the exact order of feature_names():

  A dispersion (10)  mean, median, std, variance, mad, rms, min, max,
                     peak_to_peak, iqr
  B shape (6)        skewness, kurtosis, p05, p25, p75, p95
  C energy (4)       sum_squares, mean_abs, log_energy, crest_factor
  D first diff (6)   diff_mean, diff_std, diff_rms, diff_max_abs,
                     zero_crossings, diff_mean_abs
  E peaks (14)       peak_count, valley_count, peak_height_mean/std,
                     valley_depth_mean/std, peak_width_mean/std,
                     valley_width_mean/std, peak_spacing_mean/std,
                     valley_spacing_mean/std

Conventions: std/variance are population moments; skewness/kurtosis are 0
for a constant signal (kurtosis is excess); crest_factor is 0 when RMS is
0; zero_crossings counts strict sign changes of the mean-removed signal.
A peak (valley) is a local extremum with prominence >= 0.5x the sample
std, width measured at half prominence; with fewer than two peaks
(valleys) the corresponding mean/std features are 0. Signals whose std
falls below 1e-9 x max(1, |mean|) count as constant: shape and extremum
features would otherwise chase accumulated rounding noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import InsufficientSignalError, ValidationError

FEATURE_NAMES: tuple[str, ...] = (
    # Block A: dispersion
    "mean", "median", "std", "variance", "mad", "rms", "min", "max",
    "peak_to_peak", "iqr",
    # Block B: shape
    "skewness", "kurtosis", "p05", "p25", "p75", "p95",
    # Block C: energy
    "sum_squares", "mean_abs", "log_energy", "crest_factor",
    # Block D: first differences
    "diff_mean", "diff_std", "diff_rms", "diff_max_abs",
    "zero_crossings", "diff_mean_abs",
    # Block E: peaks and valleys
    "peak_count", "valley_count",
    "peak_height_mean", "peak_height_std",
    "valley_depth_mean", "valley_depth_std",
    "peak_width_mean", "peak_width_std",
    "valley_width_mean", "valley_width_std",
    "peak_spacing_mean", "peak_spacing_std",
    "valley_spacing_mean", "valley_spacing_std",
)

N_FEATURES = len(FEATURE_NAMES)

# Feature indices invariant under sample shuffling (blocks A-C).
ORDER_INDEPENDENT = tuple(range(20))


def feature_names() -> list[str]:
    """The 40 feature identifiers, in dataset column order."""
    return list(FEATURE_NAMES)


def _extrema_stats(values, widths, positions):
    """count, mean/std value, mean/std width, mean/std spacing (zeros under 2)."""
    count = float(len(values))
    if len(values) < 2:
        return [count, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    spacing = np.diff(positions).astype(float)
    return [
        count,
        float(np.mean(values)), float(np.std(values)),
        float(np.mean(widths)), float(np.std(widths)),
        float(np.mean(spacing)), float(np.std(spacing)),
    ]


def extract_features(ratio: np.ndarray) -> np.ndarray:
    """Map a ratio vector to the 40 features (order per feature_names())."""
    x = np.asarray(ratio, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InsufficientSignalError(
            f"need at least 2 ratio samples, got {x.size}")

    mean = float(np.mean(x))
    centered = x - mean
    variance = float(np.mean(centered ** 2))
    std = float(np.sqrt(variance))
    rms = float(np.sqrt(np.mean(x ** 2)))
    xmin = float(np.min(x))
    xmax = float(np.max(x))
    p05, p25, median, p75, p95 = (float(v) for v in
                                  np.percentile(x, [5, 25, 50, 75, 95]))

    constant = std <= 1e-9 * max(1.0, abs(mean))
    if constant:
        skewness = 0.0
        kurt = 0.0
    else:
        # Population moments; kurtosis is excess (0 for a Gaussian).
        skewness = float(np.mean(centered ** 3) / std ** 3)
        kurt = float(np.mean(centered ** 4) / variance ** 2 - 3.0)

    sum_squares = float(np.sum(x ** 2))
    mean_abs = float(np.mean(np.abs(x)))
    log_energy = float(np.log(sum_squares + 1e-12))
    crest = xmax / rms if rms > 0 else 0.0

    d = np.diff(x)
    zero_crossings = float(np.count_nonzero(centered[:-1] * centered[1:] < 0))

    if constant:
        peak_block = [0.0] * 7
        valley_block = [0.0] * 7
    else:
        prominence = 0.5 * std
        peaks, pprops = find_peaks(x, prominence=prominence, width=0, rel_height=0.5)
        valleys, vprops = find_peaks(-x, prominence=prominence, width=0, rel_height=0.5)
        peak_block = _extrema_stats(x[peaks], pprops["widths"], peaks)
        valley_block = _extrema_stats(x[valleys], vprops["widths"], valleys)

    features = [
        mean, median, std, variance,
        float(np.mean(np.abs(centered))), rms, xmin, xmax,
        xmax - xmin, p75 - p25,
        skewness, kurt, p05, p25, p75, p95,
        sum_squares, mean_abs, log_energy, crest,
        float(np.mean(d)), float(np.std(d)),
        float(np.sqrt(np.mean(d ** 2))), float(np.max(np.abs(d))),
        zero_crossings, float(np.mean(np.abs(d))),
        peak_block[0], valley_block[0],
        peak_block[1], peak_block[2],
        valley_block[1], valley_block[2],
        peak_block[3], peak_block[4],
        valley_block[3], valley_block[4],
        peak_block[5], peak_block[6],
        valley_block[5], valley_block[6],
    ]
    return np.asarray(features, dtype=float)


@dataclass
class FeatureDataset:
    """One row per message: ECU label, observed MID, 40 features."""

    labels: np.ndarray
    mids: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.mids = np.asarray(self.mids, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=float).reshape(-1, N_FEATURES)
        if not (len(self.labels) == len(self.mids) == len(self.X)):
            raise ValidationError("labels, mids and X must have equal length")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "FeatureDataset":
        return FeatureDataset(self.labels[idx], self.mids[idx], self.X[idx])

    @classmethod
    def empty(cls) -> "FeatureDataset":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64),
                   np.empty((0, N_FEATURES)))


DATASET_HEADER = "ecu_label,mid," + ",".join(f"f{k:02d}" for k in range(N_FEATURES))


def write_dataset(dataset: FeatureDataset, path) -> None:
    """Write the dataset as delimited text with the canonical header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(DATASET_HEADER + "\n")
        for label, mid, row in zip(dataset.labels, dataset.mids, dataset.X):
            fh.write(f"{int(label)},{int(mid)},"
                     + ",".join(repr(float(v)) for v in row) + "\n")


def read_dataset(path) -> FeatureDataset:
    labels: list[int] = []
    mids: list[int] = []
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != DATASET_HEADER:
            raise ValidationError(f"unexpected dataset header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != N_FEATURES + 2:
                raise ValidationError(
                    f"{path}:{lineno}: expected {N_FEATURES + 2} columns, got {len(parts)}")
            labels.append(int(parts[0]))
            mids.append(int(parts[1]))
            rows.append([float(v) for v in parts[2:]])
    if not rows:
        return FeatureDataset.empty()
    return FeatureDataset(np.array(labels), np.array(mids), np.array(rows))
