"""Mutual-information leakage estimation and threshold adaptation.

The estimator is the plug-in (maximum likelihood) estimator over a joint
table of (saliency class, binned feature): each traffic feature is
discretized into equal-width bins over its sample range, MI is computed
from the empirical joint distribution, and the reported figure is the
maximum over features. Taking the max treats each feature as its own side
channel and bounds the strongest one; a joint-trace estimate would report
no more than this, so the figure errs on the conservative side.

Bin counts default to 4: at desk-scale sample sizes, finer bins inflate
plug-in MI estimates through sparse-cell bias.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientData
from .netw import TrafficTrace

__all__ = [
    "LeakageConfig",
    "LeakageReport",
    "AdaptAction",
    "FEATURE_NAMES",
    "trace_features",
    "estimate_mi",
    "leakage_check_and_adapt",
    "export_samples_csv",
]

FEATURE_NAMES = ("total_bytes", "packet_count", "mean_gap_ms")


@dataclass(frozen=True)
class LeakageConfig:
    epsilon: float = 0.25  # tolerable leakage budget, bits
    theta_step: float = 0.1  # threshold decrement on violation
    size_bins: int = 4
    time_bins: int = 4
    saliency_classes: int = 3
    window_frames: int = 30  # MI needs sample mass; adapt per window

    def validate(self) -> None:
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.theta_step <= 0:
            raise ConfigError("theta_step must be positive")
        if self.size_bins < 2 or self.time_bins < 2:
            raise ConfigError("bin counts must be >= 2")
        if self.saliency_classes < 2:
            raise ConfigError("need at least 2 saliency classes")
        if self.window_frames < 1:
            raise ConfigError("window_frames must be >= 1")


@dataclass(frozen=True)
class LeakageReport:
    mi_bits: float
    epsilon: float
    violated: bool
    per_feature: dict[str, float]
    sample_count: int


@dataclass(frozen=True)
class AdaptAction:
    """Stage-4 remediation: reshape under the tightened threshold and
    re-send the cubes whose saliency exceeds it."""

    new_theta: float


def trace_features(trace: TrafficTrace) -> tuple[float, float, float]:
    """(total_bytes, packet_count, mean inter-send gap in ms)."""
    n = trace.packet_count
    if n == 0:
        return (0.0, 0.0, 0.0)
    total = float(sum(length for length, _t in trace.records))
    if n == 1:
        return (total, 1.0, 0.0)
    times = [t for _l, t in trace.records]
    gaps = [b - a for a, b in zip(times, times[1:])]
    return (total, float(n), sum(gaps) / len(gaps))


def _bin_indices(values: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros(len(values), dtype=np.int64)
    idx = ((values - lo) / (hi - lo) * bins).astype(np.int64)
    return np.minimum(idx, bins - 1)


def _mi_from_joint(joint: np.ndarray) -> float:
    """MI in bits from a (classes x bins) count table."""
    total = joint.sum()
    if total == 0:
        return 0.0
    p = joint / total
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, p / (px @ py), 1.0)
        terms = np.where(p > 0, p * np.log2(ratio), 0.0)
    return float(max(0.0, terms.sum()))


def estimate_mi(
    samples: list[tuple[int, tuple[float, float, float]]],
    cfg: LeakageConfig = LeakageConfig(),
) -> LeakageReport:
    """Plug-in MI between saliency class and each traffic feature.

    ``samples`` holds (class_index, feature_vector) pairs, one per
    observed flow-frame. Classes must lie in [0, saliency_classes).
    """
    cfg.validate()
    if len(samples) < 2:
        raise InsufficientData(f"MI estimation needs >= 2 samples, got {len(samples)}")
    classes = np.array([c for c, _f in samples], dtype=np.int64)
    if classes.min() < 0 or classes.max() >= cfg.saliency_classes:
        raise ConfigError("class index outside [0, saliency_classes)")
    features = np.array([f for _c, f in samples], dtype=np.float64)
    bins_per_feature = (cfg.size_bins, cfg.size_bins, cfg.time_bins)

    per_feature: dict[str, float] = {}
    for col, (name, bins) in enumerate(zip(FEATURE_NAMES, bins_per_feature)):
        binned = _bin_indices(features[:, col], bins)
        joint = np.zeros((cfg.saliency_classes, bins), dtype=np.int64)
        np.add.at(joint, (classes, binned), 1)
        per_feature[name] = _mi_from_joint(joint)

    mi = max(per_feature.values())
    return LeakageReport(
        mi_bits=mi,
        epsilon=cfg.epsilon,
        violated=mi > cfg.epsilon,
        per_feature=per_feature,
        sample_count=len(samples),
    )


def leakage_check_and_adapt(
    report: LeakageReport, theta: float, cfg: LeakageConfig = LeakageConfig()
) -> tuple[float, AdaptAction | None]:
    """Tighten the shaping threshold when the leakage budget is violated.

    Returns (new_theta, action); theta never goes below 0 and never moves
    when the budget holds.
    """
    if not 0.0 <= theta <= 1.0:
        raise ConfigError("theta must be in [0, 1]")
    if not report.violated:
        return theta, None
    new_theta = max(0.0, theta - cfg.theta_step)
    if new_theta < 1e-12:  # snap float dust so the floor is exact
        new_theta = 0.0
    return new_theta, AdaptAction(new_theta=new_theta)


def export_samples_csv(
    path,
    samples: list[tuple[int, tuple[float, float, float]]],
    report: LeakageReport | None = None,
) -> None:
    """Write (class, features) samples and the report for offline analysis."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["class", *FEATURE_NAMES])
        for cls, feats in samples:
            w.writerow([cls, *feats])
        if report is not None:
            w.writerow([])
            w.writerow(["mi_bits", report.mi_bits])
            w.writerow(["epsilon", report.epsilon])
            w.writerow(["violated", int(report.violated)])
            for name, v in report.per_feature.items():
                w.writerow([f"mi_{name}", v])
