"""Per-track history fusion: the feature memory bank and confidence averaging.

Each track keeps two sliding windows of length ``n_hist``: recent regression
features weighted by their confidence, and recent (3D, 2D) confidence pairs.
A window length of zero disables history entirely.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FeatureEntry:
    frame: int
    feature: np.ndarray
    confidence: float


class FeatureMemory:
    """Ring buffer of confidence-weighted regression features."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self._entries: deque[FeatureEntry] = deque(maxlen=max(self.capacity, 0))

    def __len__(self) -> int:
        return len(self._entries) if self.capacity > 0 else 0

    def append(self, frame: int, feature: np.ndarray, confidence: float):
        if self.capacity <= 0:
            return
        if self._entries and frame <= self._entries[-1].frame:
            raise ValueError(f"feature memory frames must increase, got {frame}")
        feat = np.asarray(feature, dtype=float).copy()
        feat.setflags(write=False)
        self._entries.append(FeatureEntry(frame, feat, float(confidence)))

    def entries(self) -> list[FeatureEntry]:
        return list(self._entries)


class ConfidenceHistory:
    """Ring buffer of per-frame (3D, optional 2D) regression confidences."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self._entries: deque[tuple[float, float | None]] = deque(maxlen=max(self.capacity, 0))

    def __len__(self) -> int:
        return len(self._entries) if self.capacity > 0 else 0

    def append(self, conf_3d: float, conf_2d: float | None):
        if self.capacity <= 0:
            return
        self._entries.append((float(conf_3d), None if conf_2d is None else float(conf_2d)))

    def values_3d(self) -> list[float]:
        return [c for c, _ in self._entries]

    def values_2d(self) -> list[float]:
        return [c2 for _, c2 in self._entries if c2 is not None]


def historical_feature(memory: FeatureMemory) -> np.ndarray | None:
    """Confidence-weighted mean of the stored features; None when empty."""
    entries = memory.entries()
    if not entries:
        return None
    acc = np.zeros_like(entries[0].feature, dtype=float)
    for e in entries:
        acc += e.confidence * e.feature
    return acc / len(entries)


def blend_features(history_feature: np.ndarray, current_feature: np.ndarray,
                   current_conf: float) -> np.ndarray:
    """Convex blend (1 - s) * history + s * current, weighted by the raw confidence."""
    f_his = np.asarray(history_feature, dtype=float)
    f_cur = np.asarray(current_feature, dtype=float)
    if f_his.shape != f_cur.shape:
        raise ValueError(f"feature dimension mismatch: {f_his.shape} vs {f_cur.shape}")
    return (1.0 - current_conf) * f_his + current_conf * f_cur


def blend_and_score(history_feature: np.ndarray, current_feature: np.ndarray,
                    current_conf: float, head) -> float:
    """Score the history-blended feature with the oracle's confidence head."""
    return float(head(blend_features(history_feature, current_feature, current_conf)))


def fuse_conf_3d(history: ConfidenceHistory, current: float) -> float:
    """Mean of the stored 3D confidences and the current one."""
    values = history.values_3d()
    return (sum(values) + current) / (len(values) + 1)


def fuse_conf_2d(history: ConfidenceHistory, current: float) -> float:
    """Mean of the stored 2D confidences and the current one."""
    values = history.values_2d()
    return (sum(values) + current) / (len(values) + 1)


def fuse_final(conf_3d: float, conf_2d: float | None) -> float:
    """Final trajectory confidence; falls back to the 3D value when 2D is absent."""
    if conf_2d is None:
        return conf_3d
    return 0.5 * (conf_3d + conf_2d)
