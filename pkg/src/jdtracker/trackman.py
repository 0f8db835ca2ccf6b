"""Track lifecycle: birth from surviving detections, aging, 2D-rescued remotes.

A track is tentative until it collects ``min_hits`` hits, confirmed after,
and dead once its consecutive misses exceed ``max_age``. Output rows a track
accumulated while tentative are released retroactively at confirmation, so
early frames of a real object are not lost while one-frame noise never
surfaces.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .fusion import ConfidenceHistory, FeatureMemory
from .geometry import Box3D
from .motion import KalmanParams, KalmanState, kf_init
from .oracle import Detection

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"


@dataclass
class Track:
    track_id: int
    class_label: str
    kstate: KalmanState
    lifecycle: str = TENTATIVE
    hits: int = 1
    misses: int = 0
    feature_mem: FeatureMemory = field(default_factory=lambda: FeatureMemory(1))
    conf_hist: ConfidenceHistory = field(default_factory=lambda: ConfidenceHistory(1))
    last_regressed_box: Box3D | None = None
    last_conf: float = 0.0
    pending: list = field(default_factory=list)  # rows buffered while tentative

    @property
    def alive(self) -> bool:
        return self.lifecycle != DEAD


def spawn_tracks(new_detections: list[Detection], next_id: int, n_hist: int = 1,
                 min_hits: int = 3, kf_params: KalmanParams = KalmanParams()) -> list[Track]:
    """One tentative track per unsuppressed detection, ids strictly increasing.

    A detection feature, when present, seeds the track's memory bank weighted
    by the detection score.
    """
    tracks = []
    for det in new_detections:
        track = Track(next_id, det.class_label, kf_init(det.box3d, kf_params),
                      feature_mem=FeatureMemory(n_hist),
                      conf_hist=ConfidenceHistory(n_hist),
                      last_regressed_box=det.box3d, last_conf=det.score)
        if min_hits <= 1:
            track.lifecycle = CONFIRMED
        if det.feature is not None:
            track.feature_mem.append(det.source_frame, det.feature, det.score)
        tracks.append(track)
        next_id += 1
    return tracks


def step_lifecycle(track: Track, matched: bool, min_hits: int = 3, max_age: int = 2) -> Track:
    """Advance hit/miss counters and the lifecycle state for one frame."""
    if matched:
        track.hits += 1
        track.misses = 0
        if track.lifecycle == TENTATIVE and track.hits >= min_hits:
            track.lifecycle = CONFIRMED
    else:
        track.misses += 1
        if track.misses > max_age:
            track.lifecycle = DEAD
    return track


def postprocess_remote(track: Track, conf_2d: float | None, threshold: float) -> bool:
    """Keep a 3D-unmatched track alive on image evidence alone.

    When the track's 2D confidence reaches the threshold the frame counts as
    matched: misses are not incremented and the state is forced confirmed.
    Returns whether the rule fired; the caller feeds that into the lifecycle
    step as a match.
    """
    if conf_2d is None or conf_2d < threshold:
        return False
    track.lifecycle = CONFIRMED
    return True
