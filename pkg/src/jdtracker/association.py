"""Confidence-ordered joint NMS over regressed trajectories and fresh detections.

Suppression of a detection by a surviving trajectory is the data association:
the trajectory absorbs its best-overlapping suppressed detection as the frame
measurement. Detections that survive unsuppressed seed new tracks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Box3D, iou_bev

KIND_TRACK = "trajectory"
KIND_DETECTION = "detection"
ORDERS = ("descending", "ascending", "unordered")


@dataclass(frozen=True)
class NmsCandidate:
    box: Box3D
    score: float
    kind: str
    ref: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"candidate score {self.score} outside [0, 1]")
        if self.kind not in (KIND_TRACK, KIND_DETECTION):
            raise ValueError(f"unknown candidate kind {self.kind!r}")


@dataclass
class NmsOutcome:
    """Partition of the inputs: every candidate lands in exactly one bucket."""

    surviving_tracks: dict[int, int | None] = field(default_factory=dict)
    new_detections: list[int] = field(default_factory=list)
    suppressed_tracks: list[int] = field(default_factory=list)
    suppressed_detections: list[int] = field(default_factory=list)

    @property
    def absorbed_detections(self) -> set[int]:
        return {d for d in self.surviving_tracks.values() if d is not None}


def _order_key(candidate: NmsCandidate):
    kind_rank = 0 if candidate.kind == KIND_TRACK else 1
    return (candidate.score, -kind_rank, -candidate.ref)


def joint_nms(candidates: list[NmsCandidate], iou_threshold: float,
              order: str = "descending", iou_fn=iou_bev) -> NmsOutcome:
    """Greedy suppression over one frame's trajectories and detections.

    ``order`` selects the processing sequence: by score descending or
    ascending (ties prefer trajectories, then lower ref), or the raw input
    sequence (``unordered``). A surviving trajectory absorbs the suppressed
    detection it overlaps most.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside [0, 1]")
    if order not in ORDERS:
        raise ValueError(f"unknown NMS order {order!r}")

    indexed = list(enumerate(candidates))
    if order == "descending":
        indexed.sort(key=lambda ic: _order_key(ic[1]), reverse=True)
    elif order == "ascending":
        indexed.sort(key=lambda ic: (_order_key(ic[1])[0], ic[1].kind == KIND_DETECTION, ic[1].ref))

    suppressed_by: dict[int, int] = {}
    overlap_with_suppressor: dict[int, float] = {}
    survivors: list[int] = []
    for pos, (idx, cand) in enumerate(indexed):
        if idx in suppressed_by:
            continue
        survivors.append(idx)
        for jdx, other in indexed[pos + 1:]:
            if jdx in suppressed_by:
                continue
            overlap = iou_fn(cand.box, other.box)
            if overlap >= iou_threshold:
                suppressed_by[jdx] = idx
                overlap_with_suppressor[jdx] = overlap

    outcome = NmsOutcome()
    for idx in survivors:
        cand = candidates[idx]
        if cand.kind == KIND_DETECTION:
            outcome.new_detections.append(cand.ref)
            continue
        absorbed = None
        best = -1.0
        for jdx, suppressor in suppressed_by.items():
            if suppressor != idx or candidates[jdx].kind != KIND_DETECTION:
                continue
            ov = overlap_with_suppressor[jdx]
            ref = candidates[jdx].ref
            if ov > best or (ov == best and (absorbed is None or ref < absorbed)):
                best = ov
                absorbed = ref
        outcome.surviving_tracks[cand.ref] = absorbed

    for idx, suppressor in suppressed_by.items():
        cand = candidates[idx]
        if cand.kind == KIND_TRACK:
            outcome.suppressed_tracks.append(cand.ref)
            continue
        sup = candidates[suppressor]
        if sup.kind == KIND_TRACK and outcome.surviving_tracks.get(sup.ref) == cand.ref:
            continue  # absorbed: already recorded with its trajectory
        outcome.suppressed_detections.append(cand.ref)
    outcome.suppressed_tracks.sort()
    outcome.suppressed_detections.sort()
    outcome.new_detections.sort()
    return outcome
