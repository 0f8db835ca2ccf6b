"""Regression oracles: the pluggable stand-ins for two-stage detector heads.

An oracle answers proposal queries for one frame: refined box, regression
confidence in [0, 1], and optionally a feature vector. Two families ship:

* replay oracles answer from precomputed per-frame detection tables via an
  overlap-weighted proxy rule (confidence = stored score x IoU);
* synthetic oracles answer from a simulated world, scoring proposals by the
  matched object's visibility.

All oracles are seeded and pure given (inputs, seed, stored data).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Box2D, Box3D, CameraCalib, FRAME_EGO, iou_2d, iou_bev
from .motion import EgoPose
from .rng import substream

FLOOR_CONFIDENCE = 0.05
MATCH_MIN_IOU = 0.1
REFINE_MIN_DETECTABILITY = 0.1


@dataclass(frozen=True)
class Detection:
    """One 3D detector output in the ego frame of its source frame."""

    box3d: Box3D
    score: float
    feature: np.ndarray | None = None
    source_frame: int = 0
    class_label: str = "Car"

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class OracleResponse:
    refined_box: Box3D | None
    confidence: float
    feature: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"oracle confidence {self.confidence} outside [0, 1]")


@dataclass
class FramePacket:
    """Everything the pipeline needs about one frame."""

    frame_index: int
    ego_pose: EgoPose
    calib: CameraCalib
    detections: list[Detection] = field(default_factory=list)
    image_size: tuple[int, int] = (1242, 375)
    truth_handle: object | None = None


def _check_proposal_frames(proposals: list[Box3D]):
    for box in proposals:
        if box.frame_id != FRAME_EGO:
            raise ValueError(f"proposal not in ego frame: {box.frame_id}")


class ReplayOracle3D:
    """Answers proposals from a stored detection table.

    A proposal is matched to the stored detection it overlaps most in BEV;
    below ``min_iou`` it gets the floor confidence and passes through
    unrefined. Replay tables carry no features.
    """

    def __init__(self, table: dict[int, list[Detection]],
                 floor: float = FLOOR_CONFIDENCE, min_iou: float = MATCH_MIN_IOU):
        self.table = table
        self.floor = floor
        self.min_iou = min_iou
        self.head = None

    def regress(self, proposals: list[Box3D], ctx: FramePacket) -> list[OracleResponse]:
        _check_proposal_frames(proposals)
        stored = self.table.get(ctx.frame_index, [])
        out = []
        for box in proposals:
            best, best_iou = None, 0.0
            for det in stored:
                ov = iou_bev(box, det.box3d)
                if ov > best_iou:
                    best, best_iou = det, ov
            if best is None or best_iou < self.min_iou:
                out.append(OracleResponse(box, self.floor, None))
            else:
                conf = min(1.0, best.score * best_iou)
                out.append(OracleResponse(best.box3d, conf, None))
        return out


class ReplayOracle2D:
    """Scores 2D proposals against a stored table of image-plane detections."""

    def __init__(self, table: dict[int, list[tuple[float, Box2D]]],
                 floor: float = FLOOR_CONFIDENCE, min_iou: float = MATCH_MIN_IOU):
        self.table = table
        self.floor = floor
        self.min_iou = min_iou

    def score(self, proposals: list[Box2D], ctx: FramePacket) -> list[float]:
        stored = self.table.get(ctx.frame_index, [])
        out = []
        for box in proposals:
            best = 0.0
            for score, sbox in stored:
                ov = iou_2d(box, sbox)
                if ov >= self.min_iou:
                    best = max(best, score * ov)
            out.append(best if best > 0 else self.floor)
        return out


def norm_clamp_head(feature: np.ndarray) -> float:
    """Synthetic confidence head: clamp(||f||, 0, 1)."""
    return float(min(max(np.linalg.norm(np.asarray(feature, dtype=float)), 0.0), 1.0))


@dataclass(frozen=True)
class SyntheticOracleParams:
    feature_dim: int = 8
    feature_sigma: float = 0.02
    floor: float = FLOOR_CONFIDENCE
    min_iou: float = MATCH_MIN_IOU
    refine_min: float = REFINE_MIN_DETECTABILITY


class SyntheticOracle3D:
    """Scores proposals against the simulated world behind the packet.

    A proposal matched to a ground-truth object receives feature
    f = d * e + eta, where d is the object's detectability (visible fraction
    scaled by range falloff), e its fixed unit embedding, and eta Gaussian
    noise; the confidence is clamp(||f||, 0, 1). With zero noise the
    confidence equals the detectability exactly. The refined box snaps to the
    ground truth only while the object is detectable enough to localize.
    """

    def __init__(self, params: SyntheticOracleParams = SyntheticOracleParams(), seed: int = 0):
        self.params = params
        self.seed = seed

    def head(self, feature: np.ndarray) -> float:
        f = np.asarray(feature, dtype=float)
        if f.shape != (self.params.feature_dim,):
            raise ValueError(f"feature dim {f.shape} != {(self.params.feature_dim,)}")
        return norm_clamp_head(f)

    def _noise(self, frame: int, index: int) -> np.ndarray:
        if self.params.feature_sigma == 0.0:
            return np.zeros(self.params.feature_dim)
        rng = substream(self.seed, 101, frame, index)
        return self.params.feature_sigma * rng.standard_normal(self.params.feature_dim)

    def regress(self, proposals: list[Box3D], ctx: FramePacket) -> list[OracleResponse]:
        _check_proposal_frames(proposals)
        world = ctx.truth_handle
        if world is None:
            raise ValueError("synthetic oracle needs a truth handle on the packet")
        truth = world.gt_states(ctx.frame_index)
        out = []
        for i, box in enumerate(proposals):
            best, best_iou = None, 0.0
            for state in truth:
                ov = iou_bev(box, state.box_ego)
                if ov > best_iou:
                    best, best_iou = state, ov
            eta = self._noise(ctx.frame_index, i)
            if best is None or best_iou < self.params.min_iou:
                out.append(OracleResponse(box, self.params.floor, eta))
                continue
            feature = best.detectability * world.embedding(best.obj_id) + eta
            conf = norm_clamp_head(feature)
            refined = best.box_ego if best.detectability >= self.params.refine_min else box
            out.append(OracleResponse(refined, conf, feature))
        return out


class SyntheticOracle2D:
    """Image-plane confidence from the simulated world.

    The score is the matched object's visible fraction in the image (the
    in-image part of its projected box, reduced by the portion covered by
    projections of strictly nearer bodies), weighted by how well the proposal
    fits that projection: full credit for a snug proposal, sharply less below
    0.6 overlap, nothing at 0.25. Nearer objects are never penalized by
    farther ones, and the measure is range-independent, so remote objects
    keep high 2D confidence while their 3D evidence fades.
    """

    FIT_ZERO = 0.25
    FIT_FULL = 0.6

    def __init__(self, floor: float = FLOOR_CONFIDENCE, min_iou: float = MATCH_MIN_IOU):
        self.floor = floor
        self.min_iou = min_iou

    def score(self, proposals: list[Box2D], ctx: FramePacket) -> list[float]:
        world = ctx.truth_handle
        if world is None:
            raise ValueError("synthetic oracle needs a truth handle on the packet")
        truth = world.gt_states(ctx.frame_index)
        out = []
        for box in proposals:
            best, best_iou = None, 0.0
            for state in truth:
                if state.box_image is None:
                    continue
                ov = iou_2d(box, state.box_image)
                if ov > best_iou:
                    best, best_iou = state, ov
            if best is None or best_iou < self.min_iou:
                out.append(self.floor)
            else:
                fit = min(max((best_iou - self.FIT_ZERO) / (self.FIT_FULL - self.FIT_ZERO), 0.0), 1.0)
                out.append(max(best.visibility_2d * fit, self.floor))
        return out
