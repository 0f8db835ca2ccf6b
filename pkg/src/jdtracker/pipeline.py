"""Per-frame orchestration: predict, compensate, regress, score, fuse, NMS, update.

The Tracker owns the live track table and processes frames strictly in order.
Each frame runs ten fixed steps; enabling trace mode records them per frame.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .association import (KIND_DETECTION, KIND_TRACK, NmsCandidate, joint_nms)
from .config import TrackerConfig
from .dataio import TrackedBox
from .fusion import blend_and_score, fuse_conf_2d, fuse_conf_3d, fuse_final, historical_feature
from .geometry import FRAME_EGO, iou_3d, iou_bev, project_box, unclipped_hull

MIN_IN_IMAGE_FRACTION = 0.3  # below this the 2D branch cannot score the box
from .motion import KalmanParams, ego_compensate, kf_predict, kf_update
from .oracle import FramePacket
from .simworld import SequenceBundle
from .trackman import CONFIRMED, DEAD, Track, postprocess_remote, spawn_tracks, step_lifecycle

TRACE_STEPS = ("predict", "compensate", "regress_3d", "feature_blend", "project_2d",
               "confidence_fuse", "joint_nms", "kf_update", "postprocess_2d", "lifecycle")


class PipelineError(RuntimeError):
    pass


@dataclass
class TrackFrameRecord:
    """Per-track diagnostics for one frame (drives the confidence traces)."""

    track_id: int
    raw_detection_score: float
    fused_confidence: float
    matched: bool
    kept_by_2d: bool
    suppressed: bool


@dataclass
class FrameSummary:
    frame: int
    n_tracks_in: int
    n_detections: int
    n_matched: int
    n_spawned: int
    n_dead: int
    records: list[TrackFrameRecord] = field(default_factory=list)


@dataclass
class RunReport:
    seq_id: str
    frames: int
    config: dict
    seed: int
    tracks_spawned: int = 0
    rows_emitted: int = 0
    total_matches: int = 0
    total_dead: int = 0
    wall_time_s: float = 0.0
    per_frame_ms: float = 0.0

    def to_text(self, include_timings: bool = True) -> str:
        lines = [
            f"sequence       {self.seq_id}",
            f"frames         {self.frames}",
            f"seed           {self.seed}",
            f"tracks spawned {self.tracks_spawned}",
            f"rows emitted   {self.rows_emitted}",
            f"matches        {self.total_matches}",
            f"tracks died    {self.total_dead}",
        ]
        if include_timings:
            lines.append(f"wall time      {self.wall_time_s:.3f} s "
                         f"({self.per_frame_ms:.2f} ms/frame)")
        lines.append("config         " + " ".join(f"{k}={v}" for k, v in sorted(self.config.items())))
        return "\n".join(lines) + "\n"

    def to_json_dict(self, include_timings: bool = False) -> dict:
        # Timing fields are excluded by default so report files stay
        # byte-identical across runs with the same seed.
        out = {
            "seq_id": self.seq_id,
            "frames": self.frames,
            "seed": self.seed,
            "tracks_spawned": self.tracks_spawned,
            "rows_emitted": self.rows_emitted,
            "total_matches": self.total_matches,
            "total_dead": self.total_dead,
            "config": self.config,
        }
        if include_timings:
            out["wall_time_s"] = self.wall_time_s
            out["per_frame_ms"] = self.per_frame_ms
        return out


class Tracker:
    """Stateful per-sequence tracker wiring the oracles to the track table."""

    def __init__(self, config: TrackerConfig, oracle3d, oracle2d=None, trace: bool = False):
        self.config = config
        self.oracle3d = oracle3d
        self.oracle2d = oracle2d if config.use_2d else None
        self.kf_params = KalmanParams(config.kf_init_pose_var, config.kf_init_vel_var,
                                      config.kf_process_var, config.kf_process_var_vel,
                                      config.kf_meas_var)
        self.tracks: list[Track] = []
        self.next_id = 1
        self.rows: list[TrackedBox] = []
        self.trace = trace
        self.trace_log: list[tuple[int, list[str]]] = []
        self.summaries: list[FrameSummary] = []
        self._last_frame: int | None = None
        self._prev_pose = None
        self._spawned = 0
        self._matches = 0
        self._dead = 0

    # -- frame step ---------------------------------------------------------

    def process_frame(self, packet: FramePacket) -> FrameSummary:
        expected = 0 if self._last_frame is None else self._last_frame + 1
        if packet.frame_index != expected:
            raise PipelineError(f"out-of-order frame {packet.frame_index}, expected {expected}")
        steps = []
        frame = packet.frame_index
        cfg = self.config
        n_tracks_in = len(self.tracks)

        # 1. constant-velocity prediction
        for tr in self.tracks:
            tr.kstate = kf_predict(tr.kstate, self.kf_params)
        steps.append("predict")

        # 2. ego-motion compensation into the current frame
        if self._prev_pose is not None:
            for tr in self.tracks:
                tr.kstate = ego_compensate(tr.kstate, self._prev_pose, packet.ego_pose)
        steps.append("compensate")

        # 3. regression of predicted trajectories as proposals
        proposals = [tr.kstate.box(FRAME_EGO) for tr in self.tracks]
        try:
            responses = self.oracle3d.regress(proposals, packet) if proposals else []
        except Exception as exc:
            raise PipelineError(f"3D oracle failed at frame {frame}: {exc}") from exc
        if len(responses) != len(proposals):
            raise PipelineError(f"3D oracle returned {len(responses)} responses "
                                f"for {len(proposals)} proposals at frame {frame}")
        steps.append("regress_3d")

        # 4. history-blended regression confidence
        reg_conf = []
        reg_box = []
        head = getattr(self.oracle3d, "head", None)
        for tr, resp in zip(self.tracks, responses):
            conf = resp.confidence
            if resp.feature is not None and head is not None and len(tr.feature_mem) > 0:
                f_his = historical_feature(tr.feature_mem)
                conf = blend_and_score(f_his, resp.feature, resp.confidence, head)
            reg_conf.append(conf)
            box = resp.refined_box if resp.refined_box is not None else tr.kstate.box(FRAME_EGO)
            reg_box.append(box)
            tr.last_regressed_box = box
        steps.append("feature_blend")

        # 5. projection and image-plane confidence; boxes mostly outside the
        # image are not scoreable and fall back to the 3D-only path
        conf2d_raw: list[float | None] = [None] * len(self.tracks)
        if self.oracle2d is not None and self.tracks:
            boxes2d = []
            for b in reg_box:
                clipped = project_box(b, packet.calib)
                hull = unclipped_hull(b, packet.calib)
                if clipped is None or hull is None or hull.area <= 0 \
                        or clipped.area / hull.area < MIN_IN_IMAGE_FRACTION:
                    boxes2d.append(None)
                else:
                    boxes2d.append(clipped)
            queried = [i for i, b in enumerate(boxes2d) if b is not None]
            if queried:
                try:
                    scores = self.oracle2d.score([boxes2d[i] for i in queried], packet)
                except Exception as exc:
                    raise PipelineError(f"2D oracle failed at frame {frame}: {exc}") from exc
                for i, s in zip(queried, scores):
                    conf2d_raw[i] = s
        steps.append("project_2d")

        # 6. confidence fusion over the history windows
        fused = []
        conf2d_fused: list[float | None] = []
        for i, tr in enumerate(self.tracks):
            c3 = fuse_conf_3d(tr.conf_hist, reg_conf[i])
            c2 = fuse_conf_2d(tr.conf_hist, conf2d_raw[i]) if conf2d_raw[i] is not None else None
            conf2d_fused.append(c2)
            sf = fuse_final(c3, c2)
            fused.append(sf)
            tr.last_conf = sf
        steps.append("confidence_fuse")

        # 7. joint NMS per class over trajectories and detections
        detections = packet.detections
        det_eligible = [i for i, d in enumerate(detections) if d.score >= cfg.detection_score_min]
        iou_fn = iou_bev if cfg.nms_iou_mode == "bev" else iou_3d
        classes = {tr.class_label for tr in self.tracks} | \
                  {detections[i].class_label for i in det_eligible}
        absorbed: dict[int, int | None] = {}
        suppressed_tracks: set[int] = set()
        new_detections: list[int] = []
        for cls in sorted(classes):
            candidates = [NmsCandidate(reg_box[i], fused[i], KIND_TRACK, tr.track_id)
                          for i, tr in enumerate(self.tracks) if tr.class_label == cls]
            candidates += [NmsCandidate(detections[i].box3d, detections[i].score,
                                        KIND_DETECTION, i)
                           for i in det_eligible if detections[i].class_label == cls]
            outcome = joint_nms(candidates, cfg.nms_iou_threshold, cfg.nms_order, iou_fn)
            absorbed.update(outcome.surviving_tracks)
            suppressed_tracks.update(outcome.suppressed_tracks)
            new_detections.extend(outcome.new_detections)
        steps.append("joint_nms")

        # 8. measurement update: absorbed detection first, regressed box otherwise
        for i, tr in enumerate(self.tracks):
            if tr.track_id in suppressed_tracks:
                continue
            det_idx = absorbed.get(tr.track_id)
            meas = detections[det_idx].box3d if det_idx is not None else reg_box[i]
            tr.kstate = kf_update(tr.kstate, meas, self.kf_params)
        steps.append("kf_update")

        # 9. image-evidence rescue for tracks without 3D support
        kept: set[int] = set()
        if self.oracle2d is not None:
            for i, tr in enumerate(self.tracks):
                if tr.track_id in suppressed_tracks or absorbed.get(tr.track_id) is not None:
                    continue
                if postprocess_remote(tr, conf2d_fused[i], cfg.remote_2d_threshold):
                    kept.add(tr.track_id)
        steps.append("postprocess_2d")

        # 10. lifecycle, memory, emission, births
        records = []
        n_matched = 0
        for i, tr in enumerate(self.tracks):
            det_idx = absorbed.get(tr.track_id)
            matched = det_idx is not None
            rescued = tr.track_id in kept
            if matched:
                n_matched += 1
            step_lifecycle(tr, matched or rescued, cfg.min_hits, cfg.max_age)
            resp = responses[i]
            if matched and resp.feature is not None:
                tr.feature_mem.append(frame, resp.feature, reg_conf[i])
            tr.conf_hist.append(reg_conf[i], conf2d_raw[i])
            if (matched or rescued) and tr.lifecycle != DEAD:
                row = TrackedBox(frame, tr.track_id, tr.class_label,
                                 tr.kstate.box(FRAME_EGO), fused[i])
                if tr.lifecycle == CONFIRMED:
                    if tr.pending:
                        self.rows.extend(tr.pending)
                        tr.pending.clear()
                    self.rows.append(row)
                else:
                    tr.pending.append(row)
            if self.trace:
                raw = detections[det_idx].score if det_idx is not None else 0.0
                records.append(TrackFrameRecord(tr.track_id, raw, fused[i], matched,
                                                rescued, tr.track_id in suppressed_tracks))

        n_dead = sum(1 for tr in self.tracks if tr.lifecycle == DEAD)
        self.tracks = [tr for tr in self.tracks if tr.lifecycle != DEAD]

        spawned = spawn_tracks([detections[i] for i in sorted(new_detections)], self.next_id,
                               cfg.n_hist, cfg.min_hits, self.kf_params)
        for tr in spawned:
            row = TrackedBox(frame, tr.track_id, tr.class_label,
                             tr.kstate.box(FRAME_EGO), tr.last_conf)
            if tr.lifecycle == CONFIRMED:
                self.rows.append(row)
            else:
                tr.pending.append(row)
        self.tracks.extend(spawned)
        self.next_id += len(spawned)
        steps.append("lifecycle")

        self._last_frame = frame
        self._prev_pose = packet.ego_pose
        self._spawned += len(spawned)
        self._matches += n_matched
        self._dead += n_dead
        if self.trace:
            self.trace_log.append((frame, steps))
        summary = FrameSummary(frame, n_tracks_in, len(detections), n_matched,
                               len(spawned), n_dead, records)
        self.summaries.append(summary)
        return summary


def run_sequence(bundle: SequenceBundle, oracle3d, oracle2d=None,
                 config: TrackerConfig | None = None,
                 trace: bool = False) -> tuple[list[TrackedBox], RunReport, Tracker]:
    """Track one bundle end to end; deterministic given the config seed."""
    config = config or TrackerConfig()
    tracker = Tracker(config, oracle3d, oracle2d, trace=trace)
    start = time.perf_counter()
    for packet in bundle.packets:
        tracker.process_frame(packet)
    elapsed = time.perf_counter() - start
    rows = sorted(tracker.rows, key=lambda r: (r.frame, r.track_id))
    report = RunReport(
        seq_id=bundle.seq_id,
        frames=len(bundle.packets),
        config=config.as_dict(),
        seed=config.seed,
        tracks_spawned=tracker._spawned,
        rows_emitted=len(rows),
        total_matches=tracker._matches,
        total_dead=tracker._dead,
        wall_time_s=elapsed,
        per_frame_ms=1000.0 * elapsed / max(len(bundle.packets), 1),
    )
    return rows, report, tracker
