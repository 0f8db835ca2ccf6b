"""KITTI-style sequence I/O: calibration, ego poses, detections, labels, results.

The internal canonical frame is the ego/LiDAR frame (x forward, y left, z up).
Detection and label files follow the KITTI camera-coordinate convention and
are converted exactly once on load. All text formats are documented in
FORMATS.md and covered by round-trip tests.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .config import TrackerConfig, load_config  # noqa: F401  (re-exported)
from .geometry import (Box2D, Box3D, CameraCalib, FRAME_EGO, RigidTransform,
                       project_box, wrap_angle)
from .motion import EgoPose
from .oracle import Detection, FramePacket
from .simworld import GtRow, SequenceBundle

EARTH_RADIUS = 6378137.0


class DataFormatError(ValueError):
    """A data file could not be parsed; the message names file and line."""


@dataclass(frozen=True)
class TrackedBox:
    """One output row: a confirmed track's box in one frame."""

    frame: int
    track_id: int
    class_label: str
    box: Box3D
    score: float


# ---------------------------------------------------------------------------
# Coordinate conversions between KITTI camera labels and the ego frame

def camera_row_to_ego(h: float, w: float, l: float, x: float, y: float, z: float,
                      rotation_y: float, calib: CameraCalib) -> Box3D:
    """KITTI label fields (bottom-center in rectified camera coords) to an ego box."""
    m = calib.velo_from_cam_rect()
    center_cam = np.array([x, y - h / 2, z, 1.0])
    cx, cy, cz, _ = m @ center_cam
    yaw = wrap_angle(-rotation_y - math.pi / 2)
    return Box3D(cx, cy, cz, l, w, h, yaw, FRAME_EGO)


def ego_box_to_camera_row(box: Box3D, calib: CameraCalib) -> tuple[float, ...]:
    """Inverse of :func:`camera_row_to_ego`: (h, w, l, x, y, z, rotation_y)."""
    rect4 = np.eye(4)
    rect4[:3, :3] = calib.rect
    m = rect4 @ calib.lidar_to_cam
    cx, cy, cz, _ = m @ np.array([box.cx, box.cy, box.cz, 1.0])
    rotation_y = wrap_angle(-box.yaw - math.pi / 2)
    return box.h, box.w, box.l, cx, cy + box.h / 2, cz, rotation_y


# ---------------------------------------------------------------------------
# Calibration

def read_kitti_calib(path, image_width: int = 1242, image_height: int = 375) -> CameraCalib:
    """Parse a KITTI tracking calibration file (P2, R0_rect / R_rect, Tr_velo_to_cam)."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            key, _, rest = text.replace(":", " ").partition(" ")
            try:
                values[key] = np.array([float(v) for v in rest.split()])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad calibration row") from exc
    try:
        proj = values["P2"].reshape(3, 4)
        rect_key = "R0_rect" if "R0_rect" in values else "R_rect"
        rect = values[rect_key].reshape(3, 3)
        tr_key = "Tr_velo_to_cam" if "Tr_velo_to_cam" in values else "Tr_velo_cam"
        tr = np.vstack([values[tr_key].reshape(3, 4), [0.0, 0.0, 0.0, 1.0]])
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing calibration key {exc}") from exc
    imu_key = "Tr_imu_to_velo" if "Tr_imu_to_velo" in values else "Tr_imu_velo"
    calib = CameraCalib(proj, rect, tr, image_width, image_height)
    if imu_key in values:
        velo_from_imu = np.vstack([values[imu_key].reshape(3, 4), [0.0, 0.0, 0.0, 1.0]])
        object.__setattr__(calib, "_velo_from_imu", velo_from_imu)
    return calib


def write_kitti_calib(calib: CameraCalib, path):
    with open(path, "w", encoding="utf-8") as fh:
        p = " ".join(f"{v:.12e}" for v in calib.projection.reshape(-1))
        fh.write(f"P2: {p}\n")
        r = " ".join(f"{v:.12e}" for v in calib.rect.reshape(-1))
        fh.write(f"R0_rect: {r}\n")
        t = " ".join(f"{v:.12e}" for v in calib.lidar_to_cam[:3].reshape(-1))
        fh.write(f"Tr_velo_to_cam: {t}\n")


# ---------------------------------------------------------------------------
# Ego poses: KITTI oxts or the plain pose table

def _mercator(lat: float, lon: float, scale: float) -> tuple[float, float]:
    x = scale * EARTH_RADIUS * math.radians(lon)
    y = scale * EARTH_RADIUS * math.log(math.tan(math.pi / 4 + math.radians(lat) / 2))
    return x, y


def _rotation_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx

def read_oxts(path, dt: float = 0.1) -> list[EgoPose]:
    """KITTI oxts rows to world_from_ego poses, anchored at the first frame.

    Latitude/longitude go through the standard mercator projection with the
    first frame's latitude setting the scale; roll/pitch/yaw build the
    rotation. The first pose is the world origin.
    """
    poses = []
    scale = None
    first_inv = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            fields = [float(v) for v in text.split()]
            if len(fields) < 6:
                raise DataFormatError(f"{path}:{lineno}: oxts row needs at least 6 fields")
            lat, lon, alt, roll, pitch, yaw = fields[:6]
            if scale is None:
                scale = math.cos(math.radians(lat))
            x, y = _mercator(lat, lon, scale)
            t = RigidTransform(_rotation_rpy(roll, pitch, yaw), np.array([x, y, alt]))
            if first_inv is None:
                first_inv = t.inverse()
            anchored = first_inv.compose(t)
            poses.append(EgoPose(anchored, timestamp=dt * len(poses)))
    return poses


def read_pose_table(path, dt: float = 0.1) -> list[EgoPose]:
    """Plain pose rows: ``frame,x,y,z,yaw`` (world_from_ego)."""
    poses = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                frame, x, y, z, yaw = text.split(",")
                poses[int(frame)] = RigidTransform.from_yaw(float(yaw),
                                                            (float(x), float(y), float(z)))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad pose row") from exc
    return [EgoPose(poses[i], timestamp=dt * i) for i in sorted(poses)]


def write_pose_table(poses: list[EgoPose], path):
    with open(path, "w", encoding="utf-8") as fh:
        for i, pose in enumerate(poses):
            t = pose.world_from_ego.translation
            fh.write(f"{i},{t[0]:.6f},{t[1]:.6f},{t[2]:.6f},{pose.world_from_ego.heading:.6f}\n")


# ---------------------------------------------------------------------------
# Detections

def read_detections(path, calib: CameraCalib) -> dict[int, list[Detection]]:
    """Per-frame 3D detections from ``frame,type,score,h,w,l,x,y,z,yaw`` rows.

    Box fields use the KITTI camera convention and are converted into the ego
    frame here, exactly once.
    """
    table: dict[int, list[Detection]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 10:
                raise DataFormatError(f"{path}:{lineno}: expected 10 fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                label = parts[1]
                score = float(parts[2])
                h, w, l, x, y, z, yaw = (float(v) for v in parts[3:])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad detection row") from exc
            box = camera_row_to_ego(h, w, l, x, y, z, yaw, calib)
            table.setdefault(frame, []).append(Detection(box, score, None, frame, label))
    return table


def write_detections(table: dict[int, list[Detection]], path, calib: CameraCalib):
    with open(path, "w", encoding="utf-8") as fh:
        for frame in sorted(table):
            for det in table[frame]:
                h, w, l, x, y, z, ry = ego_box_to_camera_row(det.box3d, calib)
                fh.write(f"{frame},{det.class_label},{det.score:.6f},"
                         f"{h:.6f},{w:.6f},{l:.6f},{x:.6f},{y:.6f},{z:.6f},{ry:.6f}\n")


def read_detections_2d(path) -> dict[int, list[tuple[float, Box2D]]]:
    """Sidecar 2D detections: ``frame,type,score,x1,y1,x2,y2`` rows."""
    table: dict[int, list[tuple[float, Box2D]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 7:
                raise DataFormatError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                score = float(parts[2])
                x1, y1, x2, y2 = (float(v) for v in parts[3:])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad 2D detection row") from exc
            table.setdefault(frame, []).append((score, Box2D(x1, y1, x2, y2)))
    return table


def write_detections_2d(table: dict[int, list[tuple[float, Box2D]]], path, label: str = "Car"):
    with open(path, "w", encoding="utf-8") as fh:
        for frame in sorted(table):
            for score, box in table[frame]:
                fh.write(f"{frame},{label},{score:.6f},{box.x_min:.2f},{box.y_min:.2f},"
                         f"{box.x_max:.2f},{box.y_max:.2f}\n")


# ---------------------------------------------------------------------------
# Labels (ground truth) and tracking results, KITTI tracking format

def _format_kitti_row(frame: int, track_id: int, label: str, box: Box3D,
                      score: float | None, calib: CameraCalib) -> str:
    h, w, l, x, y, z, ry = ego_box_to_camera_row(box, calib)
    bbox = project_box(box, calib)
    if bbox is None:
        b = (-1.0, -1.0, -1.0, -1.0)
    else:
        b = (bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max)
    alpha = wrap_angle(ry - math.atan2(x, z))
    row = (f"{frame} {track_id} {label} 0 0 {alpha:.6f} "
           f"{b[0]:.2f} {b[1]:.2f} {b[2]:.2f} {b[3]:.2f} "
           f"{h:.6f} {w:.6f} {l:.6f} {x:.6f} {y:.6f} {z:.6f} {ry:.6f}")
    if score is not None:
        row += f" {score:.6f}"
    return row + "\n"


def write_results(rows: list[TrackedBox], path, calib: CameraCalib):
    """Write tracking output, one KITTI row per (frame, id), sorted by frame then id."""
    ordered = sorted(rows, key=lambda r: (r.frame, r.track_id))
    with open(path, "w", encoding="utf-8") as fh:
        for r in ordered:
            fh.write(_format_kitti_row(r.frame, r.track_id, r.class_label, r.box, r.score, calib))


def read_results(path, calib: CameraCalib) -> list[TrackedBox]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) not in (17, 18):
                raise DataFormatError(f"{path}:{lineno}: expected 17 or 18 fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                track_id = int(parts[1])
                label = parts[2]
                h, w, l, x, y, z, ry = (float(v) for v in parts[10:17])
                score = float(parts[17]) if len(parts) == 18 else 1.0
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad result row") from exc
            box = camera_row_to_ego(h, w, l, x, y, z, ry, calib)
            rows.append(TrackedBox(frame, track_id, label, box, score))
    return rows


def write_labels(rows: list[GtRow], path, calib: CameraCalib):
    ordered = sorted(rows, key=lambda r: (r.frame, r.track_id))
    with open(path, "w", encoding="utf-8") as fh:
        for r in ordered:
            fh.write(_format_kitti_row(r.frame, r.track_id, r.class_label, r.box, None, calib))


def read_labels(path, calib: CameraCalib) -> list[GtRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) < 17:
                raise DataFormatError(f"{path}:{lineno}: expected >= 17 fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                track_id = int(parts[1])
                label = parts[2]
                h, w, l, x, y, z, ry = (float(v) for v in parts[10:17])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad label row") from exc
            if label == "DontCare":
                continue
            rows.append(GtRow(frame, track_id, label, camera_row_to_ego(h, w, l, x, y, z, ry, calib)))
    return rows


# ---------------------------------------------------------------------------
# Sequence assembly

def load_sequence(kitti_dir, seq_id: str, detections_dir,
                  config: TrackerConfig | None = None) -> SequenceBundle:
    """Assemble a replay bundle from a KITTI tracking layout.

    Expects ``calib/<seq>.txt`` plus one of ``oxts/<seq>.txt`` or
    ``poses/<seq>.txt`` under ``kitti_dir``, 3D detections at
    ``<detections_dir>/<seq>.txt``, an optional 2D sidecar ``<seq>_2d.txt``,
    and optional labels at ``label_02/<seq>.txt``. Missing poses degrade to
    identity compensation with a warning.
    """
    import sys

    config = config or TrackerConfig()
    calib_path = os.path.join(kitti_dir, "calib", f"{seq_id}.txt")
    if not os.path.exists(calib_path):
        raise FileNotFoundError(f"missing calibration file {calib_path}")
    calib = read_kitti_calib(calib_path, config.image_width, config.image_height)

    det_path = os.path.join(detections_dir, f"{seq_id}.txt")
    if not os.path.exists(det_path):
        raise FileNotFoundError(f"missing detection file {det_path}")
    det_table = read_detections(det_path, calib)

    oxts_path = os.path.join(kitti_dir, "oxts", f"{seq_id}.txt")
    pose_path = os.path.join(kitti_dir, "poses", f"{seq_id}.txt")
    if os.path.exists(oxts_path):
        poses = read_oxts(oxts_path)
    elif os.path.exists(pose_path):
        poses = read_pose_table(pose_path)
    else:
        print(f"warning: no pose data for sequence {seq_id}; "
              "ego compensation disabled", file=sys.stderr)
        poses = []

    n_frames = max(det_table, default=-1) + 1
    if poses:
        n_frames = max(n_frames, len(poses))
    packets = []
    for frame in range(n_frames):
        pose = poses[frame] if frame < len(poses) else EgoPose(RigidTransform.identity(), 0.1 * frame)
        packets.append(FramePacket(frame, pose, calib, det_table.get(frame, []),
                                   (calib.image_width, calib.image_height), None))

    label_path = os.path.join(kitti_dir, "label_02", f"{seq_id}.txt")
    gt = read_labels(label_path, calib) if os.path.exists(label_path) else []
    return SequenceBundle(seq_id, packets, calib, gt, None)


def export_bundle(bundle: SequenceBundle, out_dir):
    """Write a generated bundle in the replayable on-disk layout."""
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "calib"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "poses"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "label_02"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "detections"), exist_ok=True)
    seq = bundle.seq_id
    write_kitti_calib(bundle.calib, os.path.join(out_dir, "calib", f"{seq}.txt"))
    write_pose_table([p.ego_pose for p in bundle.packets],
                     os.path.join(out_dir, "poses", f"{seq}.txt"))
    write_labels(bundle.gt, os.path.join(out_dir, "label_02", f"{seq}.txt"), bundle.calib)
    det_table = {p.frame_index: list(p.detections) for p in bundle.packets}
    write_detections(det_table, os.path.join(out_dir, "detections", f"{seq}.txt"), bundle.calib)
