"""Oriented 3D box geometry: corners, rotated IoU, rigid transforms, camera projection.

Frames follow the KITTI convention. The ego (LiDAR) and world frames are
right-handed with x forward, y left, z up; camera frames have x right, y down,
z forward. Yaw rotates about +z, measured from +x toward +y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

FRAME_EGO = "ego"
FRAME_WORLD = "world"
FRAME_CAMERA = "camera"
KNOWN_FRAMES = (FRAME_EGO, FRAME_WORLD, FRAME_CAMERA)


class FrameMismatchError(ValueError):
    """Raised when boxes from different coordinate frames are combined."""


def wrap_angle(angle: float) -> float:
    """Normalize an angle to the half-open interval (-pi, pi]."""
    a = math.remainder(float(angle), math.tau)
    return math.pi if a <= -math.pi else a


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D bounding box: center, dimensions and yaw in a named frame.

    ``l`` extends along the heading direction, ``w`` across it, ``h`` along z.
    """

    cx: float
    cy: float
    cz: float
    l: float
    w: float
    h: float
    yaw: float
    frame_id: str = FRAME_EGO

    def __post_init__(self):
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise ValueError(f"box dimensions must be positive, got l={self.l} w={self.w} h={self.h}")
        if self.frame_id not in KNOWN_FRAMES:
            raise ValueError(f"unknown frame_id {self.frame_id!r}")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.cz])

    @property
    def bev_area(self) -> float:
        return self.l * self.w

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    def bev_corners(self) -> np.ndarray:
        """Footprint corners, shape (4, 2), counterclockwise from (+l/2, +w/2)."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        local = np.array([
            [+self.l / 2, +self.w / 2],
            [-self.l / 2, +self.w / 2],
            [-self.l / 2, -self.w / 2],
            [+self.l / 2, -self.w / 2],
        ])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.cx, self.cy])

    def corners(self) -> np.ndarray:
        """All 8 corners, shape (8, 3).

        Indices 0..3 are the bottom face (z = cz - h/2) counterclockwise
        starting at (+l/2, +w/2); indices 4..7 repeat the order on the top
        face. The corner centroid equals the box center.
        """
        bev = self.bev_corners()
        out = np.empty((8, 3))
        out[:4, :2] = bev
        out[4:, :2] = bev
        out[:4, 2] = self.cz - self.h / 2
        out[4:, 2] = self.cz + self.h / 2
        return out

    def moved(self, **changes) -> "Box3D":
        return replace(self, **changes)


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned image-plane box in pixels."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate 2D box {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform (rotation + translation), p' = R p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_yaw(yaw: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        c, s = math.cos(yaw), math.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return RigidTransform(rot, np.asarray(translation, dtype=float))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        return RigidTransform(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return self applied after other: (self @ other)(p) = self(other(p))."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self.rotation.T + self.translation

    @property
    def heading(self) -> float:
        """Rotation component about the vertical axis."""
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])


@dataclass(frozen=True)
class CameraCalib:
    """Pinhole camera calibration in the KITTI layout.

    ``projection`` is the 3x4 pixel projection applied to rectified camera
    coordinates, ``rect`` the 3x3 rectification rotation, and ``lidar_to_cam``
    the 4x4 rigid transform from the ego/LiDAR frame into the camera frame.
    """

    projection: np.ndarray
    rect: np.ndarray
    lidar_to_cam: np.ndarray
    image_width: int = 1242
    image_height: int = 375

    def __post_init__(self):
        p = np.asarray(self.projection, dtype=float).reshape(3, 4)
        r = np.asarray(self.rect, dtype=float).reshape(3, 3)
        m = np.asarray(self.lidar_to_cam, dtype=float).reshape(4, 4)
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise ValueError("lidar_to_cam bottom row must be (0, 0, 0, 1)")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-6):
            raise ValueError("rect must be orthonormal")
        for a in (p, r, m):
            a.setflags(write=False)
        object.__setattr__(self, "projection", p)
        object.__setattr__(self, "rect", r)
        object.__setattr__(self, "lidar_to_cam", m)

    @staticmethod
    def default(image_width: int = 1242, image_height: int = 375,
                focal: float = 721.5377, cam_height: float = 1.65) -> "CameraCalib":
        """Synthetic forward-looking camera mounted ``cam_height`` above the ego origin."""
        # ego (x fwd, y left, z up) -> camera (x right, y down, z fwd)
        rot = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
        t = -rot @ np.array([0.0, 0.0, cam_height])
        m = np.eye(4)
        m[:3, :3] = rot
        m[:3, 3] = t
        k = np.array([[focal, 0.0, image_width / 2, 0.0],
                      [0.0, focal, image_height / 2, 0.0],
                      [0.0, 0.0, 1.0, 0.0]])
        return CameraCalib(k, np.eye(3), m, image_width, image_height)

    def velo_from_cam_rect(self) -> np.ndarray:
        """4x4 transform from rectified camera coordinates back to the ego frame."""
        rect4 = np.eye(4)
        rect4[:3, :3] = self.rect
        return np.linalg.inv(rect4 @ self.lidar_to_cam)


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by convex CCW polygon ``clip``."""
    eps = 1e-12
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a = clip[i]
        b = clip[(i + 1) % n]
        edge = b - a
        inp = output
        output = []
        prev = inp[-1]
        prev_in = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0]) >= -eps
        for cur in inp:
            cur_in = edge[0] * (cur[1] - a[1]) - edge[1] * (cur[0] - a[0]) >= -eps
            if cur_in:
                if not prev_in:
                    output.append(_segment_intersection(prev, cur, a, b))
                output.append(cur)
            elif prev_in:
                output.append(_segment_intersection(prev, cur, a, b))
            prev, prev_in = cur, cur_in
    return np.array(output) if output else np.empty((0, 2))


def _segment_intersection(p, q, a, b) -> np.ndarray:
    d1 = q - p
    d2 = b - a
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-18:
        return q
    t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / denom
    return p + t * d1


def polygon_area(points: np.ndarray) -> float:
    """Shoelace area of a simple polygon (absolute value)."""
    if len(points) < 3:
        return 0.0
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    inter = _clip_polygon(a.bev_corners(), b.bev_corners())
    area = polygon_area(inter)
    return min(area, a.bev_area, b.bev_area)


def _check_frames(a: Box3D, b: Box3D):
    if a.frame_id != b.frame_id:
        raise FrameMismatchError(f"boxes in different frames: {a.frame_id} vs {b.frame_id}")


def iou_bev(a: Box3D, b: Box3D) -> float:
    """Bird's-eye-view IoU of two oriented boxes (footprint overlap ratio)."""
    _check_frames(a, b)
    inter = bev_intersection_area(a, b)
    union = a.bev_area + b.bev_area - inter
    return inter / union if union > 0 else 0.0


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU: BEV intersection times vertical overlap over volume union."""
    _check_frames(a, b)
    z_over = min(a.cz + a.h / 2, b.cz + b.h / 2) - max(a.cz - a.h / 2, b.cz - b.h / 2)
    if z_over <= 0:
        return 0.0
    inter = bev_intersection_area(a, b) * z_over
    union = a.volume + b.volume - inter
    return inter / union if union > 0 else 0.0


def iou_2d(a: Box2D, b: Box2D) -> float:
    """IoU of axis-aligned image boxes. Degenerate zero-area inputs yield 0."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def apply_transform(box: Box3D, t: RigidTransform, new_frame: str) -> Box3D:
    """Map a box through a rigid transform, retagging it with ``new_frame``.

    Dimensions are untouched; yaw picks up the transform's heading component.
    """
    center = t.apply_points(box.center)[0]
    return Box3D(center[0], center[1], center[2], box.l, box.w, box.h,
                 wrap_angle(box.yaw + t.heading), new_frame)


def project_box(box: Box3D, calib: CameraCalib) -> Box2D | None:
    """Project a box into the image: clipped axis-aligned hull of its corners.

    Returns None when every corner is behind the camera or the clipped hull
    has no area. Corners behind the image plane are dropped, so a partially
    visible box keeps its clipped extent.
    """
    pts = np.hstack([box.corners(), np.ones((8, 1))])
    cam = (calib.lidar_to_cam @ pts.T)[:3]
    rect = calib.rect @ cam
    ahead = rect[2] > 1e-6
    if not np.any(ahead):
        return None
    rect = rect[:, ahead]
    pix = calib.projection @ np.vstack([rect, np.ones(rect.shape[1])])
    u = pix[0] / pix[2]
    v = pix[1] / pix[2]
    x_min = max(float(u.min()), 0.0)
    y_min = max(float(v.min()), 0.0)
    x_max = min(float(u.max()), float(calib.image_width))
    y_max = min(float(v.max()), float(calib.image_height))
    if x_max - x_min <= 0 or y_max - y_min <= 0:
        return None
    return Box2D(x_min, y_min, x_max, y_max)


def unclipped_hull(box: Box3D, calib: CameraCalib) -> Box2D | None:
    """Projected hull without image-bound clipping (for visibility ratios)."""
    pts = np.hstack([box.corners(), np.ones((8, 1))])
    cam = (calib.lidar_to_cam @ pts.T)[:3]
    rect = calib.rect @ cam
    ahead = rect[2] > 1e-6
    if not np.any(ahead):
        return None
    rect = rect[:, ahead]
    pix = calib.projection @ np.vstack([rect, np.ones(rect.shape[1])])
    u = pix[0] / pix[2]
    v = pix[1] / pix[2]
    if u.max() - u.min() <= 0 or v.max() - v.min() <= 0:
        return None
    return Box2D(float(u.min()), float(v.min()), float(u.max()), float(v.max()))
