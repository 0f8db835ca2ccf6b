"""Constant-velocity Kalman filtering per track, plus ego-motion compensation.

State layout: [x, y, z, yaw, l, w, h, vx, vy, vz]. Positions in meters,
yaw in radians, velocities in meters per frame (unit frame step). The first
seven components are observed directly by box measurements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Box3D, RigidTransform, wrap_angle

STATE_DIM = 10
OBS_DIM = 7


class InnovationError(ValueError):
    """Innovation covariance lost positive definiteness."""


@dataclass(frozen=True)
class KalmanParams:
    init_pose_var: float = 1.0
    init_vel_var: float = 10.0
    process_var: float = 0.01
    process_var_vel: float = 0.01
    meas_var: float = 0.01


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float).reshape(STATE_DIM)
        p = np.asarray(self.covariance, dtype=float).reshape(STATE_DIM, STATE_DIM)
        m.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", p)

    def box(self, frame_id: str) -> Box3D:
        m = self.mean
        return Box3D(m[0], m[1], m[2], m[4], m[5], m[6], m[3], frame_id)


@dataclass(frozen=True)
class EgoPose:
    world_from_ego: RigidTransform
    timestamp: float = 0.0


def _transition() -> np.ndarray:
    f = np.eye(STATE_DIM)
    f[0, 7] = f[1, 8] = f[2, 9] = 1.0
    return f


def _observation() -> np.ndarray:
    h = np.zeros((OBS_DIM, STATE_DIM))
    h[:, :OBS_DIM] = np.eye(OBS_DIM)
    return h


def kf_init(box: Box3D, params: KalmanParams = KalmanParams()) -> KalmanState:
    """New state from a detection box: zero velocity, configured diagonal covariance."""
    mean = np.zeros(STATE_DIM)
    mean[:7] = [box.cx, box.cy, box.cz, box.yaw, box.l, box.w, box.h]
    cov = np.diag([params.init_pose_var] * 7 + [params.init_vel_var] * 3).astype(float)
    return KalmanState(mean, cov)


def kf_predict(state: KalmanState, params: KalmanParams = KalmanParams()) -> KalmanState:
    """One constant-velocity step: position advances by velocity, covariance grows."""
    f = _transition()
    q = np.diag([params.process_var] * 7 + [params.process_var_vel] * 3)
    mean = f @ state.mean
    mean[3] = wrap_angle(mean[3])
    cov = f @ state.covariance @ f.T + q
    return KalmanState(mean, cov)


def _wrapped_innovation(meas_yaw: float, state_yaw: float) -> float:
    # Boxes are heading-symmetric: allow a pi flip when it shrinks the innovation.
    d = wrap_angle(meas_yaw - state_yaw)
    if d > math.pi / 2:
        d -= math.pi
    elif d < -math.pi / 2:
        d += math.pi
    return d


def kf_update(state: KalmanState, measurement: Box3D,
              params: KalmanParams = KalmanParams()) -> KalmanState:
    """Standard Kalman gain update on the seven observed box components."""
    h = _observation()
    r = params.meas_var * np.eye(OBS_DIM)
    z = np.array([measurement.cx, measurement.cy, measurement.cz, measurement.yaw,
                  measurement.l, measurement.w, measurement.h])
    innov = z - h @ state.mean
    innov[3] = _wrapped_innovation(z[3], state.mean[3])
    s = h @ state.covariance @ h.T + r
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise InnovationError("innovation covariance is not positive definite") from exc
    gain = np.linalg.solve(s, h @ state.covariance).T
    mean = state.mean + gain @ innov
    mean[3] = wrap_angle(mean[3])
    ikh = np.eye(STATE_DIM) - gain @ h
    # Joseph form keeps the covariance symmetric positive-definite.
    cov = ikh @ state.covariance @ ikh.T + gain @ r @ gain.T
    return KalmanState(mean, cov)


def ego_compensate(state: KalmanState, pose_prev: EgoPose, pose_curr: EgoPose) -> KalmanState:
    """Re-express a state estimated in the previous ego frame in the current one.

    Applies T = inv(world_from_ego_curr) . world_from_ego_prev to position and
    yaw, rotates the velocity, and rotates the covariance consistently.
    """
    t = pose_curr.world_from_ego.inverse().compose(pose_prev.world_from_ego)
    rot = t.rotation
    mean = state.mean.copy()
    mean[:3] = rot @ mean[:3] + t.translation
    mean[3] = wrap_angle(mean[3] + t.heading)
    mean[7:] = rot @ mean[7:]
    jac = np.eye(STATE_DIM)
    jac[:3, :3] = rot
    jac[7:, 7:] = rot
    cov = jac @ state.covariance @ jac.T
    return KalmanState(mean, cov)
