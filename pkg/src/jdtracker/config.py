"""Tracker configuration: one flat key-value schema, file loader, and docs.

The schema below is the single source of truth; the CLI help text and the
config-file parser are both generated from it. Unknown keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, fields


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (type, default, help)
CONFIG_SCHEMA = {
    "seed": (int, 0, "master random seed; fixed seed means bitwise-identical outputs"),
    "n_hist": (int, 1, "history window length for feature and confidence fusion (0 disables)"),
    "use_2d": (_bool, True, "enable the image-plane confidence branch"),
    "nms_order": (str, "descending", "joint NMS processing order: descending | ascending | unordered"),
    "nms_iou_threshold": (float, 0.1, "overlap at or above which joint NMS suppresses"),
    "nms_iou_mode": (str, "bev", "overlap measure for joint NMS: bev | 3d"),
    "detection_score_min": (float, 0.0, "drop detections below this score before NMS"),
    "min_hits": (int, 3, "consecutive-ish hits before a tentative track is confirmed"),
    "max_age": (int, 2, "misses tolerated before a track dies (dead when misses exceed this)"),
    "remote_2d_threshold": (float, 0.5, "2D confidence at or above which an unmatched track is kept confirmed"),
    "kf_init_pose_var": (float, 1.0, "initial variance of position/yaw/dimension states"),
    "kf_init_vel_var": (float, 10.0, "initial variance of velocity states"),
    "kf_process_var": (float, 0.01, "process noise variance for position/yaw/dimensions"),
    "kf_process_var_vel": (float, 0.01, "process noise variance for velocities"),
    "kf_meas_var": (float, 0.01, "measurement noise variance for box observations"),
    "oracle_floor_conf": (float, 0.05, "confidence assigned to proposals with no evidence"),
    "oracle_match_min_iou": (float, 0.1, "minimum overlap for an oracle to match a proposal"),
    "oracle_refine_min": (float, 0.1, "detectability below which a synthetic oracle stops refining"),
    "feature_dim": (int, 8, "synthetic oracle feature dimension"),
    "feature_sigma": (float, 0.02, "synthetic oracle feature noise sigma"),
    "clear_threshold": (float, 0.25, "similarity threshold for CLEAR matching"),
    "metric_similarity": (str, "iou_3d", "evaluation similarity: iou_3d | iou_bev | iou_2d"),
    "image_width": (int, 1242, "fallback image width when no calibration provides one"),
    "image_height": (int, 375, "fallback image height when no calibration provides one"),
}

_CHOICES = {
    "nms_order": ("descending", "ascending", "unordered"),
    "nms_iou_mode": ("bev", "3d"),
    "metric_similarity": ("iou_3d", "iou_bev", "iou_2d"),
}


@dataclass
class TrackerConfig:
    seed: int = 0
    n_hist: int = 1
    use_2d: bool = True
    nms_order: str = "descending"
    nms_iou_threshold: float = 0.1
    nms_iou_mode: str = "bev"
    detection_score_min: float = 0.0
    min_hits: int = 3
    max_age: int = 2
    remote_2d_threshold: float = 0.5
    kf_init_pose_var: float = 1.0
    kf_init_vel_var: float = 10.0
    kf_process_var: float = 0.01
    kf_process_var_vel: float = 0.01
    kf_meas_var: float = 0.01
    oracle_floor_conf: float = 0.05
    oracle_match_min_iou: float = 0.1
    oracle_refine_min: float = 0.1
    feature_dim: int = 8
    feature_sigma: float = 0.02
    clear_threshold: float = 0.25
    metric_similarity: str = "iou_3d"
    image_width: int = 1242
    image_height: int = 375

    def __post_init__(self):
        for key, choices in _CHOICES.items():
            value = getattr(self, key)
            if value not in choices:
                raise ValueError(f"config {key}={value!r} not one of {choices}")

    def replace(self, **changes) -> "TrackerConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return TrackerConfig(**values)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def config_from_mapping(mapping: dict) -> TrackerConfig:
    values = {}
    for key, raw in mapping.items():
        if key not in CONFIG_SCHEMA:
            raise KeyError(f"unknown config key {key!r}")
        caster, default, _ = CONFIG_SCHEMA[key]
        try:
            if isinstance(raw, str):
                values[key] = caster(raw)
            elif caster is _bool:
                values[key] = bool(raw)
            else:
                values[key] = type(default)(raw)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"config key {key!r}: {exc}") from exc
    return TrackerConfig(**values)


def load_config(path) -> TrackerConfig:
    """Parse a ``key = value`` text file; blank lines and # comments ignored."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, _, value = text.partition("=")
            mapping[key.strip()] = value.strip()
    return config_from_mapping(mapping)


def schema_help() -> str:
    lines = []
    for key, (_, default, doc) in CONFIG_SCHEMA.items():
        lines.append(f"  {key:<22} default={default!r:<14} {doc}")
    return "\n".join(lines)
