"""3D multi-object tracking by trajectory regression and confidence-guided joint NMS."""

from .association import NmsCandidate, NmsOutcome, joint_nms
from .config import TrackerConfig, load_config
from .dataio import TrackedBox, load_sequence, read_results, write_results
from .fusion import (ConfidenceHistory, FeatureMemory, blend_and_score,
                     fuse_conf_2d, fuse_conf_3d, fuse_final, historical_feature)
from .geometry import (Box2D, Box3D, CameraCalib, RigidTransform, apply_transform,
                       iou_2d, iou_3d, iou_bev, project_box, wrap_angle)
from .metrics import EvalReport, evaluate, evaluate_clear, evaluate_hota
from .motion import (EgoPose, KalmanParams, KalmanState, ego_compensate, kf_init,
                     kf_predict, kf_update)
from .oracle import (Detection, FramePacket, OracleResponse, ReplayOracle2D,
                     ReplayOracle3D, SyntheticOracle2D, SyntheticOracle3D)
from .pipeline import RunReport, Tracker, run_sequence
from .simworld import (Scenario, SequenceBundle, build_preset, generate,
                       visible_fraction)
from .trackman import Track, postprocess_remote, spawn_tracks, step_lifecycle

__version__ = "0.1.0"
