"""Unsupervised LiDAR point-cloud odometry.

Pipeline: geometry-aware point selection -> azimuthal view partitioning
-> two-hop channel-wise Saab features -> per-view feature matching with
RANSAC -> closed-form rigid motion -> trajectory accumulation, plus
KITTI-style evaluation and a synthetic-sequence generator.
"""

from .config import RunConfig, load_config
from .errors import (
    DegenerateGeometry,
    DegenerateNeighborhood,
    DegenerateTraining,
    EmptySelection,
    InsufficientPoints,
    LengthMismatch,
    MalformedPose,
    MalformedScan,
    ModelMismatch,
    NoCorrespondences,
    OdometryError,
    PathTooShort,
    RansacFailure,
    WriteError,
)
from .evaluate import (
    OdometryErrors,
    evaluate_trajectories,
    final_drift,
    kitti_errors,
    path_length,
    relative_pose_errors,
    relative_pose_rmse,
)
from .features import (
    FeatureConfig,
    SaabModel,
    extract_features,
    load_model,
    save_model,
    train_saab,
)
from .geometry import PointCloud, Pose, RigidMotion, Trajectory
from .kitti_io import (
    AxisMapping,
    ScanSequence,
    load_sequence,
    read_pose_file,
    read_velodyne_scan,
    write_trajectory,
    write_velodyne_scan,
)
from .matching import Matches, RansacConfig, RansacResult, match_views, ransac_filter
from .motion import CorrespondenceCloud, accumulate, estimate_rigid_motion
from .pipeline import (
    FrameDiagnostics,
    OdometryResult,
    run_odometry,
    train_model,
)
from .sampling import (
    EigenFeatures,
    SampleSelection,
    SamplingConfig,
    SamplingStrategy,
    eigen_features,
    select_points,
)
from .synth import SceneConfig, generate_sequence
from .views import View, ViewPartition, azimuth_deg, partition_views, view_labels

__version__ = "0.1.0"

__all__ = [
    "AxisMapping",
    "CorrespondenceCloud",
    "DegenerateGeometry",
    "DegenerateNeighborhood",
    "DegenerateTraining",
    "EigenFeatures",
    "EmptySelection",
    "FeatureConfig",
    "FrameDiagnostics",
    "InsufficientPoints",
    "LengthMismatch",
    "MalformedPose",
    "MalformedScan",
    "Matches",
    "ModelMismatch",
    "NoCorrespondences",
    "OdometryError",
    "OdometryErrors",
    "OdometryResult",
    "PathTooShort",
    "PointCloud",
    "Pose",
    "RansacConfig",
    "RansacFailure",
    "RansacResult",
    "RigidMotion",
    "RunConfig",
    "SaabModel",
    "SampleSelection",
    "SamplingConfig",
    "SamplingStrategy",
    "ScanSequence",
    "SceneConfig",
    "Trajectory",
    "View",
    "ViewPartition",
    "WriteError",
    "accumulate",
    "azimuth_deg",
    "eigen_features",
    "estimate_rigid_motion",
    "evaluate_trajectories",
    "extract_features",
    "final_drift",
    "generate_sequence",
    "kitti_errors",
    "load_config",
    "load_model",
    "load_sequence",
    "match_views",
    "partition_views",
    "path_length",
    "ransac_filter",
    "read_pose_file",
    "read_velodyne_scan",
    "relative_pose_errors",
    "relative_pose_rmse",
    "run_odometry",
    "save_model",
    "select_points",
    "train_model",
    "train_saab",
    "view_labels",
    "write_trajectory",
    "write_velodyne_scan",
]
