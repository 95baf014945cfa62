"""Exception types raised across the odometry pipeline."""


class OdometryError(Exception):
    """Base class for all pipeline errors."""


class MalformedScan(OdometryError):
    """A LiDAR scan file violates the binary layout or holds non-finite data."""


class MalformedPose(OdometryError):
    """A pose or calibration entry is not a valid rigid transform."""


class WriteError(OdometryError):
    """An output file could not be written."""


class DegenerateNeighborhood(OdometryError):
    """All neighbors of a point coincide; local eigen-features are undefined."""


class EmptySelection(OdometryError):
    """Geometry-aware filtering removed every point of a cloud."""


class InsufficientPoints(OdometryError):
    """An operation was given fewer points than it needs."""


class NoCorrespondences(OdometryError):
    """Feature matching produced no point pairs."""


class RansacFailure(OdometryError):
    """No RANSAC iteration reached the minimum inlier count."""


class DegenerateGeometry(OdometryError):
    """Correspondences are rank-deficient; the rotation is unobservable."""


class DegenerateTraining(OdometryError):
    """Feature training saw zero variance in every input channel."""


class ModelMismatch(OdometryError):
    """A feature model is incompatible with the data it was applied to."""


class LengthMismatch(OdometryError):
    """Predicted and ground-truth trajectories differ in length."""


class PathTooShort(OdometryError):
    """The ground-truth path is shorter than the smallest evaluation segment."""
