"""Multi-rate EKF odometry fusion (IPS + wheel encoders + IMU) and evaluation tools."""

from fusodom.core import (
    ContractViolationError,
    FusodomError,
    InitializationError,
    InvalidArgumentError,
    Measurement,
    NoOverlapError,
    NumericalFailureError,
    OutOfOrderError,
    Pose2D,
    SensorKind,
    Trajectory,
    body_to_world,
    wrap_angle,
)

__version__ = "0.1.0"
