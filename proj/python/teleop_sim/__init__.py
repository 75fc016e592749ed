"""Python bindings for the teleoperation simulator."""

from ._core import (
    ConfigError,
    JointLimitError,
    MalformedLog,
    analyze,
    butterworth_lowpass,
    coupling_forces,
    default_config,
    follower_to_leader,
    forward_kinematics,
    gravity_torques,
    leader_to_follower,
    lowpass,
    normalize_config,
    point_jacobian,
    remove_outliers,
    run_session,
    sha256_file,
    sparc,
    wire_size,
)

__all__ = [
    "ConfigError",
    "JointLimitError",
    "MalformedLog",
    "analyze",
    "butterworth_lowpass",
    "coupling_forces",
    "default_config",
    "follower_to_leader",
    "forward_kinematics",
    "gravity_torques",
    "leader_to_follower",
    "lowpass",
    "normalize_config",
    "point_jacobian",
    "remove_outliers",
    "run_session",
    "sha256_file",
    "sparc",
    "wire_size",
]
