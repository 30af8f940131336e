"""roversim: a deterministic, fully software-simulated Wi-Fi teleoperated
camera rover: device electronics, differential-drive world, lossy wireless
link, first-person video stream, gateway service and operator CLI."""

__version__ = "0.1.0"

from .kinematics import KinematicsParams, Pose2D
from .link import LinkProfile
from .protocol import CommandFrame, TelemetryFrame
from .video import FrameBuffer, RenderSettings
from .world import WorldMap

__all__ = [
    "CommandFrame",
    "FrameBuffer",
    "KinematicsParams",
    "LinkProfile",
    "Pose2D",
    "RenderSettings",
    "TelemetryFrame",
    "WorldMap",
    "__version__",
]
