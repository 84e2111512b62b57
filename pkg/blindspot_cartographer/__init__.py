"""
Blindspot Cartographer
Self-supervised blind-spot labels for driving sequences: road regions hidden now that the
camera sees within the next T frames
"""

__version__ = "0.3.1"

from .errors import BlindSpotError
from .geometry import CameraIntrinsics, DepthMap, PoseSE3
from .labels import LabelConfig
from .pipeline import BlindSpotResult, PipelineParams, generate_frame, generate_sequence
from .sequence import FrameBundle, Sequence

__all__ = [
    "BlindSpotError",
    "BlindSpotResult",
    "CameraIntrinsics",
    "DepthMap",
    "FrameBundle",
    "LabelConfig",
    "PipelineParams",
    "PoseSE3",
    "Sequence",
    "generate_frame",
    "generate_sequence",
]
