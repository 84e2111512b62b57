"""
In-memory driving sequences
A FrameBundle holds one frame's rasters and pose; a Sequence orders them with shared intrinsics
"""

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import InvalidInputError
from .geometry import CameraIntrinsics, DepthMap, PoseSE3, check_raster
from .labels import LabelConfig
from .utils.log import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class FrameBundle:
    """Depth, semantic labels, camera-to-world pose and an optional RGB raster for one frame"""
    depth: DepthMap
    semantic: np.ndarray
    pose: PoseSE3
    rgb: Optional[np.ndarray] = None

    def __post_init__(self):
        semantic = np.asarray(self.semantic)
        if semantic.ndim != 2 or not np.issubdtype(semantic.dtype, np.integer):
            raise InvalidInputError("semantic map must be a 2-D integer raster")
        if semantic.shape != self.depth.shape:
            raise InvalidInputError(
                f"semantic {semantic.shape} and depth {self.depth.shape} rasters differ"
            )
        if self.rgb is not None:
            rgb = np.asarray(self.rgb)
            if rgb.shape[:2] != semantic.shape or rgb.ndim not in (2, 3):
                raise InvalidInputError(f"rgb raster {rgb.shape} does not match {semantic.shape}")
            object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "semantic", semantic)

    @property
    def shape(self):
        return self.semantic.shape

    def __eq__(self, other):
        if not isinstance(other, FrameBundle):
            return NotImplemented
        same_rgb = (self.rgb is None and other.rgb is None) or (
            self.rgb is not None and other.rgb is not None and np.array_equal(self.rgb, other.rgb)
        )
        return (self.depth == other.depth
                and np.array_equal(self.semantic, other.semantic)
                and self.pose == other.pose
                and same_rgb)


@dataclass(frozen=True, eq=False)
class Sequence:
    """Ordered frames sharing one camera; frame i is frames[i]"""
    K: CameraIntrinsics
    fps: float
    frames: List[FrameBundle]
    labels: LabelConfig = field(default_factory=LabelConfig.default)

    def __post_init__(self):
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise InvalidInputError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "frames", list(self.frames))
        for index, frame in enumerate(self.frames):
            check_raster(self.K, **{f"frame {index}": frame.semantic})
            self.labels.validate(frame.semantic, f"frame {index} semantic map")

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, index: int) -> FrameBundle:
        return self.frames[index]

    def __eq__(self, other):
        if not isinstance(other, Sequence):
            return NotImplemented
        return (self.K == other.K and self.fps == other.fps and self.labels == other.labels
                and len(self.frames) == len(other.frames)
                and all(a == b for a, b in zip(self.frames, other.frames)))

    def with_frames(self, frames: List[FrameBundle], fps: Optional[float] = None) -> "Sequence":
        return replace(self, frames=frames, fps=self.fps if fps is None else fps)


def resample_sequence(seq: Sequence, fps: float) -> Sequence:
    """
    Keep the frame nearest to each timestamp of a slower frame rate

    Upsampling is not supported; an equal rate returns the sequence unchanged.
    """
    if not (fps > 0 and math.isfinite(fps)):
        raise InvalidInputError(f"target fps must be positive, got {fps}")
    if math.isclose(fps, seq.fps, rel_tol=1e-9):
        return seq
    if fps > seq.fps:
        raise InvalidInputError(f"cannot resample {seq.fps} fps up to {fps} fps")

    step = seq.fps / fps
    count = int(math.floor((len(seq) - 1) / step + 1e-9)) + 1
    picks = []
    for k in range(count):
        index = min(int(math.floor(k * step + 0.5)), len(seq) - 1)
        if not picks or index != picks[-1]:
            picks.append(index)
    logger.info("resampled %d frames at %.3g fps to %d frames at %.3g fps",
                len(seq), seq.fps, len(picks), fps)
    return seq.with_frames([seq.frames[i] for i in picks], fps=fps)
