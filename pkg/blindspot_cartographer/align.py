"""
Monocular depth alignment
Fits relative monocular depth to sparse metric landmarks by least squares and gates
whole videos on the correlation of that fit
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Tuple, Union

import numpy as np

from .errors import DegenerateFitError, InvalidInputError
from .geometry import DepthMap
from .utils.log import get_logger

logger = get_logger(__name__)

DEFAULT_GATE_THRESHOLD = 0.7


class DepthDomain(Enum):
    """Space in which mono values are linear in metric depth"""
    DEPTH = "depth"
    INVERSE_DEPTH = "inverse-depth"

    def forward(self, depth: np.ndarray) -> np.ndarray:
        depth = np.asarray(depth, dtype=np.float64)
        return depth if self is DepthDomain.DEPTH else 1.0 / depth

    def inverse(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self is DepthDomain.DEPTH:
            return values
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1.0 / values


@dataclass(frozen=True)
class LandmarkSample:
    """A SLAM landmark observed at a pixel, paired with the mono value there"""
    frame: int
    u: float
    v: float
    slam_depth: float
    mono_value: float

    def __post_init__(self):
        if not (math.isfinite(self.slam_depth) and self.slam_depth > 0):
            raise InvalidInputError(f"landmark depth must be positive, got {self.slam_depth}")
        if not math.isfinite(self.mono_value):
            raise InvalidInputError(f"mono value must be finite, got {self.mono_value}")

    @property
    def pixel(self) -> Tuple[float, float]:
        return (self.u, self.v)


@dataclass(frozen=True)
class AlignmentFit:
    scale: float
    shift: float
    pearson_r: float
    n: int
    domain: DepthDomain = DepthDomain.INVERSE_DEPTH

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInputError(f"a fit needs at least two samples, got {self.n}")
        if not abs(self.pearson_r) <= 1.0:
            raise InvalidInputError(f"correlation {self.pearson_r} outside [-1, 1]")

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "shift": self.shift,
            "pearson_r": self.pearson_r,
            "n": self.n,
            "domain": self.domain.value,
        }


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Correlation coefficient; 0.0 when y has no spread"""
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _sample_arrays(samples: Iterable[LandmarkSample]) -> Tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    mono = np.array([s.mono_value for s in samples], dtype=np.float64)
    depth = np.array([s.slam_depth for s in samples], dtype=np.float64)
    return mono, depth


def fit_alignment(samples: Iterable[LandmarkSample],
                  domain: DepthDomain = DepthDomain.INVERSE_DEPTH,
                  fit_shift: bool = True) -> AlignmentFit:
    """
    Least-squares fit of g(slam_depth) = scale · mono_value + shift

    g is the identity in the depth domain and 1/d in the inverse-depth domain.
    With fit_shift=False the shift is pinned at zero.

    Raises:
        DegenerateFitError: fewer than two samples, or mono values without spread
    """
    mono, depth = _sample_arrays(samples)
    n = mono.size
    if n < 2:
        raise DegenerateFitError(f"alignment needs at least 2 landmarks, got {n}")
    if np.ptp(mono) == 0.0:
        raise DegenerateFitError(f"all {n} mono values equal {mono[0]:g}")

    target = domain.forward(depth)
    if fit_shift:
        design = np.column_stack([mono, np.ones_like(mono)])
        (scale, shift), *_ = np.linalg.lstsq(design, target, rcond=None)
    else:
        (scale,), *_ = np.linalg.lstsq(mono[:, None], target, rcond=None)
        shift = 0.0

    fit = AlignmentFit(
        scale=float(scale),
        shift=float(shift),
        pearson_r=pearson(mono, target),
        n=n,
        domain=domain,
    )
    logger.info("aligned %d landmarks in %s domain: scale=%.6g shift=%.6g r=%.4f",
                n, domain.value, fit.scale, fit.shift, fit.pearson_r)
    return fit


def residual_sum(fit: AlignmentFit, samples: Iterable[LandmarkSample]) -> float:
    mono, depth = _sample_arrays(samples)
    residual = fit.domain.forward(depth) - (fit.scale * mono + fit.shift)
    return float(np.dot(residual, residual))


def gate_video(fit: AlignmentFit, threshold: float = DEFAULT_GATE_THRESHOLD) -> bool:
    """True when the video is kept (pearson_r ≥ threshold)"""
    return fit.pearson_r >= threshold


def apply_alignment(mono: Union[DepthMap, np.ndarray], fit: AlignmentFit) -> DepthMap:
    """
    Metric depth from a mono map

    Depth domain gives scale·v + shift; inverse-depth gives 1 / (scale·v + shift).
    Non-positive or non-finite results are marked invalid.
    """
    if isinstance(mono, DepthMap):
        values, valid = mono.values, mono.valid
    else:
        values = np.asarray(mono, dtype=np.float64)
        valid = np.isfinite(values)
    if values.ndim != 2:
        raise InvalidInputError(f"mono map must be 2-D, got shape {values.shape}")

    with np.errstate(invalid="ignore", over="ignore"):
        metric = fit.domain.inverse(fit.scale * values + fit.shift)
    ok = valid & np.isfinite(metric) & (metric > 0)
    return DepthMap(np.where(ok, metric, 0.0), ok)


def samples_for_frames(samples: Iterable[LandmarkSample], frames: Iterable[int]
                       ) -> List[LandmarkSample]:
    wanted = set(frames)
    return [s for s in samples if s.frame in wanted]
