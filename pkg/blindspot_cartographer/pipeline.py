"""
T-frame blind-spot generation
Traversable extraction, warped aggregation over the next T frames, negation, depth
rectification, small-component removal and the visibility mask
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence as Seq, Tuple

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError, WindowUnderflowError
from .geometry import (
    BinaryMask, CameraIntrinsics, DepthMap, as_mask, check_raster, check_same_shape,
    forward_warp, relative_pose,
)
from .labels import LabelConfig
from .performance import performance_monitor
from .sequence import Sequence
from .utils.log import get_logger

logger = get_logger(__name__)

# 8-connectivity
COMPONENT_STRUCTURE = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class PipelineParams:
    """
    Generation parameters; window T = round(t_seconds · fps) frames

    landing_only decides blind-spot membership from the pixel each warped point lands
    nearest to; when False the whole 2×2 splat counts.
    """
    t_seconds: float = 5.0
    fps: float = 5.0
    l_d: float = 1.0
    min_area: int = 100
    vis_distance: float = 16.0
    rectify: bool = True
    suppress_sky: bool = True
    landing_only: bool = True

    def __post_init__(self):
        for name in ("t_seconds", "fps", "l_d", "vis_distance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be positive, got {value}")
        if int(self.min_area) != self.min_area or self.min_area < 1:
            raise InvalidInputError(f"min_area must be a positive integer, got {self.min_area}")
        object.__setattr__(self, "min_area", int(self.min_area))
        if self.window < 1:
            raise InvalidInputError(
                f"t_seconds·fps = {self.t_seconds * self.fps:g} rounds to a window below one frame"
            )

    @property
    def window(self) -> int:
        return int(math.floor(self.t_seconds * self.fps + 0.5))

    @classmethod
    def with_window(cls, frames: int, fps: float = 5.0, **overrides) -> "PipelineParams":
        """Parameters whose window is exactly `frames` at the given rate"""
        return cls(t_seconds=frames / fps, fps=fps, **overrides)


@dataclass(frozen=True, eq=False)
class BlindSpotResult:
    """Blind spots of one frame and the intermediate rasters they came from"""
    frame: int
    omega: BinaryMask
    visibility: BinaryMask
    aggregated_surface: BinaryMask
    aggregated_depth: DepthMap
    support_count: np.ndarray
    raw_omega: BinaryMask
    landed_surface: Optional[BinaryMask] = None
    stats: Dict[str, int] = field(default_factory=dict)

    def invariant_violations(self, visible_traversable: BinaryMask) -> List[str]:
        """Empty when ω ∧ r = 0, ω ⊆ landed ⊆ s and M = 0 ⇒ s = 0 all hold"""
        problems = []
        if np.any(self.omega & visible_traversable):
            problems.append("blind spots overlap visible traversable pixels")
        if np.any(self.omega & ~self.aggregated_surface):
            problems.append("blind spots outside the aggregated surface")
        if self.landed_surface is not None:
            if np.any(self.omega & ~self.landed_surface):
                problems.append("blind spots outside the landed surface")
            if np.any(self.landed_surface & ~self.aggregated_surface):
                problems.append("landed surface outside the aggregated surface")
        if np.any(self.aggregated_surface & (self.support_count == 0)):
            problems.append("aggregated surface without support")
        return problems


def traversable(sem: np.ndarray, cfg: LabelConfig) -> BinaryMask:
    """1 exactly where the label is traversable (road, pavement)"""
    sem = np.asarray(sem)
    if sem.ndim != 2:
        raise InvalidInputError(f"semantic map must be 2-D, got shape {sem.shape}")
    cfg.validate(sem)
    return cfg.is_member(sem, cfg.traversable_ids)


def aggregate_surface(warped: Seq[Tuple[BinaryMask, DepthMap]]
                      ) -> Tuple[BinaryMask, DepthMap, np.ndarray]:
    """
    OR the warped traversable masks; average their depths over contributing frames

    Returns (s, d_a, M) with M the per-pixel count of contributing masks.
    """
    if not warped:
        raise InvalidInputError("aggregation needs at least one warped frame")

    masks = []
    for index, (mask, depth) in enumerate(warped):
        mask = as_mask(mask, f"warped mask {index}")
        check_same_shape(first=warped[0][0], **{f"mask_{index}": mask, f"depth_{index}": depth.values})
        if np.any(mask & ~depth.valid):
            raise InvalidInputError(f"warped mask {index} is set where its depth is invalid")
        masks.append((mask, depth))

    count = np.zeros(masks[0][0].shape, dtype=np.int64)
    depth_sum = np.zeros(masks[0][0].shape)
    for mask, depth in masks:
        count += mask
        depth_sum += np.where(mask, depth.values, 0.0)

    surface = count > 0
    mean_depth = np.divide(depth_sum, count, out=np.zeros_like(depth_sum), where=surface)
    return surface, DepthMap(mean_depth, surface), count


def raw_blind_spots(s: BinaryMask, r_t: BinaryMask) -> BinaryMask:
    """s ∧ ¬r_t"""
    s = as_mask(s, "aggregated surface")
    r_t = as_mask(r_t, "traversable mask")
    check_same_shape(s=s, r_t=r_t)
    return s & ~r_t


def rectify_by_depth(omega_raw: BinaryMask, d_t: DepthMap, d_a: DepthMap,
                     l_d: float) -> BinaryMask:
    """
    Drop blind spots whose current depth agrees with the aggregated depth within l_d

    Pixels without a current (or aggregated) depth keep their value.
    """
    omega_raw = as_mask(omega_raw, "raw blind spots")
    check_same_shape(omega=omega_raw, d_t=d_t.values, d_a=d_a.values)
    comparable = omega_raw & d_t.valid & d_a.valid
    agree = comparable & (np.abs(d_t.values - d_a.values) < l_d)
    return omega_raw & ~agree


def remove_small_components(mask: BinaryMask, min_area: int) -> BinaryMask:
    """Zero every 8-connected component smaller than min_area pixels"""
    if min_area < 1:
        raise InvalidInputError(f"min_area must be at least 1, got {min_area}")
    mask = as_mask(mask)
    labels, count = ndimage.label(mask, structure=COMPONENT_STRUCTURE)
    if count == 0:
        return np.zeros_like(mask)
    areas = np.bincount(labels.ravel())
    keep = areas >= min_area
    keep[0] = False
    return keep[labels]


def visibility_mask(sem: np.ndarray, d_t: DepthMap, K: CameraIntrinsics,
                    cfg: LabelConfig, L: float) -> BinaryMask:
    """Sky pixels, plus pixels whose surface point lies closer than L metres to the camera"""
    if not (math.isfinite(L) and L > 0):
        raise InvalidInputError(f"visibility distance must be positive, got {L}")
    sem = np.asarray(sem)
    check_raster(K, semantic=sem, depth=d_t.values)
    cfg.validate(sem)

    distance = d_t.values * np.linalg.norm(K.pixel_rays(), axis=-1)
    near = d_t.valid & (distance < L)
    return cfg.is_member(sem, cfg.sky_ids) | near


def visible_traversable(seq: Sequence, index: int) -> BinaryMask:
    """r(·, index): traversable pixels that also carry a depth"""
    frame = seq[index]
    return traversable(frame.semantic, seq.labels) & frame.depth.valid


def last_processable_index(seq: Sequence, params: PipelineParams) -> int:
    return len(seq) - 1 - params.window


@performance_monitor
def generate_frame(seq: Sequence, t: int, params: PipelineParams,
                   traversables: Optional[Dict[int, BinaryMask]] = None) -> BlindSpotResult:
    """
    Blind spots of frame t aggregated from frames t+1 … t+T

    `traversables` optionally caches r(·, i) per frame index.
    """
    window = params.window
    if t < 0 or t >= len(seq):
        raise InvalidInputError(f"frame index {t} outside a {len(seq)}-frame sequence")
    if t + window > len(seq) - 1:
        raise WindowUnderflowError(t, window, last_processable_index(seq, params))

    def r(index: int) -> BinaryMask:
        if traversables is not None and index in traversables:
            return traversables[index]
        return visible_traversable(seq, index)

    current = seq[t]
    r_t = r(t)
    warped = []
    landed = []
    for i in range(1, window + 1):
        future = seq[t + i]
        rel = relative_pose(future.pose, current.pose)
        warped.append(forward_warp(r(t + i), future.depth, rel, seq.K))
        if params.landing_only:
            landed.append(forward_warp(r(t + i), future.depth, rel, seq.K, nearest=True))

    surface, d_a, count = aggregate_surface(warped)
    landed_surface, landed_depth = None, d_a
    if params.landing_only:
        landed_surface, landed_depth, _ = aggregate_surface(landed)
    omega_raw = raw_blind_spots(surface if landed_surface is None else landed_surface, r_t)
    omega = omega_raw
    if params.rectify:
        omega = rectify_by_depth(omega, current.depth, landed_depth, params.l_d)
    rectified = omega
    if params.suppress_sky:
        omega = omega & ~seq.labels.is_member(current.semantic, seq.labels.sky_ids)
    omega = remove_small_components(omega, params.min_area)
    visibility = visibility_mask(current.semantic, current.depth, seq.K, seq.labels,
                                 params.vis_distance)

    stats = {
        "raw": int(omega_raw.sum()),
        "rectified": int(rectified.sum()),
        "final": int(omega.sum()),
        "visible": int(visibility.sum()),
    }
    logger.debug("frame %d: raw=%d rectified=%d final=%d |V|=%d",
                 t, stats["raw"], stats["rectified"], stats["final"], stats["visible"])
    return BlindSpotResult(
        frame=t,
        omega=omega,
        visibility=visibility,
        aggregated_surface=surface,
        aggregated_depth=d_a,
        support_count=count,
        raw_omega=omega_raw,
        landed_surface=landed_surface,
        stats=stats,
    )


def generate_sequence(seq: Sequence, params: PipelineParams, jobs: int = 1,
                      frames: Optional[Iterable[int]] = None) -> Iterator[BlindSpotResult]:
    """
    Run generate_frame over a sequence with up to `jobs` worker threads

    Results come back in frame order. Frames whose window would underflow are skipped.
    """
    if jobs < 1:
        raise InvalidInputError(f"jobs must be at least 1, got {jobs}")
    last = last_processable_index(seq, params)
    wanted = range(len(seq)) if frames is None else sorted(set(frames))
    indices = [t for t in wanted if 0 <= t <= last]
    skipped = len(list(wanted)) - len(indices)
    if skipped:
        logger.info("skipping %d frame(s) without %d future frames (last processable index %d)",
                    skipped, params.window, last)

    traversables = {i: visible_traversable(seq, i) for i in range(len(seq))}
    if jobs == 1:
        for t in indices:
            yield generate_frame(seq, t, params, traversables)
        return

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(lambda t: generate_frame(seq, t, params, traversables), indices)
