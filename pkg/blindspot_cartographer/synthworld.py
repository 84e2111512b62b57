"""
Synthetic road world
A ground plane, axis-aligned box occluders and a camera trajectory, rendered to exact
depth, semantic and pose inputs, plus ray-cast oracles for true and T-frame blind spots.

The world shares the camera axes: X right, Y down, Z forward. The ground is the plane
Y = ground_y, so cameras fly at Y < ground_y.
"""

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence as Seq, Tuple, Union

import numpy as np

from .errors import InvalidInputError, SequenceFormatError, WindowUnderflowError
from .geometry import BinaryMask, CameraIntrinsics, DepthMap, PoseSE3, project_points
from .labels import LabelConfig, RoadLabel
from .sequence import FrameBundle, Sequence
from .ui.colors import colorize_labels
from .utils.log import get_logger

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = get_logger(__name__)

# Segment parameters this close to either end do not count as blocked
SEGMENT_EPS = 1e-9

SAMPLE_CAMERA = CameraIntrinsics(fx=80.0, fy=80.0, cx=79.5, cy=59.5, width=160, height=120)
SAMPLE_FPS = 5.0
SAMPLE_FRAMES = 40


@dataclass(frozen=True)
class Box:
    """Axis-aligned occluder"""
    center: Tuple[float, float, float]
    size: Tuple[float, float, float]
    label: int = RoadLabel.CAR

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        size = tuple(float(s) for s in self.size)
        if len(center) != 3 or len(size) != 3:
            raise InvalidInputError("box center and size must be 3-vectors")
        if not all(math.isfinite(c) for c in center + size):
            raise InvalidInputError("box center and size must be finite")
        if min(size) <= 0:
            raise InvalidInputError(f"box extents must be positive, got {size}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "label", int(self.label))

    @classmethod
    def on_ground(cls, x: float, z: float, size: Tuple[float, float, float], ground_y: float,
                  label: int = RoadLabel.CAR) -> "Box":
        """Box resting on the ground plane with its footprint centred at (x, z)"""
        return cls((x, ground_y - size[1] / 2.0, z), size, label)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.center) - np.array(self.size) / 2.0

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.center) + np.array(self.size) / 2.0

    def contains(self, point: np.ndarray) -> bool:
        point = np.asarray(point, dtype=np.float64)
        return bool(np.all(point > self.lo) and np.all(point < self.hi))


def slab_interval(origins: np.ndarray, directions: np.ndarray, lo: np.ndarray,
                  hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Parameter interval [near, far] of rays origin + s·direction inside an axis-aligned box

    The ray misses the box wherever near > far. Axis-parallel directions are handled
    exactly: inside the slab they impose no bound, outside it they exclude every s.
    """
    origins = np.asarray(origins, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    parallel = directions == 0.0
    safe = np.where(parallel, 1.0, directions)
    t0 = (lo - origins) / safe
    t1 = (hi - origins) / safe
    inside = (origins >= lo) & (origins <= hi)

    low = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t0, t1))
    high = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t0, t1))
    return low.max(axis=-1), high.min(axis=-1)


@dataclass(frozen=True, eq=False)
class SynthScene:
    """Ground plane, boxes and trajectory; everything render and the oracle need"""
    K: CameraIntrinsics
    trajectory: Tuple[PoseSE3, ...]
    boxes: Tuple[Box, ...] = ()
    ground_y: float = 1.5
    road_half_width: float = 3.5
    fps: float = SAMPLE_FPS
    name: str = "scene"
    labels: LabelConfig = field(default_factory=LabelConfig.default)

    def __post_init__(self):
        object.__setattr__(self, "trajectory", tuple(self.trajectory))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if len(self.trajectory) < 2:
            raise InvalidInputError(f"trajectory needs at least 2 poses, got {len(self.trajectory)}")
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise InvalidInputError(f"fps must be positive, got {self.fps}")
        if not (self.road_half_width >= 0):
            raise InvalidInputError("road_half_width must be non-negative")
        for index, pose in enumerate(self.trajectory):
            position = pose.position
            if not position[1] < self.ground_y:
                raise InvalidInputError(f"camera {index} is not above the ground plane")
            for box in self.boxes:
                if box.contains(position):
                    raise InvalidInputError(f"camera {index} sits inside a box at {box.center}")
        for box in self.boxes:
            if box.label not in self.labels.known_ids:
                raise InvalidInputError(f"box label {box.label} is not in the label table")

    def __len__(self) -> int:
        return len(self.trajectory)

    def render(self, t: int) -> FrameBundle:
        return render(self, t)

    def to_sequence(self) -> Sequence:
        """Render every frame into an in-memory Sequence"""
        frames = [render(self, t) for t in range(len(self))]
        logger.info("rendered scene %r: %d frames at %dx%d", self.name, len(frames),
                    self.K.width, self.K.height)
        return Sequence(self.K, self.fps, frames, self.labels)


@dataclass(frozen=True, eq=False)
class OracleMaps:
    """Ray-cast ground truth for one frame"""
    true_blind: BinaryMask
    tframe_blind: BinaryMask
    road_visible: BinaryMask

    def __post_init__(self):
        if np.any(self.tframe_blind & ~self.true_blind):
            raise InvalidInputError("T-frame blind spots must lie inside the true blind spots")
        if np.any(self.tframe_blind & self.road_visible):
            raise InvalidInputError("T-frame blind spots overlap visible road")


@dataclass(frozen=True)
class _RayHits:
    origin: np.ndarray
    directions: np.ndarray
    plane_s: np.ndarray
    box_s: np.ndarray
    box_index: np.ndarray


def _cast_rays(scene: SynthScene, pose: PoseSE3) -> _RayHits:
    # Camera rays have unit Z, so the ray parameter of a hit is its camera depth
    directions = scene.K.pixel_rays().reshape(-1, 3) @ pose.rotation.T
    origin = pose.position

    down = directions[:, 1] > 0
    plane_s = np.full(directions.shape[0], np.inf)
    plane_s[down] = (scene.ground_y - origin[1]) / directions[down, 1]

    box_s = np.full(directions.shape[0], np.inf)
    box_index = np.full(directions.shape[0], -1, dtype=np.int64)
    for index, box in enumerate(scene.boxes):
        near, far = slab_interval(origin, directions, box.lo, box.hi)
        s = np.where((near <= far) & (far > 0), np.maximum(near, 0.0), np.inf)
        closer = s < box_s
        box_s[closer] = s[closer]
        box_index[closer] = index
    return _RayHits(origin, directions, plane_s, box_s, box_index)


def _check_frame(scene: SynthScene, t: int) -> None:
    if not 0 <= t < len(scene):
        raise InvalidInputError(f"frame {t} outside a {len(scene)}-frame trajectory")


def render(scene: SynthScene, t: int) -> FrameBundle:
    """
    Exact depth, semantic labels, pose and a flat-shaded RGB raster for frame t

    Depth is the camera Z of the first hit; pixels that hit nothing are sky with invalid depth.
    Ground within road_half_width of X = 0 is road, the rest sidewalk.
    """
    _check_frame(scene, t)
    pose = scene.trajectory[t]
    hits = _cast_rays(scene, pose)

    ground_first = np.isfinite(hits.plane_s) & (hits.plane_s <= hits.box_s)
    box_first = np.isfinite(hits.box_s) & ~ground_first
    depth = np.where(ground_first, hits.plane_s, np.where(box_first, hits.box_s, 0.0))

    semantic = np.full(depth.shape, int(RoadLabel.SKY), dtype=np.int64)
    ground_x = hits.origin[0] + hits.plane_s * hits.directions[:, 0]
    on_road = np.abs(np.where(ground_first, ground_x, 0.0)) <= scene.road_half_width
    semantic[ground_first & on_road] = RoadLabel.ROAD
    semantic[ground_first & ~on_road] = RoadLabel.SIDEWALK
    box_labels = np.array([box.label for box in scene.boxes] or [0], dtype=np.int64)
    semantic[box_first] = box_labels[hits.box_index[box_first]]

    shape = scene.K.shape
    semantic = semantic.reshape(shape).astype(np.uint8)
    valid = (ground_first | box_first).reshape(shape)
    return FrameBundle(
        depth=DepthMap(depth.reshape(shape), valid),
        semantic=semantic,
        pose=pose,
        rgb=colorize_labels(semantic),
    )


def segment_blocked(start: np.ndarray, ends: np.ndarray, boxes: Seq[Box]) -> np.ndarray:
    """True where the open segment start → end passes through any box"""
    ends = np.asarray(ends, dtype=np.float64)
    blocked = np.zeros(ends.shape[0], dtype=bool)
    directions = ends - start
    for box in boxes:
        near, far = slab_interval(start, directions, box.lo, box.hi)
        blocked |= (near <= far) & (far > SEGMENT_EPS) & (near < 1.0 - SEGMENT_EPS)
    return blocked


def oracle_blind_spots(scene: SynthScene, t: int, T: int) -> OracleMaps:
    """
    Ray-cast true blind spots of frame t and the part of them seen within the next T frames

    A pixel is a true blind spot when its ray meets the ground behind a box; it is a T-frame
    blind spot when that ground point P also projects into the raster of some camera t+i,
    i in 1..T, with nothing between that camera and P.
    """
    _check_frame(scene, t)
    if T < 1:
        raise InvalidInputError(f"window must be at least one frame, got {T}")
    if t + T > len(scene) - 1:
        raise WindowUnderflowError(t, T, len(scene) - 1 - T)

    hits = _cast_rays(scene, scene.trajectory[t])
    plane = np.isfinite(hits.plane_s)
    blocked = hits.box_s < hits.plane_s
    true_blind = plane & blocked
    road_visible = plane & ~blocked

    tframe = np.zeros_like(true_blind)
    candidates = np.flatnonzero(true_blind)
    if candidates.size:
        points = hits.origin + hits.plane_s[candidates, None] * hits.directions[candidates]
        seen = np.zeros(candidates.size, dtype=bool)
        height, width = scene.K.shape
        for i in range(1, T + 1):
            pose = scene.trajectory[t + i]
            u, v, _, in_front = project_points(pose.inverse().apply(points), scene.K)
            with np.errstate(invalid="ignore"):
                inside = in_front & (u >= -0.5) & (u < width - 0.5) & (v >= -0.5) & (v < height - 0.5)
            open_path = ~segment_blocked(pose.position, points, scene.boxes)
            seen |= inside & open_path
        tframe[candidates] = seen

    shape = scene.K.shape
    return OracleMaps(
        true_blind=true_blind.reshape(shape),
        tframe_blind=tframe.reshape(shape),
        road_visible=road_visible.reshape(shape),
    )


def drive_trajectory(frames: int, speed: float, fps: float = SAMPLE_FPS, yaw_rate: float = 0.0,
                     start: Tuple[float, float, float] = (0.0, 0.0, 0.0),
                     heading: float = 0.0) -> List[PoseSE3]:
    """
    Poses of a camera driving forward at `speed` m/s while turning at `yaw_rate` rad/s

    Zero speed gives a stationary camera; zero yaw rate a straight line.
    """
    if frames < 2:
        raise InvalidInputError(f"a trajectory needs at least 2 frames, got {frames}")
    step = speed / fps
    position = np.array(start, dtype=np.float64)
    poses = []
    for i in range(frames):
        pose = PoseSE3.from_yaw(heading + yaw_rate * i / fps, position)
        poses.append(pose)
        position = position + pose.rotation @ np.array([0.0, 0.0, step])
    return poses


def _sample(name: str, boxes: List[Box], speed: float = 3.0, yaw_rate: float = 0.0,
            start=(0.0, 0.0, 0.0)) -> SynthScene:
    return SynthScene(
        K=SAMPLE_CAMERA,
        trajectory=drive_trajectory(SAMPLE_FRAMES, speed, SAMPLE_FPS, yaw_rate, start),
        boxes=boxes,
        name=name,
    )


def sample_scenes() -> Dict[str, SynthScene]:
    """Named scenes with parked-car and wall occluders along straight, turning and static paths"""
    g = 1.5
    parked = Box.on_ground(2.6, 14.0, (1.8, 1.5, 4.2), g)
    return {
        "parked_car": _sample("parked_car", [parked]),
        "two_cars": _sample("two_cars", [
            parked,
            Box.on_ground(-3.0, 22.0, (1.8, 1.6, 4.5), g),
        ]),
        "low_wall": _sample("low_wall", [
            Box.on_ground(-3.2, 20.0, (0.3, 1.0, 16.0), g, RoadLabel.WALL),
        ]),
        "truck_ahead": _sample("truck_ahead", [
            Box.on_ground(1.8, 24.0, (2.5, 3.0, 8.0), g, RoadLabel.TRUCK),
        ], speed=4.0),
        "turning": _sample("turning", [parked], yaw_rate=-0.08),
        "stationary": _sample("stationary", [parked], speed=0.0),
    }


def perturb_poses(seq: Sequence, sigma_m: float, seed: int = 0) -> Sequence:
    """Add zero-mean Gaussian noise with std sigma_m metres to every camera position"""
    if sigma_m < 0:
        raise InvalidInputError(f"noise level must be non-negative, got {sigma_m}")
    rng = np.random.default_rng(seed)
    frames = []
    for frame in seq.frames:
        pose = PoseSE3(frame.pose.rotation, frame.pose.translation + rng.normal(0.0, sigma_m, 3))
        frames.append(FrameBundle(frame.depth, frame.semantic, pose, frame.rgb))
    return seq.with_frames(frames)


def perturb_depth(seq: Sequence, sigma_rel: float, seed: int = 0) -> Sequence:
    """Scale every valid depth by (1 + N(0, sigma_rel)); depths pushed non-positive become invalid"""
    if sigma_rel < 0:
        raise InvalidInputError(f"noise level must be non-negative, got {sigma_rel}")
    rng = np.random.default_rng(seed)
    frames = []
    for frame in seq.frames:
        noisy = frame.depth.values * (1.0 + rng.normal(0.0, sigma_rel, frame.depth.shape))
        valid = frame.depth.valid & (noisy > 0)
        depth = DepthMap(np.where(valid, noisy, 0.0), valid)
        frames.append(FrameBundle(depth, frame.semantic, frame.pose, frame.rgb))
    return seq.with_frames(frames)


def _vector(data: Dict[str, Any], key: str, default=None) -> Tuple[float, float, float]:
    value = data.get(key, default)
    if value is None or len(value) != 3:
        raise InvalidInputError(f"{key} must be a list of three numbers")
    return tuple(float(c) for c in value)


def _label(value: Union[int, str]) -> int:
    if isinstance(value, str):
        try:
            return int(RoadLabel[value.upper()])
        except KeyError:
            raise InvalidInputError(f"unknown label name {value!r}") from None
    return int(value)


def scene_from_dict(data: Dict[str, Any], name: str = "scene") -> SynthScene:
    """
    Build a scene from parsed TOML

    Keys: fps, ground_y, road_half_width, a [camera] table (fx fy cx cy width height),
    [[boxes]] with center or footprint (x, z), size and label, and a [trajectory] table
    with either explicit poses (12 numbers each, row-major 3x4) or frames, speed, yaw_rate,
    start and heading.
    """
    ground_y = float(data.get("ground_y", 1.5))
    fps = float(data.get("fps", SAMPLE_FPS))

    camera = data.get("camera", {})
    base = SAMPLE_CAMERA
    K = CameraIntrinsics(
        fx=float(camera.get("fx", base.fx)),
        fy=float(camera.get("fy", base.fy)),
        cx=float(camera.get("cx", base.cx)),
        cy=float(camera.get("cy", base.cy)),
        width=int(camera.get("width", base.width)),
        height=int(camera.get("height", base.height)),
    )

    boxes = []
    for entry in data.get("boxes", []):
        size = _vector(entry, "size")
        label = _label(entry.get("label", int(RoadLabel.CAR)))
        if "center" in entry:
            boxes.append(Box(_vector(entry, "center"), size, label))
        else:
            footprint = entry.get("footprint")
            if footprint is None or len(footprint) != 2:
                raise InvalidInputError("a box needs a center or a two-number footprint")
            boxes.append(Box.on_ground(float(footprint[0]), float(footprint[1]), size,
                                       ground_y, label))

    path = data.get("trajectory", {})
    if "poses" in path:
        trajectory = [PoseSE3.from_matrix(np.asarray(p, dtype=np.float64).reshape(3, 4))
                      for p in path["poses"]]
    else:
        trajectory = drive_trajectory(
            frames=int(path.get("frames", SAMPLE_FRAMES)),
            speed=float(path.get("speed", 3.0)),
            fps=fps,
            yaw_rate=float(path.get("yaw_rate", 0.0)),
            start=_vector(path, "start", (0.0, 0.0, 0.0)),
            heading=float(path.get("heading", 0.0)),
        )

    return SynthScene(
        K=K,
        trajectory=trajectory,
        boxes=boxes,
        ground_y=ground_y,
        road_half_width=float(data.get("road_half_width", 3.5)),
        fps=fps,
        name=str(data.get("name", name)),
    )


def load_scene(path: Union[str, Path]) -> SynthScene:
    """Read a TOML scene description"""
    path = Path(path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError:
        raise SequenceFormatError("scene file not found", path) from None
    except tomllib.TOMLDecodeError as e:
        raise SequenceFormatError(f"invalid TOML: {e}", path) from None
    try:
        return scene_from_dict(data, name=path.stem)
    except (TypeError, ValueError) as e:
        raise SequenceFormatError(str(e), path) from None


def resolve_scene(scene: str) -> SynthScene:
    """A sample scene by name, or a TOML scene file by path"""
    samples = sample_scenes()
    if scene in samples:
        return samples[scene]
    path = Path(scene)
    if path.suffix != ".toml" and not path.exists():
        raise InvalidInputError(
            f"unknown scene {scene!r}; samples are {', '.join(sorted(samples))}"
        )
    return load_scene(path)
