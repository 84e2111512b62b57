"""
On-disk sequence format
Reads and writes sequence directories, generated label rasters and landmark files

A sequence directory holds:
    intrinsics.txt      one line "fx fy cx cy width height"
    poses.txt           one line per frame, 12 numbers, row-major 3x4 camera-to-world
    labels.cfg          key=value lines: traversable_ids, sky_ids, obstacle_ids[, other_ids]
    sequence.cfg        optional, "fps=<float>" (default 5.0)
    depth/%06d.png      16-bit, metres = raw / 256, 0 = invalid
    semantic/%06d.png   8-bit class IDs
    rgb/%06d.png        optional 8-bit RGB
"""

import math
import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from PIL import Image

from ..align import LandmarkSample
from ..errors import (
    BlindSpotError, FrameCountMismatchError, InvalidInputError, InvariantViolationError,
    MalformedLineError, MissingFileError, OutputWriteError, RasterMismatchError,
    SequenceFormatError,
)
from ..geometry import CameraIntrinsics, DepthMap, PoseSE3
from ..labels import LabelConfig
from ..sequence import FrameBundle, Sequence
from .log import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

DEPTH_SCALE = 256.0
DEPTH_MAX_RAW = np.iinfo(np.uint16).max
DEFAULT_FPS = 5.0
MASK_ON = 255

INTRINSICS_FILE = "intrinsics.txt"
POSES_FILE = "poses.txt"
LABELS_FILE = "labels.cfg"
SEQUENCE_FILE = "sequence.cfg"
DEPTH_DIR = "depth"
SEMANTIC_DIR = "semantic"
RGB_DIR = "rgb"

BLINDSPOT_DIR = "blindspot"
VISIBILITY_DIR = "visibility"
DEBUG_DIR = "debug"

LABEL_KEYS = ("traversable_ids", "sky_ids", "obstacle_ids", "other_ids")
REQUIRED_LABEL_KEYS = ("traversable_ids", "sky_ids", "obstacle_ids")

_FRAME_NAME = re.compile(r"^(\d{6})\.png$")


def frame_name(index: int) -> str:
    return f"{index:06d}.png"


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingFileError("required file is missing", path)
    return path


def _content_lines(path: Path) -> Iterable[Tuple[int, str]]:
    """Non-blank lines without '#' comments, numbered from 1"""
    for line_no, raw in enumerate(_require(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line_no, line


def _floats(path: Path, line_no: int, line: str, count: int) -> List[float]:
    fields = line.split()
    if len(fields) != count:
        raise MalformedLineError(path, line_no, f"expected {count} numbers, found {len(fields)}")
    try:
        return [float(f) for f in fields]
    except ValueError as e:
        raise MalformedLineError(path, line_no, str(e)) from None


# Text files

def read_intrinsics(path: PathLike) -> CameraIntrinsics:
    path = Path(path)
    lines = list(_content_lines(path))
    if len(lines) != 1:
        raise MalformedLineError(path, lines[1][0] if len(lines) > 1 else 1,
                                 "expected exactly one line 'fx fy cx cy width height'")
    line_no, line = lines[0]
    fx, fy, cx, cy, width, height = _floats(path, line_no, line, 6)
    try:
        return CameraIntrinsics(fx, fy, cx, cy, width, height)
    except InvalidInputError as e:
        raise InvariantViolationError(f"line {line_no}: {e}", path) from None


def read_poses(path: PathLike) -> List[PoseSE3]:
    path = Path(path)
    poses = []
    for line_no, line in _content_lines(path):
        values = np.array(_floats(path, line_no, line, 12)).reshape(3, 4)
        try:
            poses.append(PoseSE3.from_matrix(values))
        except InvalidInputError as e:
            raise InvariantViolationError(f"line {line_no}: {e}", path) from None
    return poses


def read_label_config(path: PathLike) -> LabelConfig:
    path = Path(path)
    values: Dict[str, List[int]] = {}
    for line_no, line in _content_lines(path):
        if "=" not in line:
            raise MalformedLineError(path, line_no, "expected key=value")
        key, _, raw = (part.strip() for part in line.partition("="))
        if key not in LABEL_KEYS:
            raise MalformedLineError(path, line_no, f"unknown key {key!r}")
        if key in values:
            raise MalformedLineError(path, line_no, f"duplicate key {key!r}")
        try:
            values[key] = [int(item) for item in raw.split(",") if item.strip()]
        except ValueError:
            raise MalformedLineError(path, line_no, f"{key} must be a comma-separated list of integers") from None

    missing = [key for key in REQUIRED_LABEL_KEYS if key not in values]
    if missing:
        raise SequenceFormatError(f"missing keys {', '.join(missing)}", path)
    try:
        return LabelConfig(**{key: frozenset(ids) for key, ids in values.items()})
    except InvalidInputError as e:
        raise InvariantViolationError(str(e), path) from None


def read_fps(path: PathLike) -> float:
    path = Path(path)
    if not path.exists():
        return DEFAULT_FPS
    fps = DEFAULT_FPS
    for line_no, line in _content_lines(path):
        key, sep, raw = (part.strip() for part in line.partition("="))
        if not sep or key != "fps":
            raise MalformedLineError(path, line_no, "expected fps=<number>")
        try:
            fps = float(raw)
        except ValueError:
            raise MalformedLineError(path, line_no, f"fps {raw!r} is not a number") from None
        if not (math.isfinite(fps) and fps > 0):
            raise MalformedLineError(path, line_no, f"fps must be a positive finite number, got {raw}")
    return fps


# Rasters

def _frame_files(directory: Path) -> Dict[int, Path]:
    if not directory.is_dir():
        raise MissingFileError("raster directory is missing", directory)
    files = {}
    for entry in directory.iterdir():
        match = _FRAME_NAME.match(entry.name)
        if match:
            files[int(match.group(1))] = entry
    return files


def _contiguous(directory: Path, count: int, required: bool = True) -> Optional[List[Path]]:
    files = _frame_files(directory) if required or directory.is_dir() else {}
    if not files and not required:
        return None
    if len(files) != count:
        raise FrameCountMismatchError(f"{len(files)} rasters for {count} poses", directory)
    paths = []
    for index in range(count):
        if index not in files:
            raise MissingFileError(f"frame {index} is missing", directory / frame_name(index))
        paths.append(files[index])
    return paths


def _read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as image:
            return np.array(image)
    except OSError as e:
        raise SequenceFormatError(f"unreadable image: {e}", path) from None


def read_depth(path: PathLike) -> DepthMap:
    """16-bit depth PNG; raw 0 is invalid"""
    path = Path(path)
    raw = _read_image(path)
    if raw.ndim != 2:
        raise SequenceFormatError(f"depth image must be single-channel, got shape {raw.shape}", path)
    raw = raw.astype(np.int64)
    valid = raw > 0
    return DepthMap(np.where(valid, raw / DEPTH_SCALE, 0.0), valid)


def encode_depth(depth: DepthMap) -> np.ndarray:
    """uint16 raster; depths that round to 0 or beyond the 16-bit range are written invalid"""
    raw = np.rint(depth.filled(0.0) * DEPTH_SCALE)
    keep = depth.valid & (raw > 0) & (raw <= DEPTH_MAX_RAW)
    return np.where(keep, raw, 0).astype(np.uint16)


def read_mask(path: PathLike) -> np.ndarray:
    """8-bit mask written as 0/255 (0/1 is accepted too)"""
    path = Path(path)
    raw = _read_image(path)
    if raw.ndim != 2:
        raise SequenceFormatError(f"mask must be single-channel, got shape {raw.shape}", path)
    if not np.all((raw == 0) | (raw == 1) | (raw == MASK_ON)):
        raise SequenceFormatError("mask holds values other than 0 and 255", path)
    return raw > 0


def read_probability(path: PathLike) -> np.ndarray:
    """Probability map from .npy, or from an 8/16-bit PNG scaled by its integer range"""
    path = Path(path)
    if path.suffix == ".npy":
        try:
            prob = np.load(path).astype(np.float64)
        except (OSError, ValueError) as e:
            raise SequenceFormatError(f"unreadable array: {e}", path) from None
    else:
        raw = _read_image(path)
        if raw.dtype == np.uint8:
            prob = raw / 255.0
        else:
            prob = raw.astype(np.float64) / 65535.0
    if prob.ndim != 2 or np.any((prob < 0) | (prob > 1)):
        raise SequenceFormatError("probability map must be a 2-D raster in [0, 1]", path)
    return prob


def mask_frames(directory: PathLike, pattern: str = "*.png") -> Dict[int, Path]:
    """Frame index → file for every %06d-named file in a directory"""
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFileError("directory is missing", directory)
    files = {}
    for entry in directory.glob(pattern):
        stem = entry.stem
        if stem.isdigit() and len(stem) == 6:
            files[int(stem)] = entry
    return files


def _write_image(path: Path, array: np.ndarray) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(array).save(path)
    except OSError as e:
        raise OutputWriteError(path, e) from e
    return path


def write_mask(path: PathLike, mask: np.ndarray) -> Path:
    return _write_image(Path(path), np.where(mask, MASK_ON, 0).astype(np.uint8))


def write_depth(path: PathLike, depth: DepthMap) -> Path:
    return _write_image(Path(path), encode_depth(depth))


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise OutputWriteError(path, e) from e


# Sequences

def load_sequence(directory: PathLike) -> Sequence:
    """
    Load and validate a sequence directory

    Raises:
        MissingFileError, FrameCountMismatchError, MalformedLineError,
        RasterMismatchError, InvariantViolationError
    """
    root = Path(directory)
    if not root.is_dir():
        raise MissingFileError("sequence directory is missing", root)

    K = read_intrinsics(root / INTRINSICS_FILE)
    poses = read_poses(root / POSES_FILE)
    labels = read_label_config(root / LABELS_FILE)
    fps = read_fps(root / SEQUENCE_FILE)
    if len(poses) < 1:
        raise FrameCountMismatchError("no poses", root / POSES_FILE)

    depth_files = _contiguous(root / DEPTH_DIR, len(poses))
    semantic_files = _contiguous(root / SEMANTIC_DIR, len(poses))
    rgb_files = _contiguous(root / RGB_DIR, len(poses), required=False)

    frames = []
    for index, pose in enumerate(poses):
        depth = read_depth(depth_files[index])
        if depth.shape != K.shape:
            raise RasterMismatchError(depth_files[index], index,
                                      f"depth is {depth.shape}, intrinsics say {K.shape}")
        semantic = _read_image(semantic_files[index])
        if semantic.ndim != 2 or semantic.shape != K.shape:
            raise RasterMismatchError(semantic_files[index], index,
                                      f"semantic is {semantic.shape}, intrinsics say {K.shape}")
        try:
            labels.validate(semantic)
        except InvalidInputError as e:
            raise RasterMismatchError(semantic_files[index], index, str(e)) from None
        rgb = None
        if rgb_files is not None:
            rgb = _read_image(rgb_files[index])
            if rgb.shape[:2] != K.shape:
                raise RasterMismatchError(rgb_files[index], index,
                                          f"rgb is {rgb.shape[:2]}, intrinsics say {K.shape}")
        frames.append(FrameBundle(depth, semantic, pose, rgb))

    seq = Sequence(K, fps, frames, labels)
    logger.info("loaded %s: %d frames, %dx%d, %.3g fps", root, len(seq), K.width, K.height, fps)
    return seq


def _id_list(ids: Iterable[int]) -> str:
    return ",".join(str(i) for i in sorted(ids))


def save_sequence(seq: Sequence, directory: PathLike) -> Path:
    """Write a sequence; depth is quantised to 1/256 m and depths of 256 m or more become invalid"""
    root = Path(directory)
    K = seq.K
    _write_text(root / INTRINSICS_FILE,
                f"{K.fx:.17g} {K.fy:.17g} {K.cx:.17g} {K.cy:.17g} {K.width} {K.height}\n")
    pose_lines = []
    for frame in seq.frames:
        matrix = frame.pose.as_matrix()[:3, :]
        pose_lines.append(" ".join(f"{x:.17g}" for x in matrix.reshape(-1)))
    _write_text(root / POSES_FILE, "\n".join(pose_lines) + "\n")
    labels = seq.labels
    _write_text(root / LABELS_FILE, "".join(
        f"{key}={_id_list(getattr(labels, key))}\n" for key in LABEL_KEYS
    ))
    _write_text(root / SEQUENCE_FILE, f"fps={seq.fps:.17g}\n")

    for index, frame in enumerate(seq.frames):
        name = frame_name(index)
        write_depth(root / DEPTH_DIR / name, frame.depth)
        if frame.semantic.min(initial=0) < 0 or frame.semantic.max(initial=0) > 255:
            raise InvalidInputError(f"frame {index} has class IDs outside 0..255")
        _write_image(root / SEMANTIC_DIR / name, frame.semantic.astype(np.uint8))
        if frame.rgb is not None:
            _write_image(root / RGB_DIR / name, np.asarray(frame.rgb, dtype=np.uint8))
    logger.info("saved %d frames to %s", len(seq), root)
    return root


def save_outputs(result, directory: PathLike, debug: bool = False,
                 frame: Optional[int] = None) -> List[Path]:
    """
    Write ω and V of one BlindSpotResult as 0/255 PNGs

    With debug, the aggregated surface, raw blind spots and aggregated depth go under debug/.
    """
    root = Path(directory)
    name = frame_name(result.frame if frame is None else frame)
    written = [
        write_mask(root / BLINDSPOT_DIR / name, result.omega),
        write_mask(root / VISIBILITY_DIR / name, result.visibility),
    ]
    if debug:
        written += [
            write_mask(root / DEBUG_DIR / "surface" / name, result.aggregated_surface),
            write_mask(root / DEBUG_DIR / "raw" / name, result.raw_omega),
            write_depth(root / DEBUG_DIR / "aggregated_depth" / name, result.aggregated_depth),
        ]
    return written


# Landmarks

def read_landmarks(path: PathLike) -> List[LandmarkSample]:
    """Landmark samples from 'frame u v slam_depth mono_value' lines"""
    path = Path(path)
    samples = []
    for line_no, line in _content_lines(path):
        frame, u, v, slam_depth, mono = _floats(path, line_no, line, 5)
        if frame != int(frame) or frame < 0:
            raise MalformedLineError(path, line_no, f"frame index {frame:g} is not a non-negative integer")
        try:
            samples.append(LandmarkSample(int(frame), u, v, slam_depth, mono))
        except BlindSpotError as e:
            raise MalformedLineError(path, line_no, str(e)) from None
    return samples
