"""
Pinhole camera geometry
Intrinsics, rigid camera-to-world poses, (back)projection and forward warping of masks and depths

Pixel convention: (u, v) with u rightward, v downward, integer coordinates at pixel centres.
Rasters are numpy arrays indexed [v, u], i.e. shape (height, width).
Camera frame: X right, Y down, Z forward.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidInputError

# Alias for documentation: a (height, width) numpy bool array
BinaryMask = np.ndarray

Pixel = Tuple[float, float]

# Behind-camera marker returned by project()
BEHIND_CAMERA = None

ORTHONORMAL_TOLERANCE = 1e-9

# Landing coordinates this close below an integer snap to it before flooring
SPLAT_SNAP = 1e-6
SPLAT_FOOTPRINT = ((0, 0), (1, 0), (0, 1), (1, 1))
NEAREST_FOOTPRINT = ((0, 0),)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels"""
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not all(np.isfinite([self.fx, self.fy, self.cx, self.cy])):
            raise InvalidInputError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if int(self.width) != self.width or int(self.height) != self.height:
            raise InvalidInputError("raster size must be integral")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError(f"raster size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInputError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} raster"
            )
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def shape(self) -> Tuple[int, int]:
        """Raster shape as (height, width)"""
        return (self.height, self.width)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def contains(self, u: float, v: float) -> bool:
        """True when (u, v) falls on a pixel of the raster"""
        return -0.5 <= u < self.width - 0.5 and -0.5 <= v < self.height - 0.5

    def pixel_rays(self) -> np.ndarray:
        """(H, W, 3) camera-frame ray directions scaled to unit Z, one per pixel centre"""
        v, u = np.mgrid[0:self.height, 0:self.width].astype(np.float64)
        return np.stack([
            (u - self.cx) / self.fx,
            (v - self.cy) / self.fy,
            np.ones_like(u),
        ], axis=-1)


class PoseSE3:
    """
    Rigid camera-to-world transform: x_world = rotation @ x_cam + translation

    Immutable; arrays are copied on construction and flagged read-only.
    """

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation: np.ndarray, translation: np.ndarray):
        rotation = np.array(rotation, dtype=np.float64)
        translation = np.array(translation, dtype=np.float64).reshape(-1)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise InvalidInputError(
                f"pose needs a 3x3 rotation and 3-vector translation, got {rotation.shape} and {translation.shape}"
            )
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise InvalidInputError("pose must be finite")
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > ORTHONORMAL_TOLERANCE:
            raise InvalidInputError("rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOLERANCE:
            raise InvalidInputError("rotation determinant is not +1")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    def __setattr__(self, name, value):
        raise AttributeError("PoseSE3 is immutable")

    def __eq__(self, other):
        if not isinstance(other, PoseSE3):
            return NotImplemented
        return (np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __repr__(self):
        return f"PoseSE3(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"

    def __reduce__(self):
        return (PoseSE3, (np.array(self.rotation), np.array(self.translation)))

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "PoseSE3":
        """Build from a 3x4 or 4x4 homogeneous matrix"""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape not in ((3, 4), (4, 4)):
            raise InvalidInputError(f"pose matrix must be 3x4 or 4x4, got {matrix.shape}")
        return cls(matrix[:3, :3], matrix[:3, 3])

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "PoseSE3":
        """Rotation about the (downward) Y axis; positive yaw turns the camera to the right"""
        return cls(Rotation.from_euler("y", yaw).as_matrix(), translation)

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix"""
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    @property
    def position(self) -> np.ndarray:
        """Camera centre in world coordinates"""
        return np.array(self.translation)

    def inverse(self) -> "PoseSE3":
        rot_t = self.rotation.T
        return PoseSE3(rot_t, -rot_t @ self.translation)

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        """self ∘ other: apply other first, then self"""
        return PoseSE3(self.rotation @ other.rotation,
                       self.rotation @ other.translation + self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 3) or (3,) points"""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def allclose(self, other: "PoseSE3", atol: float = 1e-9) -> bool:
        return (np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
                and np.allclose(self.translation, other.translation, rtol=0.0, atol=atol))


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel metric Z depth with an explicit validity raster"""
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = as_mask(self.valid, "depth validity")
        if values.ndim != 2 or values.shape != valid.shape:
            raise InvalidInputError(
                f"depth values {values.shape} and validity {valid.shape} must be equal 2-D rasters"
            )
        picked = values[valid]
        if not np.all(np.isfinite(picked)) or np.any(picked <= 0):
            raise InvalidInputError("valid depth values must be finite and positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "DepthMap":
        """Valid wherever the value is finite and positive; everything else becomes invalid"""
        values = np.asarray(values, dtype=np.float64)
        valid = np.isfinite(values) & (values > 0)
        return cls(np.where(valid, values, 0.0), valid)

    @classmethod
    def empty(cls, shape: Tuple[int, int]) -> "DepthMap":
        return cls(np.zeros(shape), np.zeros(shape, dtype=bool))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def filled(self, fill_value: float = 0.0) -> np.ndarray:
        """Values with invalid pixels replaced by fill_value"""
        return np.where(self.valid, self.values, fill_value)

    def __eq__(self, other):
        if not isinstance(other, DepthMap):
            return NotImplemented
        return (np.array_equal(self.valid, other.valid)
                and np.array_equal(self.filled(), other.filled()))


def as_mask(values, name: str = "mask") -> BinaryMask:
    """Validate a {0,1} raster and return it as a bool array"""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D raster, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr
    if not np.all((arr == 0) | (arr == 1)):
        raise InvalidInputError(f"{name} must contain only 0 and 1")
    return arr.astype(bool)


def check_raster(K: CameraIntrinsics, **rasters) -> None:
    """Raise InvalidInputError unless every raster matches the intrinsics' (height, width)"""
    for name, raster in rasters.items():
        shape = np.shape(raster)[:2]
        if shape != K.shape:
            raise InvalidInputError(f"{name} raster {shape} does not match intrinsics {K.shape}")


def check_same_shape(**rasters) -> Tuple[int, int]:
    """Raise InvalidInputError unless all rasters share one 2-D shape; return it"""
    shapes = {name: np.shape(raster)[:2] for name, raster in rasters.items()}
    distinct = set(shapes.values())
    if len(distinct) > 1:
        listed = ", ".join(f"{name}={shape}" for name, shape in shapes.items())
        raise InvalidInputError(f"raster size mismatch: {listed}")
    return distinct.pop()


def backproject(px: Pixel, depth: float, K: CameraIntrinsics) -> np.ndarray:
    """Camera-frame point seen at pixel px with Z = depth"""
    if not np.isfinite(depth) or depth <= 0:
        raise InvalidInputError(f"depth must be positive, got {depth}")
    u, v = px
    if not K.contains(u, v):
        raise InvalidInputError(f"pixel ({u}, {v}) outside the {K.width}x{K.height} raster")
    return np.array([(u - K.cx) * depth / K.fx, (v - K.cy) * depth / K.fy, float(depth)])


def backproject_pixels(u: np.ndarray, v: np.ndarray, depth: np.ndarray,
                       K: CameraIntrinsics) -> np.ndarray:
    """Vectorised backproject: returns (N, 3) points, no validation"""
    depth = np.asarray(depth, dtype=np.float64)
    return np.stack([
        (np.asarray(u, dtype=np.float64) - K.cx) * depth / K.fx,
        (np.asarray(v, dtype=np.float64) - K.cy) * depth / K.fy,
        depth,
    ], axis=-1)


def project(p: np.ndarray, K: CameraIntrinsics) -> Optional[Tuple[Pixel, float]]:
    """((u, v), Z) for a camera-frame point, or BEHIND_CAMERA when Z <= 0; u, v are not clipped"""
    x, y, z = (float(c) for c in p)
    if z <= 0:
        return BEHIND_CAMERA
    return ((K.fx * x / z + K.cx, K.fy * y / z + K.cy), z)


def project_points(points: np.ndarray, K: CameraIntrinsics):
    """
    Vectorised project for (N, 3) points

    Returns (u, v, z, in_front); u and v are NaN where the point is not in front of the camera.
    """
    points = np.asarray(points, dtype=np.float64)
    z = points[:, 2]
    in_front = z > 0
    safe_z = np.where(in_front, z, 1.0)
    u = np.where(in_front, K.fx * points[:, 0] / safe_z + K.cx, np.nan)
    v = np.where(in_front, K.fy * points[:, 1] / safe_z + K.cy, np.nan)
    return u, v, z, in_front


def relative_pose(src: PoseSE3, dst: PoseSE3) -> PoseSE3:
    """Transform taking src-camera coordinates to dst-camera coordinates: dst⁻¹ ∘ src"""
    return dst.inverse().compose(src)


def forward_warp(mask: BinaryMask, depth_src: DepthMap, rel: PoseSE3,
                 K: CameraIntrinsics, nearest: bool = False) -> Tuple[BinaryMask, DepthMap]:
    """
    Splat every masked source pixel into the target camera

    Each pixel is backprojected at its depth, moved by rel (source camera → target camera) and
    projected; it writes a 2×2 block anchored at the floor of the landing coordinate. The
    target keeps the smallest incoming Z. Pixels with invalid source depth are not warped.

    With nearest=True a point writes only the pixel whose centre is closest to where it lands,
    so the result is a subset of the 2×2 splat.
    """
    mask = as_mask(mask, "mask")
    check_raster(K, mask=mask, depth=depth_src.values)

    height, width = K.shape
    target_z = np.full(K.shape, np.inf)

    v_idx, u_idx = np.nonzero(mask & depth_src.valid)
    if v_idx.size:
        points = backproject_pixels(u_idx, v_idx, depth_src.values[v_idx, u_idx], K)
        u, v, z, in_front = project_points(rel.apply(points), K)

        # drop points far outside the raster before integer conversion
        near = in_front & (u > -2) & (u < width + 1) & (v > -2) & (v < height + 1)
        u, v, z = u[near], v[near], z[near]
        offset, footprint = (0.5, NEAREST_FOOTPRINT) if nearest else (SPLAT_SNAP, SPLAT_FOOTPRINT)
        anchor_u = np.floor(u + offset).astype(np.int64)
        anchor_v = np.floor(v + offset).astype(np.int64)

        for du, dv in footprint:
            tu = anchor_u + du
            tv = anchor_v + dv
            inside = (tu >= 0) & (tu < width) & (tv >= 0) & (tv < height)
            np.minimum.at(target_z, (tv[inside], tu[inside]), z[inside])

    out_mask = np.isfinite(target_z)
    return out_mask, DepthMap(np.where(out_mask, target_z, 0.0), out_mask)
