"""
Shared fixtures: cameras, synthetic scenes and their rendered sequences
"""

import numpy as np
import pytest
from scipy import ndimage

from blindspot_cartographer.geometry import CameraIntrinsics
from blindspot_cartographer.labels import RoadLabel
from blindspot_cartographer.synthworld import (
    SAMPLE_CAMERA, Box, SynthScene, drive_trajectory, sample_scenes,
)

TINY_CAMERA = CameraIntrinsics(fx=16.0, fy=16.0, cx=15.5, cy=11.5, width=32, height=24)


def dilate(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """8-connected dilation used as a one-pixel tolerance band"""
    return ndimage.binary_dilation(mask, structure=np.ones((3, 3), dtype=bool),
                                   iterations=iterations)


def fraction_inside(mask: np.ndarray, region: np.ndarray) -> float:
    """|mask ∧ region| / |mask|, 1.0 for an empty mask"""
    total = int(mask.sum())
    return 1.0 if total == 0 else float((mask & region).sum()) / total


def make_truck_scene(frames: int = 30, speed: float = 2.0) -> SynthScene:
    """Tall box right of the path, close enough that the ground behind it spans many rows"""
    ground_y = 2.0
    truck = Box.on_ground(2.2, 8.0, (2.0, 2.5, 4.0), ground_y, RoadLabel.TRUCK)
    return SynthScene(
        K=SAMPLE_CAMERA,
        trajectory=drive_trajectory(frames, speed, 5.0),
        boxes=[truck],
        ground_y=ground_y,
        name="truck",
    )


def make_tiny_scene(frames: int = 12) -> SynthScene:
    box = Box.on_ground(1.5, 6.0, (1.2, 1.5, 2.0), 1.5)
    return SynthScene(
        K=TINY_CAMERA,
        trajectory=drive_trajectory(frames, 2.0, 5.0),
        boxes=[box],
        name="tiny",
    )


@pytest.fixture(scope="session")
def scenes():
    return sample_scenes()


@pytest.fixture(scope="session")
def truck_scene():
    return make_truck_scene()


@pytest.fixture(scope="session")
def truck_sequence(truck_scene):
    return truck_scene.to_sequence()


@pytest.fixture(scope="session")
def tiny_scene():
    return make_tiny_scene()


@pytest.fixture(scope="session")
def tiny_sequence(tiny_scene):
    return tiny_scene.to_sequence()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
