"""
Semantic label table
Which class IDs count as traversable surface, sky and obstacles
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import FrozenSet, Iterable

import numpy as np

from .errors import InvalidInputError


class RoadLabel(IntEnum):
    """Default class IDs (Cityscapes numbering)"""
    UNLABELED = 0
    ROAD = 7
    SIDEWALK = 8
    BUILDING = 11
    WALL = 12
    POLE = 17
    VEGETATION = 21
    TERRAIN = 22
    SKY = 23
    PERSON = 24
    RIDER = 25
    CAR = 26
    TRUCK = 27
    BUS = 28
    MOTORCYCLE = 32
    BICYCLE = 33


def _id_set(values: Iterable[int], name: str) -> FrozenSet[int]:
    ids = set()
    for value in values:
        if int(value) != value or value < 0:
            raise InvalidInputError(f"{name} must hold non-negative integers, got {value!r}")
        ids.add(int(value))
    return frozenset(ids)


@dataclass(frozen=True)
class LabelConfig:
    """
    Class-ID roles for one sequence

    The complete label table is the union of the four sets; any other ID in a semantic map
    is rejected.
    """
    traversable_ids: FrozenSet[int]
    sky_ids: FrozenSet[int]
    obstacle_ids: FrozenSet[int] = frozenset()
    other_ids: FrozenSet[int] = frozenset()

    def __post_init__(self):
        for name in ("traversable_ids", "sky_ids", "obstacle_ids", "other_ids"):
            object.__setattr__(self, name, _id_set(getattr(self, name), name))
        if not self.traversable_ids or not self.sky_ids:
            raise InvalidInputError("traversable_ids and sky_ids must both be non-empty")
        overlap = self.traversable_ids & self.sky_ids
        if overlap:
            raise InvalidInputError(f"IDs {sorted(overlap)} are both traversable and sky")

    @classmethod
    def default(cls) -> "LabelConfig":
        return cls(
            traversable_ids=frozenset({RoadLabel.ROAD, RoadLabel.SIDEWALK}),
            sky_ids=frozenset({RoadLabel.SKY}),
            obstacle_ids=frozenset({
                RoadLabel.PERSON, RoadLabel.RIDER, RoadLabel.CAR, RoadLabel.TRUCK,
                RoadLabel.BUS, RoadLabel.MOTORCYCLE, RoadLabel.BICYCLE,
            }),
            other_ids=frozenset({
                RoadLabel.UNLABELED, RoadLabel.BUILDING, RoadLabel.WALL, RoadLabel.POLE,
                RoadLabel.VEGETATION, RoadLabel.TERRAIN,
            }),
        )

    @property
    def known_ids(self) -> FrozenSet[int]:
        return self.traversable_ids | self.sky_ids | self.obstacle_ids | self.other_ids

    def validate(self, semantic: np.ndarray, name: str = "semantic map") -> None:
        """Raise InvalidInputError if the raster uses an ID outside the table"""
        present = np.unique(np.asarray(semantic))
        unknown = [int(i) for i in present if int(i) not in self.known_ids]
        if unknown:
            raise InvalidInputError(f"{name} uses unknown label IDs {unknown}")

    def is_member(self, semantic: np.ndarray, ids: FrozenSet[int]) -> np.ndarray:
        return np.isin(np.asarray(semantic), np.fromiter(ids, dtype=np.int64, count=len(ids)))
