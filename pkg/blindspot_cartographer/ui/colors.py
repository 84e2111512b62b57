"""
Color schemes for console reports and rendered rasters
"""

from typing import Dict, Tuple

import numpy as np
from rich.style import Style

from ..labels import RoadLabel

RGB = Tuple[int, int, int]


class ReportColors:
    """Console styles used by the CLI reports"""

    TITLE = Style(color="#7c3aed", bold=True)
    HEADER = Style(color="#58a6ff", bold=True)
    VALUE = Style(color="#c9d1d9")
    MUTED = Style(color="#8b949e")

    SUCCESS = Style(color="#56d364", bold=True)
    WARNING = Style(color="#d29922")
    ERROR = Style(color="#da3633", bold=True)

    @classmethod
    def get_score_style(cls, score: float) -> Style:
        """Style for a ratio metric in [0, 1]"""
        if score < 0.5:
            return cls.ERROR
        elif score < 0.9:
            return cls.WARNING
        else:
            return cls.SUCCESS

    @classmethod
    def get_decision_style(cls, accepted: bool) -> Style:
        return cls.SUCCESS if accepted else cls.ERROR


# Flat label colours for synthetic RGB frames
LABEL_PALETTE: Dict[int, RGB] = {
    RoadLabel.UNLABELED: (0, 0, 0),
    RoadLabel.ROAD: (128, 64, 128),
    RoadLabel.SIDEWALK: (244, 35, 232),
    RoadLabel.BUILDING: (70, 70, 70),
    RoadLabel.WALL: (102, 102, 156),
    RoadLabel.POLE: (153, 153, 153),
    RoadLabel.VEGETATION: (107, 142, 35),
    RoadLabel.TERRAIN: (152, 251, 152),
    RoadLabel.SKY: (70, 130, 180),
    RoadLabel.PERSON: (220, 20, 60),
    RoadLabel.RIDER: (255, 0, 0),
    RoadLabel.CAR: (0, 0, 142),
    RoadLabel.TRUCK: (0, 0, 70),
    RoadLabel.BUS: (0, 60, 100),
    RoadLabel.MOTORCYCLE: (0, 0, 230),
    RoadLabel.BICYCLE: (119, 11, 32),
}
FALLBACK_RGB: RGB = (255, 255, 255)

BLIND_SPOT_TINT: RGB = (255, 0, 0)
HATCH_RGB: RGB = (0, 0, 0)


def colorize_labels(semantic: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 image of a semantic raster"""
    semantic = np.asarray(semantic)
    image = np.empty(semantic.shape + (3,), dtype=np.uint8)
    image[...] = FALLBACK_RGB
    for label, rgb in LABEL_PALETTE.items():
        image[semantic == label] = rgb
    return image
