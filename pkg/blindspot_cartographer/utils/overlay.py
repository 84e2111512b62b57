"""
Blind-spot overlays
Tints ω red over a base frame and darkens plus hatches pixels outside the visibility mask
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from ..errors import InvalidInputError, OutputWriteError
from ..geometry import as_mask, check_same_shape
from ..ui.colors import BLIND_SPOT_TINT, HATCH_RGB

TINT_ALPHA = 0.5
SHADE_FACTOR = 0.5
HATCH_PERIOD = 8


def _as_rgb(base: np.ndarray) -> np.ndarray:
    base = np.asarray(base)
    if base.ndim == 2:
        base = np.repeat(base[:, :, None], 3, axis=2)
    elif base.ndim == 3 and base.shape[2] == 4:
        base = base[:, :, :3]
    if base.ndim != 3 or base.shape[2] != 3:
        raise InvalidInputError(f"base image must be grayscale or RGB, got shape {base.shape}")
    if base.dtype != np.uint8:
        if base.min(initial=0) < 0 or base.max(initial=0) > 255:
            raise InvalidInputError("base image values must lie in 0..255")
        base = base.astype(np.uint8)
    return base


def render_overlay(base: np.ndarray, omega: np.ndarray, visibility: np.ndarray) -> np.ndarray:
    """
    (H, W, 3) uint8 overlay

    ω pixels are blended 50/50 with red; pixels outside V are darkened to half and every
    pixel on a (u + v) % 8 == 0 diagonal is drawn black. With an empty ω and a full V the
    result is the base image.
    """
    rgb = _as_rgb(base)
    omega = as_mask(omega, "blind-spot mask")
    visibility = as_mask(visibility, "visibility mask")
    check_same_shape(base=rgb, omega=omega, visibility=visibility)

    out = rgb.astype(np.float64)
    tint = np.array(BLIND_SPOT_TINT, dtype=np.float64)
    out[omega] = (1.0 - TINT_ALPHA) * out[omega] + TINT_ALPHA * tint
    hidden = ~visibility
    out[hidden] *= SHADE_FACTOR

    v, u = np.indices(omega.shape)
    hatch = hidden & ((u + v) % HATCH_PERIOD == 0)
    out[hatch] = HATCH_RGB
    return np.rint(out).astype(np.uint8)


def write_overlay(path: Union[str, Path], base: np.ndarray, omega: np.ndarray,
                  visibility: np.ndarray) -> Path:
    path = Path(path)
    image = render_overlay(base, omega, visibility)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(image).save(path)
    except OSError as e:
        raise OutputWriteError(path, e) from e
    return path


def load_base_image(path: Optional[Union[str, Path]], shape) -> np.ndarray:
    """RGB or grayscale base image, or mid-grey when no path is given"""
    if path is None:
        return np.full(tuple(shape) + (3,), 128, dtype=np.uint8)
    path = Path(path)
    try:
        with Image.open(path) as image:
            array = np.array(image.convert("RGB") if image.mode not in ("L", "RGB") else image)
    except OSError as e:
        raise InvalidInputError(f"{path}: unreadable base image: {e}") from None
    return array
