"""
Tests for blind-spot overlays and label colours
"""

import numpy as np
import pytest
from PIL import Image

from blindspot_cartographer.errors import InvalidInputError
from blindspot_cartographer.labels import RoadLabel
from blindspot_cartographer.ui.colors import FALLBACK_RGB, LABEL_PALETTE, colorize_labels
from blindspot_cartographer.utils.overlay import (
    HATCH_PERIOD, load_base_image, render_overlay, write_overlay,
)


@pytest.fixture
def grey():
    return np.full((16, 16, 3), 100, dtype=np.uint8)


class TestRenderOverlay:

    def test_nothing_to_draw_returns_the_base(self, rng):
        base = rng.integers(0, 256, size=(12, 10, 3), dtype=np.uint8)
        out = render_overlay(base, np.zeros((12, 10), dtype=bool), np.ones((12, 10), dtype=bool))
        assert np.array_equal(out, base)

    def test_full_blind_spot_is_a_uniform_tint(self, grey):
        out = render_overlay(grey, np.ones((16, 16), dtype=bool), np.ones((16, 16), dtype=bool))
        assert np.all(out == out[0, 0])
        assert out[0, 0].tolist() == [178, 50, 50]

    def test_hidden_pixels_are_darkened_and_hatched(self, grey):
        visibility = np.ones((16, 16), dtype=bool)
        visibility[:, 8:] = False
        out = render_overlay(grey, np.zeros((16, 16), dtype=bool), visibility)

        assert out[0, 0].tolist() == [100, 100, 100]
        assert out[1, 9].tolist() == [50, 50, 50]
        # (u + v) % 8 == 0 on the hidden half
        assert out[0, 8].tolist() == [0, 0, 0]
        assert out[1, 15].tolist() == [0, 0, 0]
        hatched = (out == 0).all(axis=2)
        v, u = np.indices((16, 16))
        assert np.array_equal(hatched, ~visibility & ((u + v) % HATCH_PERIOD == 0))

    def test_grayscale_base(self):
        out = render_overlay(np.full((4, 4), 200, dtype=np.uint8), np.zeros((4, 4), dtype=bool),
                             np.ones((4, 4), dtype=bool))
        assert out.shape == (4, 4, 3)
        assert np.all(out == 200)

    def test_size_mismatch(self, grey):
        with pytest.raises(InvalidInputError):
            render_overlay(grey, np.zeros((8, 8), dtype=bool), np.ones((8, 8), dtype=bool))

    def test_output_is_deterministic(self, tmp_path, rng):
        base = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
        omega = rng.random((20, 20)) < 0.3
        visibility = rng.random((20, 20)) < 0.7
        first = write_overlay(tmp_path / "a.png", base, omega, visibility)
        second = write_overlay(tmp_path / "b.png", base, omega, visibility)
        assert first.read_bytes() == second.read_bytes()
        assert np.array_equal(np.array(Image.open(first)), render_overlay(base, omega, visibility))


class TestBaseImages:

    def test_default_base_is_mid_grey(self):
        base = load_base_image(None, (3, 5))
        assert base.shape == (3, 5, 3)
        assert np.all(base == 128)

    def test_unreadable_base(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"not an image")
        with pytest.raises(InvalidInputError):
            load_base_image(path, (2, 2))

    def test_label_colours(self):
        semantic = np.array([[RoadLabel.ROAD, RoadLabel.SKY, 200]], dtype=np.uint8)
        image = colorize_labels(semantic)
        assert tuple(image[0, 0]) == tuple(LABEL_PALETTE[RoadLabel.ROAD])
        assert tuple(image[0, 1]) == tuple(LABEL_PALETTE[RoadLabel.SKY])
        assert tuple(image[0, 2]) == tuple(FALLBACK_RGB)
