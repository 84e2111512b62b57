"""
Tests for camera geometry and forward warping
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from blindspot_cartographer.errors import InvalidInputError
from blindspot_cartographer.geometry import (
    BEHIND_CAMERA, CameraIntrinsics, DepthMap, PoseSE3, as_mask, backproject,
    check_same_shape, forward_warp, project, relative_pose,
)
from blindspot_cartographer.synthworld import SAMPLE_CAMERA

from .conftest import dilate


def ground_depth(K: CameraIntrinsics, height: float) -> DepthMap:
    """Exact Z of a level camera `height` above a flat ground, sky invalid"""
    v = np.arange(K.height, dtype=np.float64)[:, None] - K.cy
    below = np.broadcast_to(v > 0, K.shape)
    with np.errstate(divide="ignore"):
        z = np.where(v > 0, K.fy * height / np.where(v > 0, v, 1.0), 0.0)
    return DepthMap(np.broadcast_to(z, K.shape).copy(), below.copy())


class TestCameraIntrinsics:

    def test_shape_is_height_by_width(self):
        assert SAMPLE_CAMERA.shape == (120, 160)

    @pytest.mark.parametrize("kwargs", [
        dict(fx=0.0, fy=80.0, cx=10, cy=10, width=20, height=20),
        dict(fx=80.0, fy=-1.0, cx=10, cy=10, width=20, height=20),
        dict(fx=80.0, fy=80.0, cx=20, cy=10, width=20, height=20),
        dict(fx=80.0, fy=80.0, cx=10, cy=-1, width=20, height=20),
        dict(fx=float("nan"), fy=80.0, cx=10, cy=10, width=20, height=20),
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(InvalidInputError):
            CameraIntrinsics(**kwargs)

    def test_pixel_rays_have_unit_z(self):
        rays = SAMPLE_CAMERA.pixel_rays()
        assert rays.shape == (120, 160, 3)
        assert np.all(rays[..., 2] == 1.0)
        assert rays[0, 0, 0] == pytest.approx(-79.5 / 80.0)

    def test_contains_uses_pixel_footprints(self):
        assert SAMPLE_CAMERA.contains(-0.5, -0.5)
        assert not SAMPLE_CAMERA.contains(159.5, 0.0)
        assert SAMPLE_CAMERA.contains(159.49, 119.49)


class TestProjection:

    @settings(max_examples=200, deadline=None)
    @given(
        u=st.floats(0.0, 159.0),
        v=st.floats(0.0, 119.0),
        depth=st.floats(0.1, 500.0),
    )
    def test_backproject_then_project_recovers_the_pixel(self, u, v, depth):
        point = backproject((u, v), depth, SAMPLE_CAMERA)
        (pu, pv), z = project(point, SAMPLE_CAMERA)
        assert pu == pytest.approx(u, abs=1e-9)
        assert pv == pytest.approx(v, abs=1e-9)
        assert z == pytest.approx(depth, rel=1e-12)

    def test_points_behind_the_camera_do_not_project(self):
        assert project(np.array([0.0, 0.0, -1.0]), SAMPLE_CAMERA) is BEHIND_CAMERA
        assert project(np.array([1.0, 1.0, 0.0]), SAMPLE_CAMERA) is BEHIND_CAMERA

    @pytest.mark.parametrize("depth", [0.0, -2.0, float("inf")])
    def test_backproject_rejects_bad_depth(self, depth):
        with pytest.raises(InvalidInputError):
            backproject((10.0, 10.0), depth, SAMPLE_CAMERA)

    def test_backproject_rejects_pixels_off_the_raster(self):
        with pytest.raises(InvalidInputError):
            backproject((200.0, 10.0), 5.0, SAMPLE_CAMERA)


class TestPoseSE3:

    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(InvalidInputError):
            PoseSE3(np.diag([1.0, 1.0, 1.1]), np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(InvalidInputError):
            PoseSE3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_is_immutable(self):
        pose = PoseSE3.identity()
        with pytest.raises(AttributeError):
            pose.translation = np.ones(3)
        with pytest.raises(ValueError):
            pose.translation[0] = 1.0

    @settings(max_examples=50, deadline=None)
    @given(
        yaw=st.floats(-3.0, 3.0),
        tx=st.floats(-50.0, 50.0),
        tz=st.floats(-50.0, 50.0),
    )
    def test_inverse_composes_to_identity(self, yaw, tx, tz):
        pose = PoseSE3.from_yaw(yaw, (tx, 0.5, tz))
        assert pose.compose(pose.inverse()).allclose(PoseSE3.identity(), atol=1e-9)
        assert pose.inverse().compose(pose).allclose(PoseSE3.identity(), atol=1e-9)

    def test_positive_yaw_turns_right(self):
        forward = PoseSE3.from_yaw(0.3).rotation @ np.array([0.0, 0.0, 1.0])
        assert forward[0] > 0

    def test_from_matrix_round_trip(self):
        pose = PoseSE3.from_yaw(0.7, (1.0, 2.0, 3.0))
        assert PoseSE3.from_matrix(pose.as_matrix()) == pose
        assert PoseSE3.from_matrix(pose.as_matrix()[:3]) == pose

    def test_relative_pose_maps_source_to_target_camera(self, rng):
        src = PoseSE3.from_yaw(0.2, (1.0, 0.0, 4.0))
        dst = PoseSE3.from_yaw(-0.1, (0.5, 0.1, 1.0))
        points = rng.normal(size=(10, 3))
        expected = dst.inverse().apply(src.apply(points))
        np.testing.assert_allclose(relative_pose(src, dst).apply(points), expected, atol=1e-12)


class TestRasterChecks:

    def test_as_mask_rejects_other_values(self):
        with pytest.raises(InvalidInputError):
            as_mask(np.array([[0, 2]]))

    def test_check_same_shape_reports_mismatch(self):
        with pytest.raises(InvalidInputError, match="mismatch"):
            check_same_shape(a=np.zeros((2, 3)), b=np.zeros((3, 2)))

    def test_depth_map_rejects_non_positive_valid_values(self):
        with pytest.raises(InvalidInputError):
            DepthMap(np.zeros((2, 2)), np.ones((2, 2), dtype=bool))

    def test_from_array_marks_bad_values_invalid(self):
        depth = DepthMap.from_array(np.array([[1.0, 0.0], [np.nan, np.inf]]))
        assert depth.valid.tolist() == [[True, False], [False, False]]


class TestForwardWarp:

    def test_identity_warp_covers_the_source_mask(self, rng):
        mask = rng.random(SAMPLE_CAMERA.shape) < 0.2
        depth = DepthMap(np.full(SAMPLE_CAMERA.shape, 5.0), np.ones(SAMPLE_CAMERA.shape, dtype=bool))
        warped, warped_depth = forward_warp(mask, depth, PoseSE3.identity(), SAMPLE_CAMERA)

        assert np.all(warped[mask])
        assert not np.any(warped & ~dilate(mask))
        assert np.all(warped_depth.values[warped] == 5.0)
        assert np.array_equal(warped_depth.valid, warped)

    def test_splat_keeps_the_nearest_depth(self):
        K = CameraIntrinsics(fx=10.0, fy=10.0, cx=4.0, cy=4.0, width=8, height=8)
        mask = np.zeros(K.shape, dtype=bool)
        mask[3, 3] = mask[3, 4] = True
        values = np.ones(K.shape)
        values[3, 3] = 5.0
        values[3, 4] = 3.0
        warped, depth = forward_warp(mask, DepthMap.from_array(values), PoseSE3.identity(), K)

        assert depth.values[3, 4] == pytest.approx(3.0)
        assert depth.values[4, 4] == pytest.approx(3.0)
        assert depth.values[3, 3] == pytest.approx(5.0)
        assert depth.values[3, 5] == pytest.approx(3.0)
        assert int(warped.sum()) == 6

    def test_pixels_without_depth_are_not_warped(self):
        K = CameraIntrinsics(fx=10.0, fy=10.0, cx=4.0, cy=4.0, width=8, height=8)
        mask = np.ones(K.shape, dtype=bool)
        warped, depth = forward_warp(mask, DepthMap.empty(K.shape), PoseSE3.identity(), K)
        assert not warped.any()
        assert not depth.valid.any()

    def test_points_moved_behind_the_camera_vanish(self):
        K = CameraIntrinsics(fx=10.0, fy=10.0, cx=4.0, cy=4.0, width=8, height=8)
        mask = np.ones(K.shape, dtype=bool)
        depth = DepthMap(np.full(K.shape, 2.0), mask)
        # target camera 5 m further forward: every point is now behind it
        rel = relative_pose(PoseSE3.identity(), PoseSE3(np.eye(3), (0.0, 0.0, 5.0)))
        warped, _ = forward_warp(mask, depth, rel, K)
        assert not warped.any()

    def test_lateral_shift_of_the_ground_plane(self):
        K = SAMPLE_CAMERA
        height = 1.5
        depth = ground_depth(K, height)
        ground = depth.valid

        src = PoseSE3(np.eye(3), (0.5, 0.0, 0.0))
        dst = PoseSE3.identity()
        warped, _ = forward_warp(ground, depth, relative_pose(src, dst), K)

        # a dst ground pixel is expected when its ground point falls inside the src raster
        v, u = np.indices(K.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_dst = (u - K.cx) * depth.values / K.fx
            u_src = K.fx * (x_dst - 0.5) / depth.values + K.cx
        expected = ground & (u_src >= -0.5) & (u_src < K.width - 0.5)

        union = (warped | expected).sum()
        iou = (warped & expected).sum() / union
        assert iou >= 0.98
        assert not np.any(warped[: int(K.cy)])

    def test_rejects_mismatched_raster(self):
        with pytest.raises(InvalidInputError):
            forward_warp(np.zeros((4, 4), dtype=bool), DepthMap.empty((4, 4)),
                         PoseSE3.identity(), SAMPLE_CAMERA)

    def test_nearest_identity_warp_is_the_source_mask(self, rng):
        mask = rng.random(SAMPLE_CAMERA.shape) < 0.2
        depth = DepthMap(np.full(SAMPLE_CAMERA.shape, 5.0), np.ones(SAMPLE_CAMERA.shape, dtype=bool))
        warped, warped_depth = forward_warp(mask, depth, PoseSE3.identity(), SAMPLE_CAMERA,
                                            nearest=True)
        assert np.array_equal(warped, mask)
        assert np.all(warped_depth.values[mask] == 5.0)

    def test_nearest_landing_lies_inside_the_splat(self, rng):
        K = SAMPLE_CAMERA
        depth = ground_depth(K, 1.5)
        for _ in range(5):
            src = PoseSE3.from_yaw(rng.uniform(-0.2, 0.2), (rng.uniform(-1, 1), 0.0, rng.uniform(0, 5)))
            rel = relative_pose(src, PoseSE3.identity())
            splat, _ = forward_warp(depth.valid, depth, rel, K)
            landed, landed_depth = forward_warp(depth.valid, depth, rel, K, nearest=True)
            assert landed.any()
            assert not np.any(landed & ~splat)
            assert np.array_equal(landed_depth.valid, landed)

    def test_nearest_landing_of_the_ground_stays_below_the_horizon(self):
        K = SAMPLE_CAMERA
        depth = ground_depth(K, 1.5)
        rel = relative_pose(PoseSE3(np.eye(3), (0.0, 0.0, 12.0)), PoseSE3.identity())
        splat, _ = forward_warp(depth.valid, depth, rel, K)
        landed, _ = forward_warp(depth.valid, depth, rel, K, nearest=True)
        horizon_row = int(np.floor(K.cy))
        assert splat[horizon_row].any()
        assert not landed[: horizon_row + 1].any()


def random_pose(rng) -> PoseSE3:
    rotation = Rotation.from_rotvec(rng.normal(scale=1.0, size=3)).as_matrix()
    return PoseSE3(rotation, rng.uniform(-20.0, 20.0, size=3))


class TestRelativePoseAlgebra:

    def test_chained_relative_poses_compose(self, rng):
        for _ in range(100):
            a, b, c = random_pose(rng), random_pose(rng), random_pose(rng)
            chained = relative_pose(b, c).compose(relative_pose(a, b))
            assert chained.allclose(relative_pose(a, c), atol=1e-9)

    def test_swapping_arguments_inverts(self, rng):
        for _ in range(100):
            a, b = random_pose(rng), random_pose(rng)
            forward = relative_pose(a, b)
            backward = relative_pose(b, a)
            assert backward.allclose(forward.inverse(), atol=1e-9)
            assert forward.compose(backward).allclose(PoseSE3.identity(), atol=1e-9)

    def test_relative_pose_to_itself_is_identity(self, rng):
        for _ in range(100):
            a = random_pose(rng)
            assert relative_pose(a, a).allclose(PoseSE3.identity(), atol=1e-9)
