"""Projection, back-projection and pose plumbing.

The worked values below are computed by hand from the pinhole equations
u = fx*x/z + cx, v = fy*y/z + cy with poses stored world-from-camera.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointscatter.camera import (
    BEHIND_CAMERA_EPS,
    Intrinsics,
    Pose,
    backproject,
    backproject_pixels,
    look_at_pose,
    pixel_ray,
    project,
    project_points,
)

SIMPLE = Intrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)


def rotation_zyx(yaw, pitch, roll):
    cz, sz = np.cos(yaw), np.sin(yaw)
    cy, sy = np.cos(pitch), np.sin(pitch)
    cx, sx = np.cos(roll), np.sin(roll)
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    return rz @ ry @ rx


class TestIntrinsics:
    def test_k_matrix(self):
        k = SIMPLE.k_matrix
        assert k[0, 0] == 100.0 and k[1, 1] == 100.0
        assert k[0, 2] == 50.0 and k[1, 2] == 50.0 and k[2, 2] == 1.0

    def test_rejects_nonpositive_focal(self):
        with pytest.raises(ValueError):
            Intrinsics(fx=0.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)
        with pytest.raises(ValueError):
            Intrinsics(fx=100.0, fy=-1.0, cx=50.0, cy=50.0, width=100, height=100)

    def test_rejects_principal_point_outside_image(self):
        with pytest.raises(ValueError):
            Intrinsics(fx=100.0, fy=100.0, cx=100.0, cy=50.0, width=100, height=100)
        with pytest.raises(ValueError):
            Intrinsics(fx=100.0, fy=100.0, cx=50.0, cy=-0.5, width=100, height=100)


class TestPose:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 2.0, np.zeros(3))

    def test_rejects_reflection(self):
        # orthonormal but det = -1
        flip = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            Pose(flip, np.zeros(3))

    def test_world_camera_round_trip(self):
        pose = Pose(rotation_zyx(0.3, -0.2, 0.7), np.array([1.0, -2.0, 0.5]))
        pts = np.random.default_rng(0).normal(size=(50, 3))
        back = pose.camera_to_world(pose.world_to_camera(pts))
        assert np.abs(back - pts).max() < 1e-12

    def test_camera_center_is_translation(self):
        pose = Pose(np.eye(3), np.array([3.0, 1.0, -4.0]))
        assert np.array_equal(pose.camera_center, [3.0, 1.0, -4.0])
        # the camera center maps to the camera-frame origin
        assert np.abs(pose.world_to_camera(pose.camera_center)).max() == 0.0

    def test_arrays_frozen(self):
        pose = Pose.identity()
        with pytest.raises(ValueError):
            pose.rotation[0, 0] = 2.0


class TestProject:
    def test_principal_point_ray(self):
        # point on the optical axis lands on the principal point
        assert project((0.0, 0.0, 2.0), SIMPLE, Pose.identity()) == (50.0, 50.0, 2.0)

    def test_offset_point(self):
        # u = 100*1/2 + 50 = 100
        assert project((1.0, 0.0, 2.0), SIMPLE, Pose.identity()) == (100.0, 50.0, 2.0)

    def test_behind_camera_is_absent(self):
        assert project((0.0, 0.0, -1.0), SIMPLE, Pose.identity()) is None

    def test_absent_iff_z_at_most_eps(self):
        pose = Pose.identity()
        assert project((0.0, 0.0, BEHIND_CAMERA_EPS), SIMPLE, pose) is None
        assert project((0.0, 0.0, BEHIND_CAMERA_EPS * 2), SIMPLE, pose) is not None

    def test_no_bounds_clamping(self):
        # projections may land far outside the image; the caller masks
        u, v, _ = project((10.0, 0.0, 1.0), SIMPLE, Pose.identity())
        assert u == 1050.0 and v == 50.0

    def test_project_points_matches_scalar_path(self):
        rng = np.random.default_rng(3)
        pose = Pose(rotation_zyx(1.0, 0.2, -0.4), np.array([0.5, 1.5, -0.3]))
        pts = rng.normal(scale=2.0, size=(200, 3))
        uv, z, ok = project_points(pts, SIMPLE, pose)
        for i in range(len(pts)):
            single = project(pts[i], SIMPLE, pose)
            if single is None:
                assert not ok[i]
            else:
                assert ok[i]
                assert np.allclose((uv[i, 0], uv[i, 1], z[i]), single, atol=1e-12)

    def test_pose_composition(self):
        # projecting through P equals projecting the P-inverse-mapped
        # point through the identity
        pose = Pose(rotation_zyx(0.9, -0.3, 0.2), np.array([2.0, 0.0, 1.0]))
        pts = np.random.default_rng(7).normal(scale=3.0, size=(100, 3))
        uv_pose, z_pose, ok_pose = project_points(pts, SIMPLE, pose)
        uv_id, z_id, ok_id = project_points(
            pose.world_to_camera(pts), SIMPLE, Pose.identity()
        )
        assert np.array_equal(ok_pose, ok_id)
        assert np.allclose(uv_pose[ok_pose], uv_id[ok_id], atol=1e-9)
        assert np.allclose(z_pose[ok_pose], z_id[ok_id], atol=1e-9)


class TestBackproject:
    def test_principal_inverse(self):
        assert np.allclose(backproject(50.0, 50.0, 2.0, SIMPLE, Pose.identity()), [0, 0, 2])

    def test_offset_inverse(self):
        # x = (100-50)*2/100 = 1
        assert np.allclose(backproject(100.0, 50.0, 2.0, SIMPLE, Pose.identity()), [1, 0, 2])

    def test_rejects_nonpositive_depth(self):
        with pytest.raises(ValueError):
            backproject(50.0, 50.0, 0.0, SIMPLE, Pose.identity())
        with pytest.raises(ValueError):
            backproject_pixels(
                np.array([50.0]), np.array([50.0]), np.array([-1.0]), SIMPLE, Pose.identity()
            )

    def test_round_trip_thousand_samples(self):
        rng = np.random.default_rng(11)
        pose = Pose(rotation_zyx(0.4, 0.8, -1.1), np.array([-1.0, 2.0, 0.7]))
        u = rng.uniform(0, 99, size=1000)
        v = rng.uniform(0, 99, size=1000)
        d = rng.uniform(0.1, 50.0, size=1000)
        world = backproject_pixels(u, v, d, SIMPLE, pose)
        uv, z, ok = project_points(world, SIMPLE, pose)
        assert ok.all()
        err = max(
            np.abs(uv[:, 0] - u).max(), np.abs(uv[:, 1] - v).max(), np.abs(z - d).max()
        )
        assert err < 1e-9

    @settings(deadline=None)
    @given(
        u=st.floats(0.0, 99.0),
        v=st.floats(0.0, 99.0),
        d=st.floats(1e-3, 100.0),
        yaw=st.floats(-np.pi, np.pi),
        pitch=st.floats(-1.2, 1.2),
    )
    def test_round_trip_property(self, u, v, d, yaw, pitch):
        pose = Pose(rotation_zyx(yaw, pitch, 0.3), np.array([0.4, -0.2, 1.0]))
        world = backproject(u, v, d, SIMPLE, pose)
        got = project(world, SIMPLE, pose)
        assert got is not None
        assert abs(got[0] - u) < 1e-6 and abs(got[1] - v) < 1e-6 and abs(got[2] - d) < 1e-6


class TestPixelRay:
    def test_principal_ray_is_forward_axis(self):
        pose = Pose(rotation_zyx(0.5, 0.2, 0.0), np.zeros(3))
        ray = pixel_ray(50.0, 50.0, SIMPLE, pose)
        forward = pose.rotation[:, 2]
        assert np.allclose(ray.direction, forward, atol=1e-12)

    def test_direction_from_pinhole_geometry(self):
        # (u-cx)/fx = 0.5, so the camera-frame direction is (0.5, 0, 1)
        ray = pixel_ray(100.0, 50.0, SIMPLE, Pose.identity())
        expected = np.array([0.5, 0.0, 1.0]) / np.linalg.norm([0.5, 0.0, 1.0])
        assert np.allclose(ray.direction, expected, atol=1e-12)

    def test_unit_direction(self):
        ray = pixel_ray(13.0, 87.0, SIMPLE, Pose.identity())
        assert abs(np.linalg.norm(ray.direction) - 1.0) < 1e-12

    def test_distinct_pixels_non_parallel(self):
        a = pixel_ray(10.0, 10.0, SIMPLE, Pose.identity())
        b = pixel_ray(11.0, 10.0, SIMPLE, Pose.identity())
        assert np.linalg.norm(np.cross(a.direction, b.direction)) > 0

    def test_point_at_depth_matches_backproject(self):
        pose = Pose(rotation_zyx(-0.7, 0.4, 0.1), np.array([1.0, 1.0, -2.0]))
        ray = pixel_ray(30.0, 70.0, SIMPLE, pose)
        for d in (0.5, 2.0, 13.0):
            assert np.allclose(
                ray.point_at_depth(d), backproject(30.0, 70.0, d, SIMPLE, pose), atol=1e-9
            )

    def test_point_at_depth_rejects_nonpositive(self):
        ray = pixel_ray(50.0, 50.0, SIMPLE, Pose.identity())
        with pytest.raises(ValueError):
            ray.point_at_depth(0.0)


class TestLookAt:
    def test_forward_axis_points_at_target(self):
        pose = look_at_pose(eye=(0.0, -5.0, 0.0), target=(0.0, 0.0, 0.0))
        assert np.allclose(pose.rotation[:, 2], [0, 1, 0], atol=1e-12)

    def test_target_projects_to_principal_point(self):
        pose = look_at_pose(eye=(3.0, -2.0, 1.5), target=(0.5, 0.5, 0.5))
        u, v, depth = project((0.5, 0.5, 0.5), SIMPLE, pose)
        assert abs(u - 50.0) < 1e-9 and abs(v - 50.0) < 1e-9
        assert abs(depth - np.linalg.norm([2.5, -2.5, 1.0])) < 1e-12

    def test_rejects_degenerate_directions(self):
        with pytest.raises(ValueError):
            look_at_pose((0, 0, 0), (0, 0, 0))
        with pytest.raises(ValueError):
            look_at_pose((0, 0, 1), (0, 0, 2))  # parallel to the default up

    def test_image_up_follows_world_up(self):
        # camera y grows downward in the image, so it must oppose world z
        pose = look_at_pose(eye=(4.0, 0.0, 1.0), target=(0.0, 0.0, 1.0))
        assert pose.rotation[:, 1] @ np.array([0.0, 0.0, 1.0]) < 0
