import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nimnormals import (
    BehindCameraError,
    CameraIntrinsics,
    DepthImage,
    DimensionError,
    InvalidInputError,
    back_project,
    project,
)
from nimnormals.geometry import back_project_image, viewing_rays


def test_principal_point_on_optical_axis(K):
    assert back_project((K.cx, K.cy), 1.0, K) == (0.0, 0.0, 1.0)


def test_unit_offset_maps_through_focal_length(K):
    assert back_project((K.cx + K.fx, K.cy), 1.0, K) == (1.0, 0.0, 1.0)


def test_project_optical_axis(K):
    assert project((0.0, 0.0, 5.0), K) == (K.cx, K.cy)


def test_project_direct_substitution():
    K = CameraIntrinsics(500.0, 450.0, 320.0, 240.0)
    assert project((1.0, 0.0, 1.0), K) == (820.0, 240.0)


@pytest.mark.parametrize("z", [0.0, -1.0, math.nan, math.inf])
def test_back_project_rejects_bad_depth(K, z):
    with pytest.raises(InvalidInputError):
        back_project((3, 4), z, K)


@pytest.mark.parametrize("z", [0.0, -2.0])
def test_project_rejects_points_behind_camera(K, z):
    with pytest.raises(BehindCameraError):
        project((0.1, 0.2, z), K)


@pytest.mark.parametrize(
    "args", [(0.0, 1.0, 0.0, 0.0), (1.0, -1.0, 0.0, 0.0), (1.0, 1.0, math.nan, 0.0), (math.inf, 1.0, 0, 0)]
)
def test_intrinsics_validation(args):
    with pytest.raises(InvalidInputError):
        CameraIntrinsics(*args)


def test_round_trip_1000_random_samples():
    rng = np.random.default_rng(7)
    K = CameraIntrinsics(721.5377, 721.5377, 609.5593, 172.854)
    worst = 0.0
    for _ in range(1000):
        u, v = rng.integers(0, 1242), rng.integers(0, 375)
        z = rng.uniform(0.1, 80.0)
        pu, pv = project(back_project((u, v), z, K), K)
        worst = max(worst, abs(pu - u), abs(pv - v))
    assert worst <= 1e-9


@settings(max_examples=200, deadline=None)
@given(
    u=st.integers(0, 2000),
    v=st.integers(0, 2000),
    z=st.floats(1e-3, 1e3),
    lam=st.floats(1e-2, 1e2),
)
def test_scale_covariance(u, v, z, lam):
    K = CameraIntrinsics(600.0, 580.0, 311.3, 245.7)
    a = np.array(back_project((u, v), lam * z, K))
    b = lam * np.array(back_project((u, v), z, K))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_depth_image_mask_demotes_unusable_values():
    d = np.array([[1.0, 0.0, -1.0], [np.nan, np.inf, 2.0], [3.0, 3.0, 3.0]])
    Z = DepthImage.from_array(d)
    assert Z.valid.tolist() == [[True, False, False], [False, False, True], [True, True, True]]


def test_depth_image_rejects_mismatched_mask():
    with pytest.raises(DimensionError):
        DepthImage(np.ones((3, 4)), np.ones((4, 3), bool))


def test_back_project_image_matches_scalar(K, rng):
    Z = DepthImage.from_array(rng.uniform(0.5, 5.0, size=(6, 7)))
    pts = back_project_image(Z, K)
    for v in range(6):
        for u in range(7):
            assert tuple(pts[v, u]) == back_project((u, v), Z.depth[v, u], K)


def test_viewing_rays_unit(K):
    rays = viewing_rays(5, 4, K)
    np.testing.assert_allclose(np.linalg.norm(rays, axis=-1), 1.0, atol=1e-15)
