import numpy as np
import pytest

from conftest import plane_scene, random_facing_plane, sphere_scene
from nimnormals import (
    CameraIntrinsics,
    DepthImage,
    EmptySceneError,
    FormatError,
    InvalidInputError,
    NoiseSpec,
    PlaneModel,
    SceneSpec,
    apply_noise,
    estimate_normals,
    render_scene,
)
from nimnormals.evaluation import angular_error
from nimnormals.geometry import back_project_image
from nimnormals.io import parse_kv


def _step_scene(K):
    return SceneSpec("step", 40, 30, K.scaled(0.125), background_depth=4.0, box=(10, 8, 25, 20), box_depth=3.0)


def test_fronto_parallel_plane_has_constant_depth(K):
    Z, gt = render_scene(plane_scene(K, PlaneModel((0.0, 0.0, -1.0), 2.0), 20, 10))
    assert Z.valid.all()
    np.testing.assert_array_equal(Z.depth, 2.0)
    np.testing.assert_array_equal(gt.normals, np.broadcast_to([0.0, 0.0, -1.0], (10, 20, 3)))


def test_sphere_on_axis_faces_camera_at_centre(K):
    s = SceneSpec("sphere", 320, 240, K, sphere_center=(0.0, 0.0, 3.0), sphere_radius=1.0)
    Z, gt = render_scene(s)
    assert Z.depth[120, 160] == 2.0
    np.testing.assert_array_equal(gt.normals[120, 160], [0.0, 0.0, -1.0])
    assert not Z.valid[0, 0]


@pytest.mark.parametrize("kind", ["plane", "sphere", "step"])
def test_ground_truth_unit_and_camera_facing(K, rng, kind):
    spec = {
        "plane": lambda: plane_scene(K, random_facing_plane(rng)),
        "sphere": lambda: sphere_scene(K),
        "step": lambda: _step_scene(K),
    }[kind]()
    Z, gt = render_scene(spec)
    n = gt.normals[gt.valid]
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
    pts = back_project_image(Z, spec.intrinsics)[gt.valid]
    assert (np.einsum("ij,ij->i", n, pts) < 0).all()
    assert not (gt.valid & ~Z.valid).any()
    assert (Z.depth[Z.valid] > 0).all()


def test_plane_points_satisfy_plane_equation(K, rng):
    for _ in range(10):
        plane = random_facing_plane(rng)
        Z, _ = render_scene(plane_scene(K, plane))
        res = plane.residual(back_project_image(Z, K)[Z.valid])
        assert np.abs(res).max() <= 1e-9


def test_plane_with_negative_beta_is_flipped_to_face_camera(K):
    plane = PlaneModel.from_normal((0.2, 0.1, 1.0), -3.0)
    _, gt = render_scene(plane_scene(K, plane))
    np.testing.assert_allclose(gt.normals[gt.valid][0], -plane.n)


def test_rendered_planes_estimate_exactly(K, rng):
    for _ in range(3):
        plane = random_facing_plane(rng)
        Z, gt = render_scene(plane_scene(K, plane))
        assert angular_error(estimate_normals(Z, K), gt).max_deg <= 0.01


def test_plane_behind_camera_is_empty(K):
    with pytest.raises(EmptySceneError):
        render_scene(plane_scene(K, PlaneModel((0.0, 0.0, 1.0), 2.0)))


def test_max_depth_clips_far_pixels(K):
    plane = PlaneModel.from_normal((0.0, -1.0, -0.2), 1.5)
    spec = SceneSpec("plane", 320, 240, K, plane=plane, max_depth=20.0)
    Z, _ = render_scene(spec)
    assert Z.valid.any() and (~Z.valid).any()
    assert Z.depth[Z.valid].max() <= 20.0


def test_step_scene_seam_is_excluded(K):
    Z, gt = render_scene(_step_scene(K))
    assert Z.valid.all()
    assert Z.depth[15, 15] == 3.0 and Z.depth[0, 0] == 4.0
    # Box edge at column 10: columns 9 and 10 straddle the jump, plus one each side.
    assert not gt.valid[15, 8:12].any()
    assert gt.valid[15, 7] and gt.valid[15, 12]
    assert gt.valid[15, 17] and gt.valid[2, 2]
    np.testing.assert_array_equal(gt.normals[gt.valid], np.tile([0.0, 0.0, -1.0], (gt.valid.sum(), 1)))


def test_scene_validation(K):
    with pytest.raises(InvalidInputError):
        SceneSpec("cube", 10, 10, K)
    with pytest.raises(InvalidInputError):
        SceneSpec("sphere", 10, 10, K, sphere_center=(0.0, 0.0, 0.5), sphere_radius=1.0)
    with pytest.raises(InvalidInputError):
        SceneSpec("plane", 10, 10, K)


def test_scene_from_mapping(K):
    cfg = parse_kv(
        "kind = plane\nwidth = 32\nheight = 24\nfx = 30\nfy = 30\ncx = 16\ncy = 12\n"
        "normal = 0, 0, -2\nbeta = 2\nnoise = gaussian_depth\nsigma = 0.01\nseed = 4\n"
    )
    s = SceneSpec.from_mapping(cfg)
    assert s.plane.normal == (0.0, 0.0, -1.0)
    assert NoiseSpec.from_mapping(cfg) == NoiseSpec("gaussian_depth", 0.01, 4)
    with pytest.raises(FormatError):
        SceneSpec.from_mapping({k: v for k, v in cfg.items() if k != "beta"})
    with pytest.raises(FormatError):
        SceneSpec.from_mapping({**cfg, "normal": "0 1"})


# -- noise -------------------------------------------------------------------

@pytest.fixture
def sphere_depth(K):
    return render_scene(sphere_scene(K.scaled(0.25), 80, 60))[0]


@pytest.mark.parametrize("model", ["none", "gaussian_depth", "gaussian_inverse_depth"])
def test_zero_sigma_is_identity(sphere_depth, model):
    out = apply_noise(sphere_depth, NoiseSpec(model, 0.0, 11))
    assert out.depth.tobytes() == sphere_depth.depth.tobytes()
    np.testing.assert_array_equal(out.valid, sphere_depth.valid)


@pytest.mark.parametrize("model", ["gaussian_depth", "gaussian_inverse_depth"])
def test_same_seed_same_raster(sphere_depth, model):
    a = apply_noise(sphere_depth, NoiseSpec(model, 0.01, 123))
    b = apply_noise(sphere_depth, NoiseSpec(model, 0.01, 123))
    c = apply_noise(sphere_depth, NoiseSpec(model, 0.01, 124))
    assert a.depth.tobytes() == b.depth.tobytes()
    assert a.depth.tobytes() != c.depth.tobytes()


def test_noise_keyed_by_pixel_index():
    spec = NoiseSpec("gaussian_depth", 0.1, 77)
    a = apply_noise(DepthImage.from_array(np.full((3, 8), 5.0)), spec)
    b = apply_noise(DepthImage.from_array(np.full((6, 4), 5.0)), spec)
    np.testing.assert_array_equal(a.depth.ravel(), b.depth.ravel())


def test_invalid_pixels_untouched_and_nonpositive_become_invalid():
    depth = np.full((50, 50), 0.05)
    depth[0, 0] = 0.0
    out = apply_noise(DepthImage.from_array(depth), NoiseSpec("gaussian_depth", 0.1, 1))
    assert not out.valid[0, 0]
    assert (~out.valid).sum() > 100
    assert (out.depth[out.valid] > 0).all()
    assert (out.depth[~out.valid] == 0).all()


def test_depth_noise_statistics():
    sigma = 0.02
    Z = DepthImage.from_array(np.full((1000, 1000), 5.0))
    d = apply_noise(Z, NoiseSpec("gaussian_depth", sigma, 2024)).depth - 5.0
    assert abs(d.mean()) <= 0.01 * sigma
    assert abs(d.var() / sigma**2 - 1.0) <= 0.01


def test_inverse_depth_noise_statistics():
    sigma = 1e-3
    Z = DepthImage.from_array(np.full((1000, 1000), 4.0))
    d = 1.0 / apply_noise(Z, NoiseSpec("gaussian_inverse_depth", sigma, 99)).depth - 0.25
    assert abs(d.mean()) <= 0.01 * sigma
    assert abs(d.var() / sigma**2 - 1.0) <= 0.01


def test_noise_spec_validation():
    with pytest.raises(InvalidInputError):
        NoiseSpec("uniform", 0.1, 0)
    with pytest.raises(InvalidInputError):
        NoiseSpec("gaussian_depth", -0.1, 0)
