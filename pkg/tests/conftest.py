import math

import numpy as np
import pytest

from nimnormals import CameraIntrinsics, PlaneModel, SceneSpec

# (criterion, passed, detail) rows collected by test_acceptance.py.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def K():
    return CameraIntrinsics(300.0, 300.0, 160.0, 120.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_facing_plane(rng, max_tilt_deg=70.0, beta_range=(0.5, 10.0)) -> PlaneModel:
    """Plane whose normal is within ``max_tilt_deg`` of [0, 0, -1]; beta > 0 makes it camera-facing."""
    tilt = math.radians(rng.uniform(0.0, max_tilt_deg))
    az = rng.uniform(0.0, 2 * math.pi)
    n = (math.sin(tilt) * math.cos(az), math.sin(tilt) * math.sin(az), -math.cos(tilt))
    return PlaneModel.from_normal(n, rng.uniform(*beta_range))


def plane_scene(K, plane, width=320, height=240) -> SceneSpec:
    return SceneSpec("plane", width, height, K, plane=plane)


def sphere_scene(K, width=320, height=240) -> SceneSpec:
    return SceneSpec("sphere", width, height, K, sphere_center=(0.1, -0.05, 3.0), sphere_radius=1.0)


def random_candidate_set(rng, k=None) -> np.ndarray:
    """1-4 unit vectors all facing the camera for a random viewing ray."""
    k = int(rng.integers(1, 5)) if k is None else k
    ray = rng.normal(size=3)
    ray[2] = abs(ray[2]) + 0.5
    ray /= np.linalg.norm(ray)
    c = rng.normal(size=(k, 3))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    c[c @ ray > 0] *= -1
    return c
