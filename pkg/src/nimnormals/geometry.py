"""Pinhole camera model and the raster types the estimators share.

Pixel centres sit at integer coordinates: column ``u`` and row ``v`` index
``depth[v, u]`` directly, with no half-pixel offset.  Depth is always held in
meters as float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BehindCameraError, DimensionError, InvalidInputError


class PixelCoord(NamedTuple):
    u: float
    v: float


class CameraPoint(NamedTuple):
    x: float
    y: float
    z: float


class SphericalAngles(NamedTuple):
    """Polar angle ``theta`` in [0, pi] and azimuth ``phi`` in [-pi, pi)."""

    theta: float
    phi: float


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal lengths and principal point, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        for name in ("fx", "fy", "cx", "cy"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidInputError(f"intrinsic {name} must be finite, got {value!r}")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError(
                f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def scaled(self, factor: float) -> CameraIntrinsics:
        """Intrinsics for the same field of view at ``factor`` times the resolution."""
        return CameraIntrinsics(
            self.fx * factor, self.fy * factor, self.cx * factor, self.cy * factor
        )


@dataclass
class DepthImage:
    """H x W metric depth raster with a validity mask.

    Invalid pixels keep whatever value is stored in ``depth`` (usually 0) and
    must never be read by the estimators.
    """

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        self.depth = np.asarray(self.depth, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.depth.ndim != 2:
            raise DimensionError(f"depth must be 2-D, got shape {self.depth.shape}")
        if self.valid.shape != self.depth.shape:
            raise DimensionError(
                f"mask shape {self.valid.shape} does not match depth {self.depth.shape}"
            )
        with np.errstate(invalid="ignore"):
            ok = np.isfinite(self.depth) & (self.depth > 0)
        # Pixels flagged valid with unusable depth are demoted, never trusted.
        self.valid = self.valid & ok

    @classmethod
    def from_array(cls, depth: np.ndarray, valid: np.ndarray | None = None) -> DepthImage:
        """Wrap a raster; without an explicit mask, finite positive values are valid."""
        depth = np.asarray(depth, dtype=np.float64)
        if valid is None:
            valid = np.ones(depth.shape, dtype=bool)
        return cls(depth, valid)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def scaled(self, factor: float) -> DepthImage:
        return DepthImage(self.depth * factor, self.valid.copy())

    def masked(self) -> np.ndarray:
        """Depth with invalid pixels replaced by NaN."""
        return np.where(self.valid, self.depth, np.nan)


@dataclass
class NormalMap:
    """H x W x 3 unit normals with a validity mask; invalid entries hold NaN."""

    normals: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        self.normals = np.asarray(self.normals, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.normals.ndim != 3 or self.normals.shape[2] != 3:
            raise DimensionError(f"normals must be H x W x 3, got {self.normals.shape}")
        if self.valid.shape != self.normals.shape[:2]:
            raise DimensionError(
                f"mask shape {self.valid.shape} does not match normals {self.normals.shape}"
            )

    @classmethod
    def empty(cls, height: int, width: int) -> NormalMap:
        return cls(np.full((height, width, 3), np.nan), np.zeros((height, width), bool))

    @property
    def height(self) -> int:
        return self.normals.shape[0]

    @property
    def width(self) -> int:
        return self.normals.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.normals.shape[:2]


def back_project(p: PixelCoord | tuple[float, float], z: float, K: CameraIntrinsics) -> CameraPoint:
    """Lift pixel ``p`` at depth ``z`` (meters) into the camera frame."""
    if not math.isfinite(z) or z <= 0:
        raise InvalidInputError(f"depth must be finite and positive, got {z!r}")
    u, v = p
    return CameraPoint(z * (u - K.cx) / K.fx, z * (v - K.cy) / K.fy, z)


def project(p: CameraPoint | tuple[float, float, float], K: CameraIntrinsics) -> PixelCoord:
    """Continuous pixel coordinates of a camera-frame point."""
    x, y, z = p
    if not z > 0:
        raise BehindCameraError(f"point with z={z!r} is not in front of the camera")
    return PixelCoord(K.fx * x / z + K.cx, K.fy * y / z + K.cy)


def pixel_grid(height: int, width: int, K: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Normalized image coordinates ``(u - cx) / fx`` and ``(v - cy) / fy`` per pixel."""
    xs = (np.arange(width, dtype=np.float64) - K.cx) / K.fx
    ys = (np.arange(height, dtype=np.float64) - K.cy) / K.fy
    return np.broadcast_to(xs, (height, width)), np.broadcast_to(ys[:, None], (height, width))


def back_project_image(Z: DepthImage, K: CameraIntrinsics) -> np.ndarray:
    """H x W x 3 camera-frame points; invalid pixels are NaN."""
    z = Z.masked()
    # Same operation order as back_project so the two agree bit-for-bit.
    us = np.arange(Z.width, dtype=np.float64)
    vs = np.arange(Z.height, dtype=np.float64)[:, None]
    return np.stack([z * (us - K.cx) / K.fx, z * (vs - K.cy) / K.fy, z], axis=-1)


def viewing_rays(height: int, width: int, K: CameraIntrinsics) -> np.ndarray:
    """Unit viewing direction through every pixel centre."""
    xs, ys = pixel_grid(height, width, K)
    rays = np.stack([xs, ys, np.ones((height, width))], axis=-1)
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def angles_from_normal(n: np.ndarray) -> SphericalAngles:
    """Inverse of the spherical parameterization for a unit (or any nonzero) vector."""
    nx, ny, nz = (float(c) for c in n)
    phi = math.atan2(ny, nx)
    if phi >= math.pi:
        phi -= 2 * math.pi
    theta = math.atan2(math.hypot(nx, ny), nz)
    return SphericalAngles(theta, phi)


def normal_from_angles(a: SphericalAngles | tuple[float, float]) -> np.ndarray:
    theta, phi = a
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])
