"""Slow, independent estimators used to check the closed-form path.

``grid_search_angles`` minimizes the candidate energy by brute force over a
(theta, phi) lattice; ``plane_fit_normals`` is classical windowed
total-least-squares plane fitting on the back-projected point cloud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import DegenerateInputError, DimensionError, InvalidInputError
from .geometry import (
    CameraIntrinsics,
    DepthImage,
    NormalMap,
    SphericalAngles,
    back_project_image,
)
from .nim import _as_matrix, run_row_kernel

# Second-smallest to largest eigenvalue ratio below which the window is
# treated as collinear (no plane defined).
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PlaneModel:
    """Plane ``normal . p + beta = 0`` in camera coordinates."""

    normal: tuple[float, float, float]
    beta: float

    def __post_init__(self) -> None:
        n = np.asarray(self.normal, dtype=np.float64)
        if n.shape != (3,) or not np.all(np.isfinite(n)):
            raise InvalidInputError(f"plane normal must be a finite 3-vector, got {self.normal!r}")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise InvalidInputError("plane normal must be unit length")
        if not math.isfinite(self.beta) or self.beta == 0:
            raise InvalidInputError("plane offset beta must be finite and non-zero")
        object.__setattr__(self, "normal", tuple(float(c) for c in n))

    @classmethod
    def from_normal(cls, normal, beta: float) -> PlaneModel:
        """Build from any nonzero normal; it is normalized first."""
        n = np.asarray(normal, dtype=np.float64)
        return cls(tuple(n / np.linalg.norm(n)), beta)

    @property
    def n(self) -> np.ndarray:
        return np.array(self.normal)

    def camera_facing_normal(self) -> np.ndarray:
        # Visible points satisfy n . p = -beta, so the normal faces the camera iff beta > 0.
        return self.n if self.beta > 0 else -self.n

    def residual(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.n + self.beta


@dataclass(frozen=True)
class PlaneFitWindow:
    half_size: int = 1
    min_points: int = 6

    def __post_init__(self) -> None:
        if self.half_size < 1:
            raise InvalidInputError(f"half_size must be >= 1, got {self.half_size}")
        if self.min_points < 3:
            raise InvalidInputError(f"min_points must be >= 3, got {self.min_points}")


@lru_cache(maxsize=8)
def _sphere_grid(step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Theta-major lattice of unit directions with each pole present once."""
    n_theta = int(math.floor(math.pi / step + 1e-9))
    thetas = [k * step for k in range(n_theta + 1)]
    if thetas[-1] < math.pi - 1e-12:
        thetas.append(math.pi)
    n_phi = int(math.ceil(2 * math.pi / step - 1e-9))
    phis = np.array([-math.pi + j * step for j in range(n_phi)])
    phis = phis[phis < math.pi]
    th_list, ph_list = [], []
    for t in thetas:
        if t == 0.0 or t == math.pi:
            th_list.append(np.array([t]))
            ph_list.append(np.array([0.0]))
        else:
            th_list.append(np.full(phis.shape, t))
            ph_list.append(phis)
    th = np.concatenate(th_list)
    ph = np.concatenate(ph_list)
    dirs = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)
    for arr in (th, ph, dirs):
        arr.setflags(write=False)
    return th, ph, dirs


def grid_energies(S, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Energy ``sum_i -n . n_i`` at every lattice direction, plus the lattice angles."""
    C = _as_matrix(S)
    th, ph, dirs = _sphere_grid(float(step))
    # Summed per candidate, not via the candidate sum, to keep the check independent.
    e = np.zeros(dirs.shape[0])
    for c in C:
        e -= dirs @ c
    return e, th, ph


def grid_search_angles(S, step: float) -> SphericalAngles:
    """Brute-force minimizer of the candidate energy on a uniform (theta, phi) grid.

    Ties go to the lowest theta, then the lowest phi.
    """
    if not (0 < step <= 0.1):
        raise InvalidInputError(f"grid step must be in (0, 0.1] rad, got {step}")
    if _as_matrix(S).shape[0] == 0:
        raise DegenerateInputError("cannot search over an empty candidate set")
    e, th, ph = grid_energies(S, step)
    i = int(np.argmin(e))
    return SphericalAngles(float(th[i]), float(ph[i]))


def plane_fit_normals(
    Z: DepthImage, K: CameraIntrinsics, w: PlaneFitWindow = PlaneFitWindow(), threads: int = 1
) -> NormalMap:
    """Total-least-squares plane normal over a (2r+1)^2 window around each valid pixel.

    The normal is the eigenvector of the centred scatter matrix with the
    smallest eigenvalue, oriented towards the camera.  Windows with fewer
    than ``w.min_points`` valid points, or whose points are collinear, are
    invalid, as is the r-pixel frame.
    """
    r = w.half_size
    H, W = Z.shape
    if H <= 2 * r or W <= 2 * r:
        raise DimensionError(f"window of radius {r} does not fit a {W}x{H} image")
    points = np.ascontiguousarray(back_project_image(Z, K))
    valid = np.ascontiguousarray(Z.valid)
    count = np.zeros((H, W), dtype=np.int64)
    scatter = np.zeros((H, W, 3, 3))
    run_row_kernel(_kernels.window_moments_rows, H, threads, points, valid, r, count, scatter)

    out = NormalMap.empty(H, W)
    sel = valid & (count >= w.min_points)
    if not sel.any():
        return out
    evals, evecs = np.linalg.eigh(scatter[sel])
    n = evecs[:, :, 0]
    planar = evals[:, 1] > RANK_TOLERANCE * np.maximum(evals[:, 2], np.finfo(float).tiny)
    facing = np.einsum("ij,ij->i", n, points[sel])
    n = np.where((facing > 0)[:, None], -n, n)
    ok = planar & (facing != 0)
    idx = np.flatnonzero(sel)
    keep = idx[ok]
    flat_n = out.normals.reshape(-1, 3)
    flat_n[keep] = n[ok]
    out.valid.reshape(-1)[keep] = True
    return out
