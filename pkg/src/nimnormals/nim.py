"""Closed-form per-pixel normal inference from a depth image.

Pipeline per pixel ``p``:

1. inverse-depth central differences ``g_u``, ``g_v`` (un-halved),
2. one candidate normal per axis neighbour ``q``::

       [-fx*g_u, -fy*g_v, fx*g_u*dx/dz + fy*g_v*dy/dz]

   where ``(dx, dy, dz) = q_C - p_C``, normalized and flipped to face the
   camera,
3. the direction minimizing ``sum_i -n . n_i`` over the unit sphere, given by
   ``phi = atan2(sum n_y, sum n_x)`` and
   ``theta = atan2(sum n_x cos(phi) + sum n_y sin(phi), sum n_z)``.

Because the energy is linear in ``n``, that minimizer is the normalized
candidate sum; the spherical form and the vector form agree to rounding.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import (
    DegenerateAggregateError,
    DegenerateInputError,
    DimensionError,
    InvalidInputError,
)
from .geometry import (
    CameraIntrinsics,
    DepthImage,
    NormalMap,
    PixelCoord,
    SphericalAngles,
    angles_from_normal,
    back_project,
    normal_from_angles,
)

EPS_DZ = _kernels.EPS_DZ
MIN_SUM_NORM = _kernels.MIN_SUM_NORM

# (du, dv) in the order the kernel visits them.
NEIGHBOR_OFFSETS: tuple[tuple[int, int], ...] = ((1, 0), (-1, 0), (0, 1), (0, -1))

FRONTO_PARALLEL = np.array([0.0, 0.0, -1.0])

__all__ = [
    "CandidateNormal",
    "GradientField",
    "aggregate_closed_form",
    "angles_from_normal",
    "candidate_normals",
    "estimate_normals",
    "inverse_depth_gradients",
    "normal_from_angles",
]


@dataclass
class GradientField:
    g_u: np.ndarray
    g_v: np.ndarray
    valid: np.ndarray


class CandidateNormal(NamedTuple):
    direction: np.ndarray
    offset: tuple[int, int]


def _check_size(Z: DepthImage) -> None:
    if Z.height < 3 or Z.width < 3:
        raise DimensionError(f"normal estimation needs at least 3x3 pixels, got {Z.width}x{Z.height}")


def inverse_depth_gradients(Z: DepthImage) -> GradientField:
    """Un-halved central differences of ``1/z`` along columns (u) and rows (v).

    Border pixels and pixels with an invalid axis neighbour are marked
    invalid and hold 0.
    """
    _check_size(Z)
    H, W = Z.shape
    valid = np.zeros((H, W), dtype=bool)
    valid[1:-1, 1:-1] = (
        Z.valid[1:-1, 2:] & Z.valid[1:-1, :-2] & Z.valid[2:, 1:-1] & Z.valid[:-2, 1:-1]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(Z.valid, 1.0 / np.where(Z.valid, Z.depth, 1.0), 0.0)
    g_u = np.zeros((H, W))
    g_v = np.zeros((H, W))
    g_u[1:-1, 1:-1] = inv[1:-1, 2:] - inv[1:-1, :-2]
    g_v[1:-1, 1:-1] = inv[2:, 1:-1] - inv[:-2, 1:-1]
    g_u[~valid] = 0.0
    g_v[~valid] = 0.0
    return GradientField(g_u, g_v, valid)


def candidate_normals(
    p: PixelCoord | tuple[int, int],
    Z: DepthImage,
    G: GradientField,
    K: CameraIntrinsics,
) -> list[CandidateNormal]:
    """Unit, camera-facing candidate normals contributed by the four axis neighbours of ``p``.

    Neighbours whose depth step is below ``EPS_DZ`` times the centre depth, or
    whose raw candidate has zero length, are skipped, so a fronto-parallel patch yields an empty list.
    """
    u, v = int(p[0]), int(p[1])
    if not (0 <= v < Z.height and 0 <= u < Z.width) or not G.valid[v, u] or not Z.valid[v, u]:
        raise InvalidInputError(f"pixel ({u}, {v}) has no valid gradient")
    gu = G.g_u[v, u]
    gv = G.g_v[v, u]
    pc = back_project((u, v), Z.depth[v, u], K)
    a = -K.fx * gu
    b = -K.fy * gv
    out = []
    for du, dv in NEIGHBOR_OFFSETS:
        uq, vq = u + du, v + dv
        if not Z.valid[vq, uq]:
            continue
        qc = back_project((uq, vq), Z.depth[vq, uq], K)
        dx, dy, dz = qc.x - pc.x, qc.y - pc.y, qc.z - pc.z
        if abs(dz) < EPS_DZ * pc.z:
            continue
        c = K.fx * gu * dx / dz + K.fy * gv * dy / dz
        norm = math.sqrt(a * a + b * b + c * c)
        if not (0.0 < norm < math.inf):
            continue
        n = np.array([a, b, c]) / norm
        if n @ np.asarray(pc) > 0.0:
            n = -n
        out.append(CandidateNormal(n, (du, dv)))
    return out


def _as_matrix(S: Iterable[CandidateNormal] | np.ndarray) -> np.ndarray:
    if isinstance(S, np.ndarray):
        arr = np.asarray(S, dtype=np.float64).reshape(-1, 3)
    else:
        rows = [c.direction if isinstance(c, CandidateNormal) else c for c in S]
        arr = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    return arr


def aggregate_closed_form(S: Sequence[CandidateNormal] | np.ndarray) -> SphericalAngles:
    """Angles of the unit vector minimizing ``sum_i -n . n_i``.

    Accepts a candidate list or a (k, 3) array of unit vectors.
    """
    arr = _as_matrix(S)
    if arr.shape[0] == 0:
        raise DegenerateInputError("cannot aggregate an empty candidate set")
    sx, sy, sz = arr.sum(axis=0)
    if math.sqrt(sx * sx + sy * sy + sz * sz) < MIN_SUM_NORM:
        raise DegenerateAggregateError("candidate sum is numerically zero")
    phi = math.atan2(sy, sx)
    theta = math.atan2(sx * math.cos(phi) + sy * math.sin(phi), sz)
    if phi >= math.pi:
        phi -= 2 * math.pi
    return SphericalAngles(theta, phi)


def energy(n: np.ndarray, S: Sequence[CandidateNormal] | np.ndarray) -> float:
    """``sum_i -n . n_i`` for one direction ``n``."""
    return float(-(_as_matrix(S) @ np.asarray(n, dtype=np.float64)).sum())


def _row_blocks(height: int, threads: int) -> list[tuple[int, int]]:
    threads = max(1, min(threads, height))
    edges = np.linspace(0, height, threads + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_row_kernel(kernel, height: int, threads: int, *args) -> None:
    """Call ``kernel(row0, row1, *args)`` over row blocks of an image.

    Blocks write disjoint rows, so the result does not depend on ``threads``.
    """
    blocks = _row_blocks(height, threads)
    if len(blocks) == 1:
        kernel(0, height, *args)
        return
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        futures = [pool.submit(kernel, r0, r1, *args) for r0, r1 in blocks]
        for f in futures:
            f.result()


def estimate_normals(Z: DepthImage, K: CameraIntrinsics, threads: int = 1) -> NormalMap:
    """Camera-facing unit normal per pixel; the 1-pixel border is always invalid.

    Pixels with flat inverse depth (``g_u == g_v == 0``) and no usable
    candidate get ``[0, 0, -1]``.  ``threads > 1`` splits rows across worker
    threads without changing the result.
    """
    _check_size(Z)
    H, W = Z.shape
    depth = np.ascontiguousarray(Z.depth)
    valid = np.ascontiguousarray(Z.valid)
    xs = (np.arange(W, dtype=np.float64) - K.cx) / K.fx
    ys = (np.arange(H, dtype=np.float64) - K.cy) / K.fy
    normals = np.empty((H, W, 3))
    out_valid = np.empty((H, W), dtype=bool)
    run_row_kernel(
        _kernels.nim_rows, H, threads, depth, valid, xs, ys, float(K.fx), float(K.fy), normals, out_valid
    )
    return NormalMap(normals, out_valid)


def estimate_normal_at(p: PixelCoord | tuple[int, int], Z: DepthImage, K: CameraIntrinsics,
                       G: GradientField | None = None) -> np.ndarray | None:
    """Slow single-pixel version of :func:`estimate_normals` built from the public steps.

    Returns ``None`` where the full-image estimator would mark the pixel invalid.
    """
    if G is None:
        G = inverse_depth_gradients(Z)
    u, v = int(p[0]), int(p[1])
    if not (G.valid[v, u] and Z.valid[v, u]):
        return None
    S = candidate_normals((u, v), Z, G, K)
    if not S:
        if G.g_u[v, u] == 0.0 and G.g_v[v, u] == 0.0:
            return FRONTO_PARALLEL.copy()
        return None
    try:
        n = normal_from_angles(aggregate_closed_form(S))
    except DegenerateAggregateError:
        return None
    facing = n @ np.asarray(back_project((u, v), Z.depth[v, u], K))
    if facing > 0:
        n = -n
    elif facing == 0:
        return None
    return n
