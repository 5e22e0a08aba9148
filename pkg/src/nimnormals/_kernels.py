"""Compiled per-pixel kernels.

Each kernel takes a half-open row range as its first two arguments and
writes only into those rows of the output, so callers can split an image
into row blocks and run the blocks on threads (the kernels release the GIL).
"""

import math

import numba
import numpy as np

# A neighbour is skipped when |dz| < EPS_DZ * z.  Tying the guard to the
# centre depth keeps the skip decision unchanged when all depths are scaled.
EPS_DZ = 1e-8
MIN_SUM_NORM = 1e-12

@numba.njit(nogil=True, cache=True, error_model="numpy", inline="always")
def _candidate(a, b, px, py, pz, qx, qy, qz):
    """Unit camera-facing candidate from neighbour point ``q``; ``ok`` is False if skipped.

    The raw candidate ``[a, b, -(a*dx + b*dy)/dz]`` is scaled by ``dz``
    before normalizing; the scale drops out under normalization and the
    camera-facing flip, and it saves a division.
    """
    dz = qz - pz
    if abs(dz) < EPS_DZ * pz:
        return 0.0, 0.0, 0.0, False
    mx = a * dz
    my = b * dz
    mz = -(a * (qx - px) + b * (qy - py))
    norm = math.sqrt(mx * mx + my * my + mz * mz)
    if not (norm > 0.0 and norm < math.inf):
        return 0.0, 0.0, 0.0, False
    w = 1.0 / norm
    if mx * px + my * py + mz * pz > 0.0:
        w = -w
    return mx * w, my * w, mz * w, True


@numba.njit(nogil=True, cache=True, error_model="numpy")
def nim_rows(row0, row1, depth, valid, xs, ys, fx, fy, out, out_valid):
    """Normals for rows ``row0:row1``; every pixel in the range is written.

    ``xs[u] = (u - cx) / fx`` and ``ys[v] = (v - cy) / fy`` are the
    normalized image coordinates, so back-projection is ``z * (xs[u], ys[v], 1)``.
    """
    height, width = depth.shape
    nan = np.nan
    for v in range(row0, row1):
        for u in range(width):
            out[v, u, 0] = nan
            out[v, u, 1] = nan
            out[v, u, 2] = nan
            out_valid[v, u] = False
        if v == 0 or v == height - 1:
            continue
        y0 = ys[v]
        y_up = ys[v - 1]
        y_dn = ys[v + 1]
        for u in range(1, width - 1):
            if not (
                valid[v, u]
                and valid[v, u + 1]
                and valid[v, u - 1]
                and valid[v + 1, u]
                and valid[v - 1, u]
            ):
                continue
            z = depth[v, u]
            z1 = depth[v, u + 1]
            z2 = depth[v, u - 1]
            z3 = depth[v + 1, u]
            z4 = depth[v - 1, u]
            gu = 1.0 / z1 - 1.0 / z2
            gv = 1.0 / z3 - 1.0 / z4
            x0 = xs[u]
            px = z * x0
            py = z * y0
            a = -fx * gu
            b = -fy * gv
            n1x, n1y, n1z, ok1 = _candidate(a, b, px, py, z, z1 * xs[u + 1], z1 * y0, z1)
            n2x, n2y, n2z, ok2 = _candidate(a, b, px, py, z, z2 * xs[u - 1], z2 * y0, z2)
            n3x, n3y, n3z, ok3 = _candidate(a, b, px, py, z, z3 * x0, z3 * y_dn, z3)
            n4x, n4y, n4z, ok4 = _candidate(a, b, px, py, z, z4 * x0, z4 * y_up, z4)
            if not (ok1 or ok2 or ok3 or ok4):
                if gu == 0.0 and gv == 0.0:
                    out[v, u, 0] = 0.0
                    out[v, u, 1] = 0.0
                    out[v, u, 2] = -1.0
                    out_valid[v, u] = True
                continue
            # Skipped candidates come back as zeros and add nothing.
            sx = n1x + n2x + n3x + n4x
            sy = n1y + n2y + n3y + n4y
            sz = n1z + n2z + n3z + n4z
            s = math.sqrt(sx * sx + sy * sy + sz * sz)
            if s < MIN_SUM_NORM:
                continue
            # With phi = atan2(sy, sx) and theta = atan2(hypot(sx, sy), sz),
            # [sin(t)cos(p), sin(t)sin(p), cos(t)] reduces exactly to s / |s|.
            w = 1.0 / s
            nx = sx * w
            ny = sy * w
            nz = sz * w
            facing = nx * px + ny * py + nz * z
            if facing > 0.0:
                nx = -nx
                ny = -ny
                nz = -nz
            elif facing == 0.0:
                continue
            out[v, u, 0] = nx
            out[v, u, 1] = ny
            out[v, u, 2] = nz
            out_valid[v, u] = True


@numba.njit(nogil=True, cache=True, error_model="numpy")
def window_moments_rows(row0, row1, points, valid, radius, count, scatter):
    """Per-pixel point count and centred 3x3 scatter matrix over a square window.

    Sums are taken relative to the first valid point of the window to avoid
    cancellation at large depth.
    """
    height, width = valid.shape
    for v in range(row0, row1):
        for u in range(width):
            if v < radius or v >= height - radius or u < radius or u >= width - radius:
                continue
            ox = 0.0
            oy = 0.0
            oz = 0.0
            have_origin = False
            n = 0
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            s00 = 0.0
            s01 = 0.0
            s02 = 0.0
            s11 = 0.0
            s12 = 0.0
            s22 = 0.0
            for dv in range(-radius, radius + 1):
                for du in range(-radius, radius + 1):
                    vq = v + dv
                    uq = u + du
                    if not valid[vq, uq]:
                        continue
                    if not have_origin:
                        ox = points[vq, uq, 0]
                        oy = points[vq, uq, 1]
                        oz = points[vq, uq, 2]
                        have_origin = True
                    x = points[vq, uq, 0] - ox
                    y = points[vq, uq, 1] - oy
                    z = points[vq, uq, 2] - oz
                    n += 1
                    s0 += x
                    s1 += y
                    s2 += z
                    s00 += x * x
                    s01 += x * y
                    s02 += x * z
                    s11 += y * y
                    s12 += y * z
                    s22 += z * z
            count[v, u] = n
            if n == 0:
                continue
            m0 = s0 / n
            m1 = s1 / n
            m2 = s2 / n
            scatter[v, u, 0, 0] = s00 - n * m0 * m0
            scatter[v, u, 0, 1] = s01 - n * m0 * m1
            scatter[v, u, 0, 2] = s02 - n * m0 * m2
            scatter[v, u, 1, 1] = s11 - n * m1 * m1
            scatter[v, u, 1, 2] = s12 - n * m1 * m2
            scatter[v, u, 2, 2] = s22 - n * m2 * m2
            scatter[v, u, 1, 0] = scatter[v, u, 0, 1]
            scatter[v, u, 2, 0] = scatter[v, u, 0, 2]
            scatter[v, u, 2, 1] = scatter[v, u, 1, 2]
