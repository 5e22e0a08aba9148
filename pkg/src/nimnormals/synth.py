"""Synthetic depth scenes with analytic ground-truth normals.

Three scene kinds are supported:

* ``plane``  -- inverse depth solved from the plane equation, exact normals,
* ``sphere`` -- per-pixel ray/sphere intersection, normal ``(p - c) / r``,
* ``step``   -- fronto-parallel background with a raised box; ground truth is
  ``[0, 0, -1]`` except on a dilated seam around the depth jump.

Ground truth is always camera-facing (``n . p < 0``).
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .errors import EmptySceneError, FormatError, InvalidInputError
from .geometry import CameraIntrinsics, DepthImage, NormalMap, pixel_grid
from .oracles import PlaneModel

SCENE_KINDS = ("plane", "sphere", "step")
NOISE_MODELS = ("none", "gaussian_depth", "gaussian_inverse_depth")


@dataclass(frozen=True)
class SceneSpec:
    kind: str
    width: int
    height: int
    intrinsics: CameraIntrinsics
    plane: PlaneModel | None = None
    sphere_center: tuple[float, float, float] | None = None
    sphere_radius: float | None = None
    background_depth: float | None = None
    # (u0, v0, u1, v1), half-open pixel box.
    box: tuple[int, int, int, int] | None = None
    box_depth: float | None = None
    max_depth: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in SCENE_KINDS:
            raise InvalidInputError(f"unknown scene kind {self.kind!r}; expected one of {SCENE_KINDS}")
        if self.width < 1 or self.height < 1:
            raise InvalidInputError(f"resolution must be positive, got {self.width}x{self.height}")
        if not self.max_depth > 0:
            raise InvalidInputError("max_depth must be positive")
        if self.kind == "plane" and self.plane is None:
            raise InvalidInputError("plane scene needs a plane")
        if self.kind == "sphere":
            if self.sphere_center is None or self.sphere_radius is None:
                raise InvalidInputError("sphere scene needs a center and radius")
            r = self.sphere_radius
            if not (r > 0 and all(math.isfinite(c) for c in self.sphere_center)):
                raise InvalidInputError("sphere needs a finite center and positive radius")
            if self.sphere_center[2] - r <= 0:
                raise InvalidInputError("sphere must lie entirely in front of the camera")
        if self.kind == "step":
            if self.background_depth is None or self.box is None or self.box_depth is None:
                raise InvalidInputError("step scene needs background_depth, box and box_depth")
            if not (self.background_depth > 0 and self.box_depth > 0):
                raise InvalidInputError("step depths must be positive")

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, str]) -> SceneSpec:
        """Build from a flat key-value document (see :mod:`nimnormals.io`)."""
        try:
            K = CameraIntrinsics(
                float(cfg["fx"]), float(cfg["fy"]), float(cfg["cx"]), float(cfg["cy"])
            )
            kind = cfg["kind"].strip()
            kwargs = dict(
                kind=kind,
                width=int(cfg["width"]),
                height=int(cfg["height"]),
                intrinsics=K,
                max_depth=float(cfg.get("max_depth", "inf")),
            )
            if kind == "plane":
                kwargs["plane"] = PlaneModel.from_normal(_floats(cfg["normal"], 3), float(cfg["beta"]))
            elif kind == "sphere":
                kwargs["sphere_center"] = tuple(_floats(cfg["center"], 3))
                kwargs["sphere_radius"] = float(cfg["radius"])
            elif kind == "step":
                kwargs["background_depth"] = float(cfg["background_depth"])
                kwargs["box"] = tuple(int(x) for x in _floats(cfg["box"], 4))
                kwargs["box_depth"] = float(cfg["box_depth"])
        except KeyError as exc:
            raise FormatError(f"scene config is missing key {exc.args[0]!r}") from None
        except (ValueError, ZeroDivisionError) as exc:
            raise FormatError(f"bad scene config value: {exc}") from None
        return cls(**kwargs)


@dataclass(frozen=True)
class NoiseSpec:
    model: str = "none"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model not in NOISE_MODELS:
            raise InvalidInputError(f"unknown noise model {self.model!r}; expected one of {NOISE_MODELS}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidInputError(f"noise sigma must be finite and >= 0, got {self.sigma}")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must fit in 64 unsigned bits")

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, str]) -> NoiseSpec:
        try:
            return cls(
                model=cfg.get("noise", "none").strip(),
                sigma=float(cfg.get("sigma", "0")),
                seed=int(cfg.get("seed", "0")),
            )
        except ValueError as exc:
            raise FormatError(f"bad noise config value: {exc}") from None


def _floats(text: str, n: int) -> list[float]:
    parts = text.replace(",", " ").split()
    if len(parts) != n:
        raise ValueError(f"expected {n} numbers, got {text!r}")
    return [float(p) for p in parts]


def _dilate(mask: np.ndarray) -> np.ndarray:
    """3x3 binary dilation with a false border."""
    padded = np.pad(mask, 1)
    out = np.zeros_like(mask)
    H, W = mask.shape
    for dv in range(3):
        for du in range(3):
            out |= padded[dv : dv + H, du : du + W]
    return out


def _render_plane(s: SceneSpec, xs: np.ndarray, ys: np.ndarray):
    n = s.plane.n
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = -(n[0] * xs + n[1] * ys + n[2]) / s.plane.beta
        depth = 1.0 / inv
    valid = (inv > 0) & np.isfinite(depth) & (depth <= s.max_depth)
    normals = np.broadcast_to(s.plane.camera_facing_normal(), (s.height, s.width, 3)).copy()
    return depth, valid, normals


def _render_sphere(s: SceneSpec, xs: np.ndarray, ys: np.ndarray):
    c = np.asarray(s.sphere_center, dtype=np.float64)
    r = s.sphere_radius
    # Ray d = (x, y, 1); |t d - c|^2 = r^2, nearer root via the stable form.
    dd = xs * xs + ys * ys + 1.0
    dc = xs * c[0] + ys * c[1] + c[2]
    cc = c @ c - r * r
    disc = dc * dc - dd * cc
    hit = disc > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        q = dc + np.sqrt(np.where(hit, disc, 0.0))
        t = cc / q
    depth = np.where(hit, t, 0.0)
    pts = np.stack([depth * xs, depth * ys, depth], axis=-1)
    normals = pts - c
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    facing = np.einsum("ijk,ijk->ij", normals, pts)
    valid = hit & (depth > 0) & np.isfinite(depth) & (facing < 0) & (depth <= s.max_depth)
    return depth, valid, normals


def _render_step(s: SceneSpec, xs: np.ndarray, ys: np.ndarray):
    u0, v0, u1, v1 = s.box
    inside = np.zeros((s.height, s.width), dtype=bool)
    inside[max(v0, 0) : max(v1, 0), max(u0, 0) : max(u1, 0)] = True
    depth = np.where(inside, s.box_depth, s.background_depth)
    valid = depth <= s.max_depth
    normals = np.broadcast_to([0.0, 0.0, -1.0], (s.height, s.width, 3)).copy()
    return depth, valid, normals


def render_scene(s: SceneSpec) -> tuple[DepthImage, NormalMap]:
    """Depth image and ground-truth normals for ``s``.

    Raises :class:`EmptySceneError` if no pixel sees the scene.
    """
    xs, ys = pixel_grid(s.height, s.width, s.intrinsics)
    render = {"plane": _render_plane, "sphere": _render_sphere, "step": _render_step}[s.kind]
    depth, valid, normals = render(s, xs, ys)
    depth = np.where(valid, depth, 0.0)
    if not valid.any():
        raise EmptySceneError(f"{s.kind} scene renders no visible pixel")
    gt_valid = valid.copy()
    if s.kind == "step" and s.background_depth != s.box_depth:
        level = depth == s.box_depth
        seam = _dilate(level) & _dilate(~level)
        gt_valid &= ~_dilate(seam)
    normals = np.where(gt_valid[..., None], normals, np.nan)
    return DepthImage(depth, valid), NormalMap(normals, gt_valid)


def apply_noise(Z: DepthImage, n: NoiseSpec) -> DepthImage:
    """Perturb valid depths with seeded Gaussian noise.

    Draw ``k`` of a Philox stream keyed by ``seed`` goes to raster index ``k``,
    so the result depends only on (seed, pixel index).  Pixels pushed to
    non-positive or non-finite depth become invalid.
    """
    if n.model == "none" or n.sigma == 0:
        return DepthImage(Z.depth.copy(), Z.valid.copy())
    rng = np.random.Generator(np.random.Philox(key=n.seed))
    eps = rng.standard_normal(Z.depth.size).reshape(Z.shape) * n.sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        if n.model == "gaussian_depth":
            noisy = Z.depth + eps
        else:
            noisy = 1.0 / (1.0 / Z.depth + eps)
    noisy = np.where(Z.valid, noisy, Z.depth)
    valid = Z.valid & np.isfinite(noisy) & (noisy > 0)
    return DepthImage(np.where(valid, noisy, 0.0), valid)
