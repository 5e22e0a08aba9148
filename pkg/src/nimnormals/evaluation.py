"""Accuracy and speed measurement for normal estimators."""

from __future__ import annotations

import json
import statistics
import time
import zlib
from collections.abc import Callable
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, InvalidInputError
from .geometry import CameraIntrinsics, DepthImage, NormalMap
from .nim import estimate_normals
from .oracles import PlaneFitWindow, plane_fit_normals

THRESHOLDS_DEG = (11.25, 22.5, 30.0)


@dataclass
class AngularErrorReport:
    """Angular error statistics over mutually valid pixels.

    With no mutually valid pixel, ``defined`` is False and every statistic
    is None.
    """

    mean_deg: float | None
    median_deg: float | None
    rms_deg: float | None
    max_deg: float | None
    pct_under: dict[str, float | None]
    n_evaluated: int
    n_skipped: int
    defined: bool

    def to_json(self) -> str:
        return json.dumps({"report": "angular_error", **asdict(self)}, sort_keys=True)


@dataclass
class BenchReport:
    estimator: str
    frame_width: int
    frame_height: int
    iterations: int
    threads: int
    mode: str
    best_ms: float
    median_ms: float
    mean_ms: float
    mpix_per_s: float
    checksum: int
    budget_ms: float | None = None
    within_budget: bool | None = None

    def to_json(self) -> str:
        return json.dumps({"report": "bench", **asdict(self)}, sort_keys=True)


def angular_errors_deg(est: NormalMap, gt: NormalMap) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel error in degrees and the mutual validity mask (errors are NaN outside it)."""
    if est.shape != gt.shape:
        raise DimensionError(f"normal maps differ in size: {est.shape} vs {gt.shape}")
    both = est.valid & gt.valid
    a = np.where(both[..., None], est.normals, 0.0)
    b = np.where(both[..., None], gt.normals, 0.0)
    # atan2 keeps full precision near 0 and 180 degrees, where arccos of a
    # float32-rounded dot product would report errors of a few hundredths.
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    err = np.degrees(np.arctan2(cross, np.einsum("ijk,ijk->ij", a, b)))
    return np.where(both, err, np.nan), both


def angular_error(est: NormalMap, gt: NormalMap) -> AngularErrorReport:
    errors, both = angular_errors_deg(est, gt)
    e = errors[both]
    n_eval = int(e.size)
    n_skipped = int(both.size - n_eval)
    keys = [f"{t:g}" for t in THRESHOLDS_DEG]
    if n_eval == 0:
        return AngularErrorReport(None, None, None, None, {k: None for k in keys}, 0, n_skipped, False)
    return AngularErrorReport(
        mean_deg=float(e.mean()),
        median_deg=float(np.median(e)),
        rms_deg=float(np.sqrt(np.mean(e * e))),
        max_deg=float(e.max()),
        pct_under={k: float(np.count_nonzero(e < t)) / n_eval for k, t in zip(keys, THRESHOLDS_DEG)},
        n_evaluated=n_eval,
        n_skipped=n_skipped,
        defined=True,
    )


Estimator = Callable[[DepthImage, CameraIntrinsics, int], NormalMap]


def get_estimator(name: str, window: int = 1) -> Estimator:
    """Look up an estimator by CLI name: ``nim`` or ``planefit``."""
    if name == "nim":
        return lambda Z, K, threads=1: estimate_normals(Z, K, threads=threads)
    if name == "planefit":
        w = PlaneFitWindow(half_size=window)
        return lambda Z, K, threads=1: plane_fit_normals(Z, K, w, threads=threads)
    raise InvalidInputError(f"unknown estimator {name!r}; expected 'nim' or 'planefit'")


def checksum(n: NormalMap) -> int:
    """CRC32 of the normal raster and mask bytes."""
    return zlib.crc32(n.valid.tobytes(), zlib.crc32(np.ascontiguousarray(n.normals).tobytes()))


def benchmark(
    estimator: str | Estimator,
    Z: DepthImage,
    K: CameraIntrinsics,
    iterations: int = 10,
    threads: int = 1,
    window: int = 1,
    budget_ms: float | None = None,
) -> BenchReport:
    """Wall-clock per-frame latency after one discarded warm-up run.

    Every run's output checksum must match the warm-up's; a mismatch means the
    estimator is not deterministic and raises RuntimeError.
    """
    if iterations < 3:
        raise InvalidInputError(f"benchmark needs at least 3 iterations, got {iterations}")
    name = estimator if isinstance(estimator, str) else getattr(estimator, "__name__", "custom")
    fn = get_estimator(estimator, window) if isinstance(estimator, str) else estimator
    reference = checksum(fn(Z, K, threads))
    times = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        out = fn(Z, K, threads)
        times.append((time.perf_counter() - t0) * 1e3)
        if checksum(out) != reference:
            raise RuntimeError("estimator output changed between runs")
    median = statistics.median(times)
    return BenchReport(
        estimator=name,
        frame_width=Z.width,
        frame_height=Z.height,
        iterations=iterations,
        threads=threads,
        mode="single-thread" if threads == 1 else "row-parallel",
        best_ms=min(times),
        median_ms=median,
        mean_ms=statistics.fmean(times),
        mpix_per_s=Z.width * Z.height / (median * 1e3),
        checksum=reference,
        budget_ms=budget_ms,
        within_budget=None if budget_ms is None else median <= budget_ms,
    )
