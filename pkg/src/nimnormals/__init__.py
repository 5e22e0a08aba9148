"""Closed-form surface normal estimation from depth images."""

from .errors import (
    BehindCameraError,
    DegenerateAggregateError,
    DegenerateInputError,
    DimensionError,
    EmptySceneError,
    FormatError,
    InvalidInputError,
    NimError,
)
from .evaluation import AngularErrorReport, BenchReport, angular_error, benchmark
from .geometry import (
    CameraIntrinsics,
    CameraPoint,
    DepthImage,
    NormalMap,
    PixelCoord,
    SphericalAngles,
    angles_from_normal,
    back_project,
    normal_from_angles,
    project,
)
from .nim import (
    CandidateNormal,
    GradientField,
    aggregate_closed_form,
    candidate_normals,
    estimate_normals,
    inverse_depth_gradients,
)
from .oracles import PlaneFitWindow, PlaneModel, grid_search_angles, plane_fit_normals
from .synth import NoiseSpec, SceneSpec, apply_noise, render_scene

__version__ = "0.1.0"
