"""Fast plane fitting on organized depth images.

The toolkit precomputes per-pixel tan-angle maps from the camera intrinsics
and rewrites the implicit/explicit least-squares plane equations in
(tan_x, tan_y, 1/Z) coordinates, so most scatter-matrix sums become camera
constants.  Combined with integral images this drops the per-frame cost of
windowed plane fits roughly in half, which is what the bench module measures
and the segment module exploits.
"""

from .camera import (
    DEPTH_NOISE_COEFFICIENT,
    CameraIntrinsics,
    NoiseModel,
    Point3,
    TanAngleMaps,
    back_project,
    back_project_image,
    compute_tan_maps,
    load_intrinsics,
    noise_sigma,
    project_point,
)
from .errors import DegenerateFitError, InsufficientSamplesError
from .fitting import (
    EXPLICIT_RGBD,
    EXPLICIT_STANDARD,
    FORMULATIONS,
    IMPLICIT_RGBD,
    IMPLICIT_STANDARD,
    ExplicitPlane,
    ExplicitRgbdFitter,
    FitResult,
    ImplicitPlane,
    Scatter3,
    Scatter4,
    accumulate_scatter_naive,
    canonicalize_implicit,
    explicit_to_implicit,
    fit_explicit_rgbd,
    fit_explicit_standard,
    fit_implicit_rgbd,
    fit_implicit_standard,
    fit_rect,
    gather_window_samples,
    normal_angle,
    scatter_from_integrals,
    smallest_eigenvector,
    solve_spd3,
)
from .integral import (
    ChannelStack,
    IntegralImage,
    Rect,
    box_sum,
    build_constant_channels,
    build_integral,
    build_rgbd_explicit_channels,
    build_rgbd_implicit_channels,
    build_standard_explicit_channels,
    build_standard_implicit_channels,
)
from .segment import SegConfig, Segmentation, Tile, TileStatus, kmeans, segment, tile_features
from .synth import (
    DepthImage,
    GroundTruthPlane,
    SyntheticScene,
    intersect_plane,
    load_scene,
    parse_scene,
    ray_for_pixel,
    read_depth,
    render_scene,
    write_depth,
)
from .bench import BenchConfig, BenchReport, OpCountAudit, op_count_audit, run_bench

__version__ = "0.1.0"

__all__ = [
    "BenchConfig",
    "BenchReport",
    "CameraIntrinsics",
    "ChannelStack",
    "DEPTH_NOISE_COEFFICIENT",
    "DegenerateFitError",
    "DepthImage",
    "EXPLICIT_RGBD",
    "EXPLICIT_STANDARD",
    "ExplicitPlane",
    "ExplicitRgbdFitter",
    "FORMULATIONS",
    "FitResult",
    "GroundTruthPlane",
    "IMPLICIT_RGBD",
    "IMPLICIT_STANDARD",
    "ImplicitPlane",
    "InsufficientSamplesError",
    "IntegralImage",
    "NoiseModel",
    "OpCountAudit",
    "Point3",
    "Rect",
    "Scatter3",
    "Scatter4",
    "SegConfig",
    "Segmentation",
    "SyntheticScene",
    "TanAngleMaps",
    "Tile",
    "TileStatus",
    "accumulate_scatter_naive",
    "back_project",
    "back_project_image",
    "box_sum",
    "build_constant_channels",
    "build_integral",
    "build_rgbd_explicit_channels",
    "build_rgbd_implicit_channels",
    "build_standard_explicit_channels",
    "build_standard_implicit_channels",
    "canonicalize_implicit",
    "compute_tan_maps",
    "explicit_to_implicit",
    "fit_explicit_rgbd",
    "fit_explicit_standard",
    "fit_implicit_rgbd",
    "fit_implicit_standard",
    "fit_rect",
    "gather_window_samples",
    "intersect_plane",
    "kmeans",
    "load_intrinsics",
    "load_scene",
    "noise_sigma",
    "normal_angle",
    "op_count_audit",
    "parse_scene",
    "project_point",
    "ray_for_pixel",
    "read_depth",
    "render_scene",
    "run_bench",
    "scatter_from_integrals",
    "segment",
    "smallest_eigenvector",
    "solve_spd3",
    "tile_features",
    "write_depth",
]
