"""boxscan: synthetic cardboard-box scan datasets with 6D ground truth."""

__version__ = "0.1.0"

from .boxmodel import BoxParams, InvalidParamsError, build_box, build_shell, unwrap_uv
from .bevel import BevelError, bevel_edges
from .mesh import MeshError, TriMesh, save_obj, to_obj
from .solidify import SolidifyError, solidify
from .sampling import (
    ConfigError,
    GenerationConfig,
    ParamSpec,
    RigidPose,
    Stream,
    default_config,
    derive_stream,
    load_config,
    look_at,
    sample_box_params,
    sample_camera_pose,
    sample_truncated,
)
from .scanner import (
    Accel,
    Intrinsics,
    RayHit,
    StructuredCloud,
    build_accel,
    generate_rays,
    intersect,
    projector_shadow_filter,
    scan,
)
from .datasetio import (
    FormatError,
    SampleRecord,
    VolumeBox,
    generate_dataset,
    generate_sample,
    ground_truth_volume_box,
    read_sample,
    write_sample,
)
from .metrics import (
    EvalSummary,
    EvaluationError,
    PosePrediction,
    evaluate,
    load_predictions,
    rotation_error,
    translation_error,
)

__all__ = [
    "__version__",
    "BoxParams",
    "InvalidParamsError",
    "build_box",
    "build_shell",
    "unwrap_uv",
    "bevel_edges",
    "BevelError",
    "solidify",
    "SolidifyError",
    "TriMesh",
    "MeshError",
    "to_obj",
    "save_obj",
    "ConfigError",
    "GenerationConfig",
    "ParamSpec",
    "RigidPose",
    "Stream",
    "default_config",
    "derive_stream",
    "load_config",
    "look_at",
    "sample_box_params",
    "sample_camera_pose",
    "sample_truncated",
    "Accel",
    "Intrinsics",
    "RayHit",
    "StructuredCloud",
    "build_accel",
    "generate_rays",
    "intersect",
    "projector_shadow_filter",
    "scan",
    "FormatError",
    "SampleRecord",
    "VolumeBox",
    "generate_dataset",
    "generate_sample",
    "ground_truth_volume_box",
    "read_sample",
    "write_sample",
    "EvalSummary",
    "EvaluationError",
    "PosePrediction",
    "evaluate",
    "load_predictions",
    "rotation_error",
    "translation_error",
]
