"""Deterministic synthetic imaging-condition data and incremental detector
training for planar textured objects under fold deformation."""

from .conditions import Condition, ConditionParams, Difficulty, generate_parameters
from .datastore import (
    AssetRegistry,
    DatasetManifest,
    RenderSettings,
    SampleRecord,
    derive_seed,
    generate_data,
    read_manifest,
    write_manifest,
)
from .errors import FoldlabError
from .geometry import (
    DeformationParams,
    FlatSheet,
    Mesh3D,
    Ruling,
    apply_deformation,
    isometry_deviation,
    make_flat_sheet,
    sample_deformation,
)
from .loop import (
    ALConfig,
    LearnabilityConfig,
    RunLog,
    active_learn,
    build_standard_test_set,
    learnability,
    stopping_check,
)
from .metrics import (
    Box,
    Detection,
    EvalConfig,
    GroundTruth,
    MapScore,
    evaluate_predictions,
    iou,
)

__version__ = "0.1.0"

__all__ = [
    "Condition",
    "ConditionParams",
    "Difficulty",
    "generate_parameters",
    "AssetRegistry",
    "DatasetManifest",
    "RenderSettings",
    "SampleRecord",
    "derive_seed",
    "generate_data",
    "read_manifest",
    "write_manifest",
    "FoldlabError",
    "DeformationParams",
    "FlatSheet",
    "Mesh3D",
    "Ruling",
    "apply_deformation",
    "isometry_deviation",
    "make_flat_sheet",
    "sample_deformation",
    "ALConfig",
    "LearnabilityConfig",
    "RunLog",
    "active_learn",
    "build_standard_test_set",
    "learnability",
    "stopping_check",
    "Box",
    "Detection",
    "EvalConfig",
    "GroundTruth",
    "MapScore",
    "evaluate_predictions",
    "iou",
]
