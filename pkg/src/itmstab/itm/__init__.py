"""Longley-Rice Irregular Terrain Model (point-to-point) at selectable precision."""

from .api import (
    ahd,
    aknfe,
    avar,
    free_space_loss,
    fht,
    h0f,
    point_to_point,
    prepare_path,
    qerfi,
    reference_attenuation,
)
from .arith import MPArithmetic, NativeArithmetic, arithmetic_for
from .model import (
    CLIMATES,
    ComputationError,
    DomainError,
    InvalidInputError,
    PathGeometry,
    PredictionResult,
    PropagationParams,
    TerrainProfile,
)
from .trace import NO_TRACE, BranchTrace, first_divergence, trace_hash

__all__ = [
    "ahd", "aknfe", "avar", "free_space_loss", "fht", "h0f", "point_to_point",
    "prepare_path", "qerfi", "reference_attenuation",
    "MPArithmetic", "NativeArithmetic", "arithmetic_for",
    "CLIMATES", "ComputationError", "DomainError", "InvalidInputError",
    "PathGeometry", "PredictionResult", "PropagationParams", "TerrainProfile",
    "NO_TRACE", "BranchTrace", "first_divergence", "trace_hash",
]
