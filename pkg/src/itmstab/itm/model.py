"""Inputs and outputs of a point-to-point prediction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

from .trace import BranchTrace


class InvalidInputError(ValueError):
    """Structurally invalid model input (short profile, bad climate code, ...)."""


class DomainError(ValueError):
    """A helper function was called outside its mathematical domain."""


class ComputationError(ArithmeticError):
    """The model reached a state it cannot produce a finite answer from."""


POLARIZATIONS = {"horizontal": 0, "vertical": 1}
# ITM variability codes; point-to-point use adds 10 (location variability off)
VARIABILITY_MODES = {"single-message": 0, "individual": 1, "mobile": 2, "broadcast": 3}

CLIMATES = {
    1: "Equatorial",
    2: "Continental Subtropical",
    3: "Maritime Subtropical",
    4: "Desert",
    5: "Continental Temperate",
    6: "Maritime Temperate, over land",
    7: "Maritime Temperate, over sea",
}


@dataclass(frozen=True)
class PropagationParams:
    frequency: float  # MHz
    tx_height: float  # m above ground
    rx_height: float
    permittivity: float = 15.0
    conductivity: float = 0.005
    climate: int = 5
    surface_refractivity: float = 301.0
    polarization: str = "vertical"
    reliability: float = 0.5
    confidence: float = 0.5
    variability_mode: str = "broadcast"

    def __post_init__(self):
        if not (self.frequency > 0 and math.isfinite(self.frequency)):
            raise InvalidInputError(f"frequency must be positive, got {self.frequency}")
        for name in ("tx_height", "rx_height"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidInputError(f"{name} must be >= 0, got {v}")
        if not self.permittivity > 0:
            raise InvalidInputError(f"permittivity must be positive, got {self.permittivity}")
        if not self.conductivity > 0:
            raise InvalidInputError(f"conductivity must be positive, got {self.conductivity}")
        if isinstance(self.climate, bool) or self.climate not in CLIMATES:
            raise InvalidInputError(f"climate must be an integer 1-7, got {self.climate!r}")
        if not self.surface_refractivity > 0:
            raise InvalidInputError("surface_refractivity must be positive")
        if self.polarization not in POLARIZATIONS:
            raise InvalidInputError(f"polarization must be one of {sorted(POLARIZATIONS)}")
        if self.variability_mode not in VARIABILITY_MODES:
            raise InvalidInputError(f"variability_mode must be one of {sorted(VARIABILITY_MODES)}")
        for name in ("reliability", "confidence"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InvalidInputError(f"{name} must lie in (0, 1), got {v}")

    @property
    def mdvar(self) -> int:
        return VARIABILITY_MODES[self.variability_mode] + 10

    @property
    def ipol(self) -> int:
        return POLARIZATIONS[self.polarization]


@dataclass(frozen=True)
class TerrainProfile:
    """Equally spaced elevations (m) from Tx to Rx."""

    spacing: float
    elevations: tuple

    def __init__(self, spacing: float, elevations: Sequence[float]):
        elevations = tuple(float(z) for z in elevations)
        if len(elevations) < 2:
            raise InvalidInputError("a profile needs at least two elevation samples")
        if not (spacing > 0 and math.isfinite(spacing)):
            raise InvalidInputError(f"profile spacing must be positive, got {spacing}")
        if not all(math.isfinite(z) for z in elevations):
            raise InvalidInputError("profile elevations must be finite")
        object.__setattr__(self, "spacing", float(spacing))
        object.__setattr__(self, "elevations", elevations)

    @property
    def intervals(self) -> int:
        return len(self.elevations) - 1

    @property
    def distance(self) -> float:
        return self.spacing * self.intervals

    def reversed(self) -> "TerrainProfile":
        return TerrainProfile(self.spacing, self.elevations[::-1])


@dataclass(frozen=True)
class PathGeometry:
    """Profile-derived quantities, in the arithmetic of ``precision``.

    ``horizon_distance_*`` are the terrain horizons found by the horizon
    search and always lie in (0, distance].  The model's own horizon
    distances (smooth-earth estimates on line-of-sight paths) are kept in
    ``model_horizon_distance``.
    """

    precision: int
    distance: Any
    effective_earth_curvature: Any
    horizon_distance_tx: Any
    horizon_distance_rx: Any
    horizon_elevation_angle_tx: Any
    horizon_elevation_angle_rx: Any
    delta_h: Any
    effective_height_tx: Any
    effective_height_rx: Any
    line_of_sight: bool
    model_horizon_distance: tuple
    antenna_height: tuple
    wave_number: Any
    surface_refractivity: Any
    surface_impedance: Any
    kwx: int = 0


@dataclass
class PredictionResult:
    precision: int
    total_loss: Any
    free_space_loss: Any
    reference_attenuation: Any
    variability: Any
    mode: str
    kwx: int
    geometry: PathGeometry
    trace: BranchTrace | None = field(default=None, repr=False)

    @property
    def loss_db(self) -> float:
        from ..mpnum import to_native

        return to_native(self.total_loss)

    def as_dict(self) -> dict:
        from ..mpnum import to_native

        out = {
            "precision_bits": self.precision,
            "total_loss_db": to_native(self.total_loss),
            "free_space_loss_db": to_native(self.free_space_loss),
            "reference_attenuation_db": to_native(self.reference_attenuation),
            "variability_db": to_native(self.variability),
            "mode": self.mode,
            "kwx": self.kwx,
        }
        if self.trace is not None:
            out["trace_hash"] = f"{self.trace.digest():016x}"
        return out
