"""Public entry points of the model at a chosen precision.

``p`` is the significand width in bits; ``p=0`` runs on native doubles and is
the machine-precision baseline.  Values come back in the arithmetic they were
computed in (``MPFloat`` for ``p > 0``, ``numpy.float64`` otherwise); wrap them in
``mpnum.to_native`` or ``float()`` to compare.
"""

from __future__ import annotations

import functools

import numpy as np

from . import core
from .arith import arithmetic_for
from .model import (
    ComputationError,
    DomainError,
    PathGeometry,
    PredictionResult,
    PropagationParams,
    TerrainProfile,
)
from .trace import NO_TRACE, BranchTrace


def _quiet(fn):
    # IEEE special values are data here, not warnings
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(all="ignore"):
            return fn(*args, **kwargs)

    return wrapper


def _recorder(trace):
    if trace is None or trace is False:
        return None, NO_TRACE
    if trace is True:
        t = BranchTrace()
        return t, t
    return trace, trace


def _geometry(m, s) -> PathGeometry:
    return PathGeometry(
        precision=m.precision,
        distance=s.dist,
        effective_earth_curvature=s.gme,
        horizon_distance_tx=s.terrain_dl[0],
        horizon_distance_rx=s.terrain_dl[1],
        horizon_elevation_angle_tx=s.the[0],
        horizon_elevation_angle_rx=s.the[1],
        delta_h=s.dh,
        effective_height_tx=s.he[0],
        effective_height_rx=s.he[1],
        line_of_sight=s.los,
        model_horizon_distance=(s.dl[0], s.dl[1]),
        antenna_height=(s.hg[0], s.hg[1]),
        wave_number=s.wn,
        surface_refractivity=s.ens,
        surface_impedance=s.zgnd,
        kwx=s.kwx,
    )


def _state_from_geometry(m, geom: PathGeometry, params: PropagationParams):
    if geom.precision != m.precision:
        raise ValueError(f"geometry was prepared at p={geom.precision}, not p={m.precision}")
    s = core._Prop()
    s.dist = geom.distance
    s.gme = geom.effective_earth_curvature
    s.the = [geom.horizon_elevation_angle_tx, geom.horizon_elevation_angle_rx]
    s.dl = list(geom.model_horizon_distance)
    s.terrain_dl = (geom.horizon_distance_tx, geom.horizon_distance_rx)
    s.los = geom.line_of_sight
    s.dh = geom.delta_h
    s.he = [geom.effective_height_tx, geom.effective_height_rx]
    s.hg = list(geom.antenna_height)
    s.wn = geom.wave_number
    s.ens = geom.surface_refractivity
    s.zgnd = geom.surface_impedance
    s.kwx = geom.kwx
    s.klim = params.climate
    s.mdvar = params.mdvar
    s.dx = None
    return s


def _prepare(m, tr, profile: TerrainProfile, params: PropagationParams):
    s = core.new_state(m, tr, profile.elevations, profile.spacing, params)
    core.qlrpfl(m, tr, s)
    return s


@_quiet
def prepare_path(profile: TerrainProfile, params: PropagationParams, p: int, trace=None) -> PathGeometry:
    """Horizon search, terrain irregularity and effective heights for a profile."""
    if not isinstance(profile, TerrainProfile):
        profile = TerrainProfile(*profile)
    m = arithmetic_for(p)
    _, tr = _recorder(trace)
    return _geometry(m, _prepare(m, tr, profile, params))


@_quiet
def reference_attenuation(distance, geom: PathGeometry, params: PropagationParams, p: int, trace=None):
    """Attenuation relative to free space at ``distance`` metres, and its regime."""
    m = arithmetic_for(p)
    _, tr = _recorder(trace)
    if not distance > 0:
        raise DomainError("distance must be positive")
    s = _state_from_geometry(m, geom, params)
    s.dist = m.num(distance)
    aref = core.lrprop(m, tr, s)
    return aref, core.classify_mode(m, tr, s)


@_quiet
def avar(zt, zl, zc, params: PropagationParams, geom: PathGeometry, p: int, trace=None):
    """Variability adjustment (dB) added to the reference attenuation.

    ``zt``, ``zl``, ``zc`` are standard normal deviates for time, location and
    situation (see :func:`qerfi`).
    """
    m = arithmetic_for(p)
    _, tr = _recorder(trace)
    s = _state_from_geometry(m, geom, params)
    aref = core.lrprop(m, NO_TRACE, s)
    total = core.avar(m, tr, s, m.num(zt), m.num(zl), m.num(zc))
    return total - aref


@_quiet
def point_to_point(profile: TerrainProfile, params: PropagationParams, p: int, trace=True) -> PredictionResult:
    """Median-style path loss for one profile, with branch tracing by default.

    ``trace`` may be ``True`` (record into a fresh :class:`BranchTrace`),
    a ``BranchTrace`` to append to, or ``None``/``False``.
    """
    if not isinstance(profile, TerrainProfile):
        profile = TerrainProfile(*profile)
    m = arithmetic_for(p)
    recorded, tr = _recorder(trace)
    zc = core.qerfi(m, tr, m.num(params.confidence))
    zr = core.qerfi(m, tr, m.num(params.reliability))
    s = _prepare(m, tr, profile, params)
    geom = _geometry(m, s)
    aref = core.lrprop(m, tr, s)
    fs = core.free_space_loss(m, m.num(params.frequency), s.dist / 1000.0)
    mode = core.classify_mode(m, tr, s)
    atten = core.avar(m, tr, s, zr, m.num(0.0), zc)
    total = atten + fs
    if not _finite(m, total):
        raise ComputationError(f"non-finite loss at p={m.precision}")
    return PredictionResult(
        precision=m.precision,
        total_loss=total,
        free_space_loss=fs,
        reference_attenuation=aref,
        variability=atten - aref,
        mode=mode,
        kwx=s.kwx,
        geometry=geom,
        trace=recorded,
    )


def _finite(m, x) -> bool:
    v = m.native(x)
    return v == v and abs(v) != float("inf")


# helpers evaluated standalone ------------------------------------------------


@_quiet
def aknfe(v2, p: int, trace=None):
    """Knife-edge attenuation (dB) for the squared Fresnel parameter ``v2``."""
    if not v2 >= 0:
        raise DomainError(f"aknfe needs v2 >= 0, got {v2}")
    m = arithmetic_for(p)
    return core.aknfe(m, _recorder(trace)[1], m.num(v2))


@_quiet
def fht(x, pk, p: int, trace=None):
    """Height-gain term of the three-radii diffraction method."""
    if not (x > 0 and pk > 0):
        raise DomainError(f"fht needs x > 0 and pk > 0, got x={x}, pk={pk}")
    m = arithmetic_for(p)
    return core.fht(m, _recorder(trace)[1], m.num(x), m.num(pk))


@_quiet
def h0f(r, et, p: int, trace=None):
    """Troposcatter frequency-gain function."""
    if not (r > 0 and et >= 0):
        raise DomainError(f"h0f needs r > 0 and et >= 0, got r={r}, et={et}")
    m = arithmetic_for(p)
    return core.h0f(m, _recorder(trace)[1], m.num(r), m.num(et))


@_quiet
def ahd(td, p: int, trace=None):
    """Troposcatter distance function of the angular distance product ``td``."""
    if not td > 0:
        raise DomainError(f"ahd needs td > 0, got {td}")
    m = arithmetic_for(p)
    return core.ahd(m, _recorder(trace)[1], m.num(td))


@_quiet
def qerfi(q, p: int, trace=None):
    """Approximate inverse of the standard normal survival function."""
    if not 0 < q < 1:
        raise DomainError(f"qerfi needs 0 < q < 1, got {q}")
    m = arithmetic_for(p)
    return core.qerfi(m, _recorder(trace)[1], m.num(q))


@_quiet
def free_space_loss(frequency_mhz, distance_km, p: int):
    if not (frequency_mhz > 0 and distance_km > 0):
        raise DomainError("frequency and distance must be positive")
    m = arithmetic_for(p)
    return core.free_space_loss(m, m.num(frequency_mhz), m.num(distance_km))
