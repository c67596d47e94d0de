"""Elevation rasters, point lookup and great-circle profiles.

Grids are node-registered: sample ``(r, c)`` sits at latitude
``origin_lat - r * cell_size`` and longitude ``origin_lon + c * cell_size``,
with row 0 the northern edge.  All terrain work happens in native doubles;
the model's working precision only applies once a profile is handed to it.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .itm.model import TerrainProfile
from .rng import stream

EARTH_RADIUS_M = 6_371_000.0

# fractional grid coordinates this close to an integer are treated as on the node
_NODE_SNAP = 1e-9


class TerrainError(ValueError):
    pass


class TerrainFormatError(TerrainError):
    pass


class TerrainBoundsError(TerrainError):
    pass


class NoDataError(TerrainError):
    pass


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    height_agl: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if not (self.height_agl >= 0 and math.isfinite(self.height_agl)):
            raise ValueError(f"height above ground must be >= 0, got {self.height_agl}")


@dataclass(frozen=True, eq=False)
class ElevationGrid:
    origin: tuple  # (lat, lon) of the north-west node
    cell_size: float  # degrees
    samples: np.ndarray = field(repr=False)  # (rows, cols) metres
    nodata: float | None = None

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise TerrainFormatError(f"grid needs at least 2x2 samples, got shape {arr.shape}")
        if not (self.cell_size > 0 and math.isfinite(self.cell_size)):
            raise TerrainFormatError(f"cell size must be positive, got {self.cell_size}")
        mask = self._nodata_mask(arr)
        if not np.all(np.isfinite(arr[~mask])):
            raise TerrainFormatError("grid contains non-finite samples")
        arr.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "_mask", mask)

    def _nodata_mask(self, arr):
        if self.nodata is None:
            return np.zeros(arr.shape, dtype=bool)
        return arr == self.nodata

    @property
    def rows(self) -> int:
        return self.samples.shape[0]

    @property
    def cols(self) -> int:
        return self.samples.shape[1]

    @property
    def nodata_mask(self) -> np.ndarray:
        return self._mask

    @property
    def bounds(self) -> tuple:
        """(lat_min, lat_max, lon_min, lon_max) covered by the nodes."""
        lat_max, lon_min = self.origin
        return (
            lat_max - (self.rows - 1) * self.cell_size,
            lat_max,
            lon_min,
            lon_min + (self.cols - 1) * self.cell_size,
        )

    def contains(self, lat: float, lon: float) -> bool:
        lat_min, lat_max, lon_min, lon_max = self.bounds
        return lat_min <= lat <= lat_max and lon_min <= lon <= lon_max

    def resolution_m(self, lat: float) -> float:
        """Node spacing in metres at ``lat`` (the finer of the two axes)."""
        dy = math.radians(self.cell_size) * EARTH_RADIUS_M
        return min(dy, dy * math.cos(math.radians(lat)))


# ---------------------------------------------------------------------------
# file formats

_ESRI_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "cellsize", "nodata_value")
_SRTM_NAME = re.compile(r"^([NS])(\d{1,2})([EW])(\d{1,3})", re.IGNORECASE)


def load_grid(path) -> ElevationGrid:
    """Read an ESRI ASCII grid or an SRTM-style raw tile (``N40W106.hgt``)."""
    path = os.fspath(path)
    name = os.path.basename(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise TerrainFormatError(f"{path}: cannot read ({exc.strerror})") from exc
    if _SRTM_NAME.match(name) and not name.lower().endswith((".asc", ".txt")):
        return _load_srtm(data, name)
    return _load_esri(data, path)


def _load_srtm(data: bytes, name: str) -> ElevationGrid:
    n_samples = len(data) // 2
    n = math.isqrt(n_samples)
    if len(data) % 2 or n * n != n_samples or n < 2:
        # name the byte where a square tile would have ended
        raise TerrainFormatError(
            f"{name}: {len(data)} bytes is not a square grid of 16-bit samples (offset {2 * n * n})"
        )
    m = _SRTM_NAME.match(name)
    lat = int(m.group(2)) * (1 if m.group(1).upper() == "N" else -1)
    lon = int(m.group(4)) * (1 if m.group(3).upper() == "E" else -1)
    arr = np.frombuffer(data, dtype=">i2").reshape(n, n).astype(np.float64)
    # tile name is the south-west corner; nodes include both edges
    return ElevationGrid(origin=(lat + 1.0, float(lon)), cell_size=1.0 / (n - 1), samples=arr, nodata=-32768.0)


def _load_esri(data: bytes, path: str) -> ElevationGrid:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise TerrainFormatError(f"{path}: not an ASCII grid (byte offset {exc.start})") from exc
    tokens = text.split()
    header = {}
    pos = 0
    while pos + 1 < len(tokens) and tokens[pos].lower() in _ESRI_KEYS:
        key = tokens[pos].lower()
        try:
            header[key] = float(tokens[pos + 1])
        except ValueError:
            raise TerrainFormatError(f"{path}: bad header value {tokens[pos + 1]!r} for {key}") from None
        pos += 2
    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            first = tokens[pos] if pos < len(tokens) else "<end of file>"
            raise TerrainFormatError(f"{path}: missing header field {key} (found {first!r})")
    ncols, nrows = header["ncols"], header["nrows"]
    if ncols != int(ncols) or nrows != int(nrows) or ncols < 2 or nrows < 2:
        raise TerrainFormatError(f"{path}: ncols/nrows must be integers >= 2")
    ncols, nrows = int(ncols), int(nrows)
    cs = header["cellsize"]
    if "xllcenter" in header and "yllcenter" in header:
        x0, y0 = header["xllcenter"], header["yllcenter"]
    elif "xllcorner" in header and "yllcorner" in header:
        x0, y0 = header["xllcorner"] + 0.5 * cs, header["yllcorner"] + 0.5 * cs
    else:
        raise TerrainFormatError(f"{path}: header needs xllcorner/yllcorner or xllcenter/yllcenter")

    body = tokens[pos:]
    need = nrows * ncols
    if len(body) < need:
        raise TerrainFormatError(f"{path}: expected {need} samples, file ends after {len(body)}")
    if len(body) > need:
        raise TerrainFormatError(f"{path}: unexpected token {body[need]!r} after {need} samples")
    try:
        arr = np.array([float(t) for t in body], dtype=np.float64)
    except ValueError:
        bad = next(t for t in body if not _is_float(t))
        raise TerrainFormatError(f"{path}: bad sample token {bad!r}") from None
    return ElevationGrid(
        origin=(y0 + (nrows - 1) * cs, x0),
        cell_size=cs,
        samples=arr.reshape(nrows, ncols),
        nodata=header.get("nodata_value"),
    )


def _is_float(t: str) -> bool:
    try:
        float(t)
    except ValueError:
        return False
    return True


def write_esri_ascii(grid: ElevationGrid, path) -> None:
    """Write ``grid`` as an ESRI ASCII grid (cell-centre registration)."""
    lat_min, _, lon_min, _ = grid.bounds
    nodata = grid.nodata if grid.nodata is not None else -9999.0
    with open(path, "w") as fh:
        fh.write(f"ncols {grid.cols}\nnrows {grid.rows}\n")
        fh.write(f"xllcenter {lon_min!r}\nyllcenter {lat_min!r}\n")
        fh.write(f"cellsize {grid.cell_size!r}\nNODATA_value {nodata!r}\n")
        for row in grid.samples:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


# ---------------------------------------------------------------------------
# lookup and profiles


def _grid_coord(x: float) -> float:
    r = round(x)
    return float(r) if abs(x - r) < _NODE_SNAP else x


def elevation_at(grid: ElevationGrid, lat: float, lon: float) -> float:
    """Bilinear elevation at (lat, lon); exact at grid nodes."""
    if not grid.contains(lat, lon):
        raise TerrainBoundsError(f"point ({lat}, {lon}) lies outside grid bounds {grid.bounds}")
    fr = _grid_coord((grid.origin[0] - lat) / grid.cell_size)
    fc = _grid_coord((lon - grid.origin[1]) / grid.cell_size)
    fr = min(max(fr, 0.0), grid.rows - 1.0)
    fc = min(max(fc, 0.0), grid.cols - 1.0)
    r0 = min(int(fr), grid.rows - 2)
    c0 = min(int(fc), grid.cols - 2)
    tr = fr - r0
    tc = fc - c0
    z = grid.samples
    weights = ((1.0 - tr) * (1.0 - tc), (1.0 - tr) * tc, tr * (1.0 - tc), tr * tc)
    cells = ((r0, c0), (r0, c0 + 1), (r0 + 1, c0), (r0 + 1, c0 + 1))
    for w, (r, c) in zip(weights, cells):
        if w != 0.0 and grid.nodata_mask[r, c]:
            raise NoDataError(f"nodata sample at row {r}, col {c} next to ({lat}, {lon})")
    top = (1.0 - tc) * z[r0, c0] + tc * z[r0, c0 + 1]
    bottom = (1.0 - tc) * z[r0 + 1, c0] + tc * z[r0 + 1, c0 + 1]
    return float((1.0 - tr) * top + tr * bottom)


def _unit(lat: float, lon: float) -> np.ndarray:
    phi, lam = math.radians(lat), math.radians(lon)
    return np.array([math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)])


def central_angle(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle angle between two points (radians), haversine form."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dphi = p2 - p1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2) ** 2
    return 2.0 * math.asin(min(1.0, math.sqrt(h)))


def great_circle_distance(a: GeoPoint, b: GeoPoint) -> float:
    return EARTH_RADIUS_M * central_angle(a, b)


def great_circle_points(a: GeoPoint, b: GeoPoint, n: int):
    """``n + 1`` (lat, lon) pairs at equal arc length from ``a`` to ``b``, endpoints exact."""
    omega = central_angle(a, b)
    ua, ub = _unit(a.lat, a.lon), _unit(b.lat, b.lon)
    s = math.sin(omega)
    pts = [(a.lat, a.lon)]
    for i in range(1, n):
        f = i / n
        v = (math.sin((1.0 - f) * omega) * ua + math.sin(f * omega) * ub) / s
        pts.append((math.degrees(math.atan2(v[2], math.hypot(v[0], v[1]))), math.degrees(math.atan2(v[1], v[0]))))
    pts.append((b.lat, b.lon))
    return pts


def default_spacing(grid: ElevationGrid, a: GeoPoint, b: GeoPoint) -> float:
    length = great_circle_distance(a, b)
    return max(grid.resolution_m(0.5 * (a.lat + b.lat)), length / 2000.0)


def extract_profile(grid: ElevationGrid, a: GeoPoint, b: GeoPoint, spacing: float | None = None) -> TerrainProfile:
    """Terrain profile along the great circle from ``a`` to ``b``.

    The path is cut into the smallest whole number of equal steps no longer
    than ``spacing`` (default: the grid resolution, or path/2000 if that is
    coarser), so the stored spacing is ``length / n``.  Sample positions are
    always computed from the lexicographically smaller endpoint, which makes
    the a-to-b and b-to-a profiles exact reverses of each other.
    """
    if (a.lat, a.lon) == (b.lat, b.lon):
        raise ValueError("profile endpoints coincide")
    if spacing is None:
        spacing = default_spacing(grid, a, b)
    if not (spacing > 0 and math.isfinite(spacing)):
        raise ValueError(f"spacing must be positive, got {spacing}")
    for p in (a, b):
        if not grid.contains(p.lat, p.lon):
            raise TerrainBoundsError(f"endpoint ({p.lat}, {p.lon}) lies outside grid bounds {grid.bounds}")
    length = great_circle_distance(a, b)
    n = max(1, math.ceil(length / spacing - 1e-9))
    flip = (b.lat, b.lon) < (a.lat, a.lon)
    start, end = (b, a) if flip else (a, b)
    pts = great_circle_points(start, end, n)
    elev = []
    for lat, lon in pts:
        if not grid.contains(lat, lon):
            raise TerrainBoundsError(f"path leaves the grid near ({lat:.6f}, {lon:.6f})")
        elev.append(elevation_at(grid, lat, lon))
    if flip:
        elev.reverse()
    return TerrainProfile(length / n, elev)


# ---------------------------------------------------------------------------
# synthetic terrain

# default synthetic extent: the study box plus a margin, at 0.3 arc-second
# nodes (the resolution of the survey DEM the study box was profiled from)
SYNTH_DEFAULTS = {
    "origin": (40.08, -105.33),
    "rows": 1622,
    "cols": 1802,
    "cell_size": 1.0 / 12000.0,
}


def synth_grid(kind: str, params: dict | None = None, seed: int = 0) -> ElevationGrid:
    """Deterministic synthetic grid.

    kinds and their parameters (all optional):

    ``flat``          h
    ``ramp``          base, dz_dlat, dz_dlon (metres per degree, from the
                      south-west node)
    ``knife_edge``    base, ridge, orientation ("ns" ridge along the middle
                      column, "ew" along the middle row)
    ``random_hills``  min, max, n_hills, mesa_fraction

    ``origin``, ``rows``, ``cols`` and ``cell_size`` override the extent.
    """
    p = dict(SYNTH_DEFAULTS)
    p.update(params or {})
    rows, cols, cs = int(p["rows"]), int(p["cols"]), float(p["cell_size"])
    lat0, lon0 = p["origin"]
    if kind == "flat":
        z = np.full((rows, cols), float(p.get("h", 1600.0)))
    elif kind == "ramp":
        r = np.arange(rows)[:, None]
        c = np.arange(cols)[None, :]
        dlat = (rows - 1 - r) * cs
        dlon = c * cs
        z = float(p.get("base", 1600.0)) + float(p.get("dz_dlat", 0.0)) * dlat + float(p.get("dz_dlon", 0.0)) * dlon
        z = np.broadcast_to(z, (rows, cols)).copy()
    elif kind == "knife_edge":
        z = np.full((rows, cols), float(p.get("base", 1600.0)))
        ridge = float(p.get("ridge", 1800.0))
        if p.get("orientation", "ns") == "ns":
            z[:, cols // 2] = ridge
        else:
            z[rows // 2, :] = ridge
    elif kind == "random_hills":
        z = _random_hills(rows, cols, p, seed)
    else:
        raise ValueError(f"unknown synthetic terrain kind {kind!r}")
    return ElevationGrid(origin=(float(lat0), float(lon0)), cell_size=cs, samples=z)


def _random_hills(rows, cols, p, seed):
    lo, hi = float(p.get("min", 1562.15)), float(p.get("max", 2550.28))
    if not hi > lo:
        raise ValueError("random_hills needs max > min")
    n_hills = int(p.get("n_hills", 60))
    mesa_fraction = float(p.get("mesa_fraction", 0.3))
    s_lat, s_lon = stream(seed, "hills_center_lat"), stream(seed, "hills_center_lon")
    s_rad, s_h, s_mesa = stream(seed, "hills_radius"), stream(seed, "hills_height"), stream(seed, "hills_mesa")
    r = np.arange(rows, dtype=np.float64)[:, None]
    c = np.arange(cols, dtype=np.float64)[None, :]
    z = np.zeros((rows, cols))
    span = max(rows, cols)
    for _ in range(n_hills):
        cr = s_lat.uniform() * (rows - 1)
        cc = s_lon.uniform() * (cols - 1)
        rad = s_rad.uniform_range(0.03, 0.25) * span
        h = s_h.uniform_range(0.2, 1.0)
        bump = h * np.exp(-((r - cr) ** 2 + (c - cc) ** 2) / (2.0 * rad * rad))
        if s_mesa.uniform() < mesa_fraction:
            # flat-topped mesa: cut the bump at 60% of its height
            bump = np.minimum(bump, 0.6 * h)
        z += bump
    # a gentle west-to-east descent, mountains to plains
    z += 0.5 * (1.0 - c / (cols - 1))
    zmin, zmax = z.min(), z.max()
    z = lo + (z - zmin) / (zmax - zmin) * (hi - lo)
    z = np.clip(z, lo, hi)
    z[np.unravel_index(np.argmin(z), z.shape)] = lo
    z[np.unravel_index(np.argmax(z), z.shape)] = hi
    return z
