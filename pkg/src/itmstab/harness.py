"""Multi-precision sweep engine.

A sweep draws random links in a bounding box, crosses them with every
frequency, climate and ground constant of a :class:`SweepConfig`, and runs
each case at every requested precision plus the native-double baseline
(precision 0).  Errors are measured against that baseline.

Canonical case order is link-major, then frequency, climate, ground, each in
the order the config lists them; ``case_id`` counts from 0 in that order.
Records are ordered by ``(case_id, precision)`` whatever the worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from statistics import median

from .itm import PropagationParams, point_to_point
from .itm.model import ComputationError, InvalidInputError
from .itm.trace import first_divergence
from .rng import stream
from .terrain import ElevationGrid, GeoPoint, TerrainError, extract_profile, great_circle_distance

STUDY_BBOX = (39.95324, 40.07186, -105.31843, -105.18602)
STUDY_FREQUENCIES = (0.148, 80.0, 900.0, 1900.0, 2400.0, 5280.0, 60000.0)
STUDY_CLIMATES = (1, 2, 3, 4, 5, 6, 7)
STUDY_GROUNDS = ((5.0, 0.001), (13.0, 0.002), (15.0, 0.005), (25.0, 0.02), (80.0, 5.0))
STUDY_PRECISIONS = (11, 24, 53, 64, 128, 256, 512, 1024)

GROUNDS = {
    "poor": (5.0, 0.001),
    "average": (15.0, 0.005),
    "good": (25.0, 0.02),
    "sea": (80.0, 5.0),
}

BASELINE = 0
MAX_REDRAWS = 1000

RECORD_FIELDS = (
    "case_id", "link_id", "freq_mhz", "climate", "eps_r", "sigma",
    "tx_lat", "tx_lon", "tx_h", "rx_lat", "rx_lon", "rx_h",
    "precision_bits", "loss_db", "kwx", "trace_hash", "wall_time_s",
)
SUMMARY_FIELDS = ("precision_bits", "count", "min", "q1", "median", "q3", "max", "n_outliers_3db", "max_abs_eps")


class ConfigError(ValueError):
    """Invalid sweep configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class AnalysisError(ValueError):
    def __init__(self, message: str, case_ids=()):
        super().__init__(message)
        self.case_ids = list(case_ids)


class RecordFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SweepConfig:
    bbox: tuple = STUDY_BBOX
    n_links: int = 500
    frequencies: tuple = STUDY_FREQUENCIES
    climates: tuple = STUDY_CLIMATES
    grounds: tuple = STUDY_GROUNDS
    height_range: tuple = (0.0, 35.0)
    precisions: tuple = STUDY_PRECISIONS
    seed: int = 1
    min_link_distance: float = 1000.0
    # fixed model inputs, not varied by the sweep
    surface_refractivity: float = 301.0
    polarization: str = "vertical"
    reliability: float = 0.5
    confidence: float = 0.5
    variability_mode: str = "broadcast"
    profile_spacing: float | None = None  # metres; None = terrain default

    def __post_init__(self):
        lat0, lat1, lon0, lon1 = _floats("bbox", self.bbox, 4)
        if not (-90 <= lat0 < lat1 <= 90 and -180 <= lon0 < lon1 <= 180):
            raise ConfigError("bbox", "must be (lat_min, lat_max, lon_min, lon_max) with min < max")
        if isinstance(self.n_links, bool) or not isinstance(self.n_links, int) or self.n_links < 1:
            raise ConfigError("n_links", "must be a positive integer")
        for name in ("frequencies", "climates", "grounds", "precisions"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(name, "must not be empty")
        freqs = tuple(float(f) for f in self.frequencies)
        for i, f in enumerate(freqs):
            if not (f > 0 and math.isfinite(f)):
                raise ConfigError(f"frequencies[{i}]", f"must be positive, got {f}")
        for i, c in enumerate(self.climates):
            if isinstance(c, bool) or c not in STUDY_CLIMATES:
                raise ConfigError(f"climates[{i}]", f"must be an integer 1-7, got {c!r}")
        grounds = []
        for i, g in enumerate(self.grounds):
            if isinstance(g, str):
                if g not in GROUNDS:
                    raise ConfigError(f"grounds[{i}]", f"unknown ground {g!r}; known: {sorted(GROUNDS)}")
                g = GROUNDS[g]
            eps, sgm = _floats(f"grounds[{i}]", g, 2)
            if not (eps > 0 and sgm > 0):
                raise ConfigError(f"grounds[{i}]", "permittivity and conductivity must be positive")
            grounds.append((eps, sgm))
        for i, p in enumerate(self.precisions):
            if isinstance(p, bool) or not isinstance(p, int) or p < 2:
                raise ConfigError(f"precisions[{i}]", f"must be an integer >= 2, got {p!r}")
        if len(set(self.precisions)) != len(self.precisions):
            raise ConfigError("precisions", "contains duplicates")
        h0, h1 = _floats("height_range", self.height_range, 2)
        if not 0 <= h0 <= h1:
            raise ConfigError("height_range", "must satisfy 0 <= min <= max")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if not self.min_link_distance >= 0:
            raise ConfigError("min_link_distance", "must be >= 0")
        if self.profile_spacing is not None and not self.profile_spacing > 0:
            raise ConfigError("profile_spacing", "must be positive")
        try:
            self.model_params(freqs[0], grounds[0], self.climates[0], h0, h1)
        except InvalidInputError as exc:
            raise ConfigError("model", str(exc)) from None
        object.__setattr__(self, "bbox", (lat0, lat1, lon0, lon1))
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "climates", tuple(self.climates))
        object.__setattr__(self, "grounds", tuple(grounds))
        object.__setattr__(self, "height_range", (h0, h1))
        object.__setattr__(self, "precisions", tuple(self.precisions))

    def model_params(self, frequency, ground, climate, tx_h, rx_h) -> PropagationParams:
        return PropagationParams(
            frequency=frequency,
            tx_height=tx_h,
            rx_height=rx_h,
            permittivity=ground[0],
            conductivity=ground[1],
            climate=climate,
            surface_refractivity=self.surface_refractivity,
            polarization=self.polarization,
            reliability=self.reliability,
            confidence=self.confidence,
            variability_mode=self.variability_mode,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        """Build from a JSON-style mapping; omitted fields take the defaults."""
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        kwargs = {}
        for key, value in data.items():
            if key in ("bbox", "frequencies", "climates", "height_range", "precisions"):
                if not isinstance(value, (list, tuple)):
                    raise ConfigError(key, "must be a list")
                value = tuple(value)
            elif key == "grounds":
                if not isinstance(value, (list, tuple)):
                    raise ConfigError(key, "must be a list")
                value = tuple(v if isinstance(v, str) else tuple(v) if isinstance(v, (list, tuple)) else v for v in value)
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError("<root>", str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("bbox", "frequencies", "climates", "height_range", "precisions"):
            d[key] = list(d[key])
        d["grounds"] = [list(g) for g in self.grounds]
        return d

    @property
    def n_cases(self) -> int:
        return self.n_links * len(self.frequencies) * len(self.climates) * len(self.grounds)

    @property
    def n_predictions(self) -> int:
        """Cases times (precisions + native baseline)."""
        return self.n_cases * (len(self.precisions) + 1)


def _floats(path, value, n):
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"must be {n} numbers") from None
    if len(out) != n or not all(math.isfinite(v) for v in out):
        raise ConfigError(path, f"must be {n} finite numbers")
    return out


# ---------------------------------------------------------------------------
# links and cases


@dataclass(frozen=True)
class Link:
    link_id: int
    tx: GeoPoint
    rx: GeoPoint


@dataclass(frozen=True)
class Case:
    case_id: int
    link_id: int
    frequency: float
    climate: int
    ground: tuple
    tx: GeoPoint
    rx: GeoPoint


def gen_links(seed: int, n: int, bbox, height_range, min_distance: float) -> list:
    """``n`` random links, uniform in degrees inside ``bbox``.

    Each coordinate and height has its own stream (see ``rng.STREAM_OFFSETS``);
    a pair closer than ``min_distance`` is discarded and all six quantities are
    drawn again from where their streams left off.
    """
    if n < 1:
        raise ConfigError("n_links", "must be >= 1")
    lat0, lat1, lon0, lon1 = bbox
    h0, h1 = height_range
    s = {name: stream(seed, name) for name in ("tx_lat", "tx_lon", "rx_lat", "rx_lon", "tx_h", "rx_h")}
    links = []
    for link_id in range(n):
        for _ in range(MAX_REDRAWS):
            tx = GeoPoint(s["tx_lat"].uniform_range(lat0, lat1), s["tx_lon"].uniform_range(lon0, lon1),
                          s["tx_h"].uniform_range(h0, h1))
            rx = GeoPoint(s["rx_lat"].uniform_range(lat0, lat1), s["rx_lon"].uniform_range(lon0, lon1),
                          s["rx_h"].uniform_range(h0, h1))
            if great_circle_distance(tx, rx) >= min_distance and (tx.lat, tx.lon) != (rx.lat, rx.lon):
                links.append(Link(link_id, tx, rx))
                break
        else:
            raise ConfigError(
                "min_link_distance",
                f"no link of at least {min_distance} m found in {MAX_REDRAWS} draws; bbox too small",
            )
    return links


def build_cases(links, config: SweepConfig) -> list:
    cases = []
    for link in links:
        for freq, climate, ground in product(config.frequencies, config.climates, config.grounds):
            cases.append(Case(len(cases), link.link_id, freq, climate, ground, link.tx, link.rx))
    return cases


# ---------------------------------------------------------------------------
# execution


@dataclass
class PredictionRecord:
    case_id: int
    link_id: int
    frequency: float
    climate: int
    ground: tuple
    tx: GeoPoint
    rx: GeoPoint
    precision: int
    total_loss: float  # NaN for a failed prediction
    kwx: int  # -1 for a failed prediction
    trace_hash: int | None
    wall_time: float
    error: str | None = None
    trace: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def key(self):
        return (self.case_id, self.precision)


_WORKER_GRID = None


def _init_worker(grid):
    global _WORKER_GRID
    _WORKER_GRID = grid


def _run_link(job):
    link_cases, precisions, config, keep_traces = job
    return _run_link_cases(_WORKER_GRID, link_cases, precisions, config, keep_traces)


def _run_link_cases(grid, link_cases, precisions, config, keep_traces):
    first = link_cases[0]
    out = []
    try:
        profile = extract_profile(grid, first.tx, first.rx, config.profile_spacing)
    except (TerrainError, ValueError) as exc:
        msg = f"terrain: {exc}"
        for case in link_cases:
            for p in precisions:
                out.append(_failure(case, p, msg, 0.0))
        return out
    for case in link_cases:
        params = config.model_params(case.frequency, case.ground, case.climate, case.tx.height_agl, case.rx.height_agl)
        for p in precisions:
            t0 = time.perf_counter()
            try:
                res = point_to_point(profile, params, p, trace=True)
                loss = res.loss_db
            except (ComputationError, ArithmeticError, ValueError) as exc:
                out.append(_failure(case, p, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0))
                continue
            wall = time.perf_counter() - t0
            out.append(PredictionRecord(
                case.case_id, case.link_id, case.frequency, case.climate, case.ground, case.tx, case.rx,
                p, loss, int(res.kwx), res.trace.digest(), wall,
                trace=tuple(res.trace.events) if keep_traces else None,
            ))
    return out


def _failure(case, p, msg, wall):
    return PredictionRecord(
        case.case_id, case.link_id, case.frequency, case.climate, case.ground, case.tx, case.rx,
        p, float("nan"), -1, None, wall, error=msg,
    )


def run_sweep(cases, precisions, grid: ElevationGrid, config: SweepConfig, workers: int = 1,
              keep_traces: bool = False) -> list:
    """One record per (case, precision) plus the precision-0 baseline.

    Work is split by link so each profile is extracted once.  A case whose
    path cannot be profiled gets failure records (NaN loss, ``error`` set);
    so does a single prediction that cannot produce a finite loss.
    """
    plist = [BASELINE] + sorted(set(int(p) for p in precisions) - {BASELINE})
    by_link = {}
    for case in cases:
        by_link.setdefault(case.link_id, []).append(case)
    jobs = [(cs, plist, config, keep_traces) for cs in by_link.values()]
    if workers <= 1 or len(jobs) <= 1:
        chunks = [_run_link_cases(grid, *job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(grid,)) as pool:
            chunks = list(pool.map(_run_link, jobs, chunksize=1))
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=PredictionRecord.key)
    return records


def check_coverage(grid: ElevationGrid, links) -> list:
    """Link ids whose endpoints fall outside ``grid``."""
    return [
        link.link_id for link in links
        if not (grid.contains(link.tx.lat, link.tx.lon) and grid.contains(link.rx.lat, link.rx.lon))
    ]


# ---------------------------------------------------------------------------
# analysis


@dataclass(frozen=True)
class ErrorSummary:
    precision: int
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    n_outliers_3db: int
    max_abs_eps: float


@dataclass(frozen=True)
class Outlier:
    case_id: int
    precision: int
    eps: float
    site: str  # first divergent trace site, "no-divergence", or "trace-divergent" without stored traces


def quartiles(values):
    """(q1, median, q3) with Tukey's median-of-halves hinges.

    For odd counts the median belongs to both halves, so {-1, 0, 1} gives
    q1 = -0.5 and q3 = 0.5.
    """
    v = sorted(values)
    n = len(v)
    if n == 0:
        raise ValueError("quartiles of an empty sequence")
    half = (n + 1) // 2
    return median(v[:half]), median(v), median(v[n - half:])


def _baselines(records):
    base, cases = {}, set()
    for r in records:
        cases.add(r.case_id)
        if r.precision == BASELINE:
            base[r.case_id] = r
    missing = sorted(cases - set(base))
    if missing:
        shown = ", ".join(str(c) for c in missing[:20])
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        raise AnalysisError(f"no baseline (precision 0) for case_ids {shown}{more}", missing)
    return base


def epsilons(records):
    """``{(case_id, precision): eps}`` for every prediction with a finite loss on both sides."""
    base = _baselines(records)
    out = {}
    for r in records:
        b = base[r.case_id]
        if math.isfinite(r.total_loss) and math.isfinite(b.total_loss):
            out[r.key()] = float(r.total_loss) - float(b.total_loss)
    return out


def error_stats(records, threshold_db: float = 3.0) -> list:
    eps = epsilons(records)
    per_p = {}
    for (case_id, p), e in eps.items():
        per_p.setdefault(p, []).append(e)
    out = []
    for p in sorted(per_p):
        v = per_p[p]
        q1, med, q3 = quartiles(v)
        out.append(ErrorSummary(
            precision=p, count=len(v), min=min(v), q1=q1, median=med, q3=q3, max=max(v),
            n_outliers_3db=sum(1 for e in v if abs(e) > threshold_db),
            max_abs_eps=max(abs(e) for e in v),
        ))
    return out


def trace_divergent(record: PredictionRecord, baseline: PredictionRecord) -> bool:
    return record.trace_hash != baseline.trace_hash


def find_outliers(records, threshold_db: float = 3.0) -> list:
    """Cases with |eps| above ``threshold_db``, with the first divergent branch site."""
    base = _baselines(records)
    eps = epsilons(records)
    out = []
    for r in records:
        e = eps.get(r.key())
        if r.precision == BASELINE or e is None or not abs(e) > threshold_db:
            continue
        b = base[r.case_id]
        if r.trace is not None and b.trace is not None:
            d = first_divergence(r.trace, b.trace)
            site = "no-divergence" if d is None else d[1]
        else:
            site = "trace-divergent" if trace_divergent(r, b) else "no-divergence"
        out.append(Outlier(r.case_id, r.precision, e, site))
    return out


def timing_report(records) -> dict:
    """Per precision: count, median, q1, q3, max wall time (seconds)."""
    per_p = {}
    for r in records:
        per_p.setdefault(r.precision, []).append(r.wall_time)
    out = {}
    for p in sorted(per_p):
        q1, med, q3 = quartiles(per_p[p])
        out[p] = {"count": len(per_p[p]), "median": med, "q1": q1, "q3": q3, "max": max(per_p[p])}
    return out


# ---------------------------------------------------------------------------
# files


def _fmt_hash(h):
    return "" if h is None else f"{h:016x}"


def record_row(r: PredictionRecord) -> list:
    return [
        r.case_id, r.link_id, repr(float(r.frequency)), r.climate, repr(float(r.ground[0])), repr(float(r.ground[1])),
        repr(r.tx.lat), repr(r.tx.lon), repr(r.tx.height_agl), repr(r.rx.lat), repr(r.rx.lon), repr(r.rx.height_agl),
        r.precision, f"{r.total_loss:.12g}", r.kwx, _fmt_hash(r.trace_hash), f"{r.wall_time:.6g}",
    ]


def write_records(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow(record_row(r))


def read_records(path) -> list:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RECORD_FIELDS:
            raise RecordFormatError(1, f"expected header {','.join(RECORD_FIELDS)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(RECORD_FIELDS):
                raise RecordFormatError(line, f"expected {len(RECORD_FIELDS)} fields, got {len(row)}")
            try:
                v = dict(zip(RECORD_FIELDS, row))
                loss = float(v["loss_db"])
                records.append(PredictionRecord(
                    case_id=int(v["case_id"]),
                    link_id=int(v["link_id"]),
                    frequency=float(v["freq_mhz"]),
                    climate=int(v["climate"]),
                    ground=(float(v["eps_r"]), float(v["sigma"])),
                    tx=GeoPoint(float(v["tx_lat"]), float(v["tx_lon"]), float(v["tx_h"])),
                    rx=GeoPoint(float(v["rx_lat"]), float(v["rx_lon"]), float(v["rx_h"])),
                    precision=int(v["precision_bits"]),
                    total_loss=loss,
                    kwx=int(v["kwx"]),
                    trace_hash=int(v["trace_hash"], 16) if v["trace_hash"] else None,
                    wall_time=float(v["wall_time_s"]),
                    error=None if math.isfinite(loss) else "failed",
                ))
            except ValueError as exc:
                raise RecordFormatError(line, str(exc)) from None
    return records


def write_summary(path, summaries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for s in summaries:
            w.writerow([s.precision, s.count, *(f"{x:.12g}" for x in (s.min, s.q1, s.median, s.q3, s.max)),
                        s.n_outliers_3db, f"{s.max_abs_eps:.12g}"])


def write_boxplot(path, summaries) -> None:
    """Whitespace-separated ``precision min q1 median q3 max`` rows."""
    with open(path, "w") as fh:
        fh.write("# precision_bits min q1 median q3 max\n")
        for s in summaries:
            fh.write(f"{s.precision} {s.min:.12g} {s.q1:.12g} {s.median:.12g} {s.q3:.12g} {s.max:.12g}\n")


def write_outliers(path, outliers) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("case_id", "precision_bits", "eps_db", "first_divergent_site"))
        for o in outliers:
            w.writerow([o.case_id, o.precision, f"{o.eps:.12g}", o.site])


def write_traces(path, records) -> None:
    """JSON lines: one object per record that kept its trace."""
    with open(path, "w") as fh:
        for r in records:
            if r.trace is not None:
                fh.write(json.dumps({"case_id": r.case_id, "precision_bits": r.precision,
                                     "events": [[s, t] for s, t in r.trace]}, separators=(",", ":")))
                fh.write("\n")


def attach_traces(records, path) -> None:
    """Load a traces file written by :func:`write_traces` into ``records``."""
    index = {r.key(): r for r in records}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                key = (int(obj["case_id"]), int(obj["precision_bits"]))
                events = tuple((str(s), bool(t)) for s, t in obj["events"])
            except (ValueError, KeyError, TypeError) as exc:
                raise RecordFormatError(lineno, f"bad trace line: {exc}") from None
            if key in index:
                index[key].trace = events


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
