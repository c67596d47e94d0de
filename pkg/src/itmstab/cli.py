"""Command-line front end.

Subcommands: ``predict`` (one path), ``profile`` (terrain profile only),
``sweep`` (multi-precision experiment) and ``report`` (error statistics and
plot data).  Exit status is 0 on success, 1 for invalid input (bad flags,
config, files) and 2 when a run fails (terrain coverage, non-finite model
output, unexpected errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import gmpy2

from . import __version__
from . import harness
from .itm import PropagationParams, point_to_point
from .itm.model import ComputationError, InvalidInputError, POLARIZATIONS, VARIABILITY_MODES
from .mpnum import to_native
from .terrain import (
    ElevationGrid,
    GeoPoint,
    TerrainBoundsError,
    TerrainError,
    extract_profile,
    load_grid,
    synth_grid,
)

log = logging.getLogger("itmstab")

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


class InputError(Exception):
    pass


class RunError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; here those are input errors
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: {message}")


def _point(text: str) -> GeoPoint:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected lat,lon,height, got {text!r}")
    try:
        lat, lon, h = (float(p) for p in parts)
        return GeoPoint(lat, lon, h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r}: {exc}") from None


def _precision(text: str) -> int:
    try:
        p = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"precision must be an integer, got {text!r}") from None
    if p != 0 and p < 2:
        raise argparse.ArgumentTypeError("precision must be 0 (native double) or >= 2 bits")
    return p


def _environment() -> dict:
    return {
        "artifact_version": __version__,
        "python": sys.version.split()[0],
        "gmpy2": gmpy2.version(),
        "mpfr": gmpy2.mpfr_version(),
    }


def _flat_grid(height: float, a: GeoPoint, b: GeoPoint) -> ElevationGrid:
    lat0, lat1 = sorted((a.lat, b.lat))
    lon0, lon1 = sorted((a.lon, b.lon))
    extent = max(lat1 - lat0, lon1 - lon0)
    cell = max(1.0 / 3600.0, extent / 500.0)
    margin = 4 * cell + 0.01 * extent
    rows = int(math.ceil((lat1 - lat0 + 2 * margin) / cell)) + 1
    cols = int(math.ceil((lon1 - lon0 + 2 * margin) / cell)) + 1
    return synth_grid("flat", {"h": height, "origin": (lat1 + margin, lon0 - margin),
                               "rows": rows, "cols": cols, "cell_size": cell})


def _terrain(args, a: GeoPoint, b: GeoPoint):
    if args.flat is not None:
        return _flat_grid(args.flat, a, b), {"flat": args.flat}
    try:
        return load_grid(args.dem), {"dem": os.path.abspath(args.dem)}
    except TerrainError as exc:
        raise InputError(f"--dem: {exc}") from None


def _profile(grid, a, b, spacing):
    try:
        return extract_profile(grid, a, b, spacing)
    except TerrainBoundsError as exc:
        raise RunError(f"terrain coverage: {exc}") from None
    except TerrainError as exc:
        raise RunError(f"terrain: {exc}") from None
    except ValueError as exc:
        raise InputError(f"--tx/--rx: {exc}") from None


def _add_path_flags(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dem", metavar="PATH", help="ESRI ASCII grid or SRTM-style tile (N40W106.hgt)")
    src.add_argument("--flat", metavar="METERS", type=float, help="flat terrain at this elevation")
    p.add_argument("--tx", required=True, type=_point, metavar="LAT,LON,H", help="transmitter, height above ground in m")
    p.add_argument("--rx", required=True, type=_point, metavar="LAT,LON,H", help="receiver")
    p.add_argument("--spacing", type=float, metavar="M", help="profile step in metres (default: grid resolution)")


# ---------------------------------------------------------------------------
# predict


def cmd_predict(args) -> int:
    grid, source = _terrain(args, args.tx, args.rx)
    profile = _profile(grid, args.tx, args.rx, args.spacing)
    try:
        params = PropagationParams(
            frequency=args.freq, tx_height=args.tx.height_agl, rx_height=args.rx.height_agl,
            permittivity=args.eps, conductivity=args.sgm, climate=args.climate,
            surface_refractivity=args.refractivity, polarization=args.polarization,
            reliability=args.reliability, confidence=args.confidence, variability_mode=args.variability_mode,
        )
    except InvalidInputError as exc:
        raise InputError(_flag_for(str(exc))) from None
    try:
        res = point_to_point(profile, params, args.precision, trace=True)
    except ComputationError as exc:
        raise RunError(str(exc)) from None
    out = {
        "total_loss_db": to_native(res.total_loss),
        "free_space_loss_db": to_native(res.free_space_loss),
        "reference_attenuation_db": to_native(res.reference_attenuation),
        "variability_db": to_native(res.variability),
        "mode": res.mode,
        "kwx": res.kwx,
        "precision_bits": res.precision,
        "distance_m": to_native(res.geometry.distance),
        "profile_points": len(profile.elevations),
        "trace_hash": f"{res.trace.digest():016x}",
        "config": {
            **source,
            "tx": [args.tx.lat, args.tx.lon, args.tx.height_agl],
            "rx": [args.rx.lat, args.rx.lon, args.rx.height_agl],
            "spacing_m": profile.spacing,
            "params": vars(params) | {"mdvar": params.mdvar},
            **_environment(),
        },
    }
    if args.trace:
        out["trace"] = [[s, t] for s, t in res.trace.events]
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


_PARAM_FLAGS = {
    "frequency": "--freq",
    "climate": "--climate",
    "permittivity": "--eps",
    "conductivity": "--sgm",
    "surface_refractivity": "--refractivity",
    "polarization": "--polarization",
    "variability_mode": "--variability-mode",
    "reliability": "--reliability",
    "confidence": "--confidence",
    "tx_height": "--tx",
    "rx_height": "--rx",
}


def _flag_for(message: str) -> str:
    for field, flag in _PARAM_FLAGS.items():
        if message.startswith(field):
            return f"{flag}: {message}"
    return message


# ---------------------------------------------------------------------------
# profile


def cmd_profile(args) -> int:
    grid, source = _terrain(args, args.tx, args.rx)
    profile = _profile(grid, args.tx, args.rx, args.spacing)
    out = {
        "spacing_m": profile.spacing,
        "distance_m": profile.distance,
        "elevations_m": list(profile.elevations),
        "config": {**source, "tx": [args.tx.lat, args.tx.lon, args.tx.height_agl],
                   "rx": [args.rx.lat, args.rx.lon, args.rx.height_agl], "spacing_requested": args.spacing,
                   **_environment()},
    }
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _load_config(path) -> tuple:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"--config: cannot read {path} ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"--config: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        cfg = harness.SweepConfig.from_dict(data)
    except harness.ConfigError as exc:
        raise InputError(f"config error at {exc}") from None
    defaults = sorted(set(cfg.to_dict()) - set(data))
    return cfg, defaults


def meta_path(out_path: str) -> str:
    return out_path + ".meta.json"


def cmd_sweep(args) -> int:
    cfg, defaulted = _load_config(args.config)
    if args.dem is not None:
        try:
            grid = load_grid(args.dem)
        except TerrainError as exc:
            raise InputError(f"--dem: {exc}") from None
        source = {"dem": os.path.abspath(args.dem)}
    else:
        try:
            grid = synth_grid(args.synth, None, args.synth_seed)
        except ValueError as exc:
            raise InputError(f"--synth: {exc}") from None
        source = {"synth": args.synth, "synth_seed": args.synth_seed}
    try:
        links = harness.gen_links(cfg.seed, cfg.n_links, cfg.bbox, cfg.height_range, cfg.min_link_distance)
    except harness.ConfigError as exc:
        raise InputError(f"config error at {exc}") from None
    uncovered = harness.check_coverage(grid, links)
    if uncovered:
        raise RunError(f"terrain coverage: grid bounds {grid.bounds} miss links {uncovered[:20]}")
    cases = harness.build_cases(links, cfg)
    workers = args.workers if args.workers else harness.default_workers()
    log.info("sweep: %d links, %d cases, %d predictions, %d workers",
             len(links), len(cases), cfg.n_predictions, workers)
    records = harness.run_sweep(cases, cfg.precisions, grid, cfg, workers=workers, keep_traces=bool(args.traces))
    harness.write_records(args.out, records)
    if args.traces:
        harness.write_traces(args.traces, records)
    failures = [r for r in records if r.failed]
    meta = {
        "command": "sweep",
        "config": cfg.to_dict(),
        "defaults_applied": defaulted,
        "terrain": source,
        "workers": workers,
        "n_links": len(links),
        "n_cases": len(cases),
        "n_records": len(records),
        "n_failures": len(failures),
        "failures": [{"case_id": r.case_id, "precision_bits": r.precision, "error": r.error} for r in failures[:100]],
        "records_file": os.path.abspath(args.out),
        "traces_file": os.path.abspath(args.traces) if args.traces else None,
        "record_fields": list(harness.RECORD_FIELDS),
        "timing": {str(p): v for p, v in harness.timing_report(records).items()},
        **_environment(),
    }
    with open(meta_path(args.out), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    log.info("wrote %s (%d records, %d failed)", args.out, len(records), len(failures))
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    try:
        records = harness.read_records(args.input)
    except OSError as exc:
        raise InputError(f"--in: cannot read {args.input} ({exc.strerror})") from None
    except harness.RecordFormatError as exc:
        raise InputError(f"--in {args.input}: {exc}") from None
    if args.traces:
        try:
            harness.attach_traces(records, args.traces)
        except OSError as exc:
            raise InputError(f"--traces: cannot read {args.traces} ({exc.strerror})") from None
        except harness.RecordFormatError as exc:
            raise InputError(f"--traces {args.traces}: {exc}") from None
    try:
        summaries = harness.error_stats(records, args.threshold)
        outliers = harness.find_outliers(records, args.threshold) if args.outliers else None
    except harness.AnalysisError as exc:
        raise InputError(f"--in {args.input}: {exc}") from None
    harness.write_summary(args.out, summaries)
    if args.outliers:
        harness.write_outliers(args.outliers, outliers)
    if args.boxplot:
        harness.write_boxplot(args.boxplot, summaries)
    sweep_meta = None
    if os.path.exists(meta_path(args.input)):
        with open(meta_path(args.input)) as fh:
            sweep_meta = json.load(fh)
    meta = {
        "command": "report",
        "input": os.path.abspath(args.input),
        "traces": os.path.abspath(args.traces) if args.traces else None,
        "threshold_db": args.threshold,
        "outputs": {k: os.path.abspath(v) for k, v in
                    (("summary", args.out), ("outliers", args.outliers), ("boxplot", args.boxplot)) if v},
        "sweep": sweep_meta,
        "timing": {str(p): v for p, v in harness.timing_report(records).items()},
        **_environment(),
    }
    with open(meta_path(args.out), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="itmstab", description="Precision-parameterized ITM and stability sweeps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", help="loss for a single path")
    _add_path_flags(p)
    p.add_argument("--freq", type=float, required=True, metavar="MHZ")
    p.add_argument("--climate", type=int, default=5, metavar="N", help="climate code 1-7 (default 5)")
    p.add_argument("--eps", type=float, default=15.0, metavar="X", help="relative permittivity (default 15)")
    p.add_argument("--sgm", type=float, default=0.005, metavar="Y", help="conductivity S/m (default 0.005)")
    p.add_argument("--precision", type=_precision, default=0, metavar="BITS", help="0 = native double (default)")
    p.add_argument("--refractivity", type=float, default=301.0, metavar="N")
    p.add_argument("--polarization", choices=sorted(POLARIZATIONS), default="vertical")
    p.add_argument("--reliability", type=float, default=0.5)
    p.add_argument("--confidence", type=float, default=0.5)
    p.add_argument("--variability-mode", choices=sorted(VARIABILITY_MODES), default="broadcast")
    p.add_argument("--trace", action="store_true", help="include the branch trace")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("profile", help="extract a terrain profile as JSON")
    _add_path_flags(p)
    p.add_argument("--out", metavar="PATH", help="write here instead of stdout")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("sweep", help="run a multi-precision sweep")
    p.add_argument("--config", required=True, metavar="PATH", help="JSON SweepConfig; omitted fields use defaults")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dem", metavar="PATH")
    src.add_argument("--synth", choices=("flat", "ramp", "knife_edge", "random_hills"),
                     help="use a synthetic grid covering the default study box")
    p.add_argument("--synth-seed", type=int, default=0, metavar="N")
    p.add_argument("--out", required=True, metavar="PATH", help="records CSV (metadata goes to PATH.meta.json)")
    p.add_argument("--workers", type=int, metavar="N", help="worker processes (default: CPU count, max 8)")
    p.add_argument("--traces", metavar="PATH", help="also write full branch traces (JSON lines)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="error summary, outliers and box-plot data from a records CSV")
    p.add_argument("--in", dest="input", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="PATH", help="summary CSV")
    p.add_argument("--outliers", metavar="PATH")
    p.add_argument("--boxplot", metavar="PATH")
    p.add_argument("--traces", metavar="PATH", help="traces file from sweep, to name divergent branch sites")
    p.add_argument("--threshold", type=float, default=3.0, metavar="DB", help="outlier threshold (default 3)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # anything else is a runtime failure, not a traceback
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
