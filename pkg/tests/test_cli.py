import csv
import json
import math

import pytest

from itmstab.cli import main
from itmstab.harness import STUDY_FREQUENCIES, PredictionRecord, write_records
from itmstab.terrain import GeoPoint, synth_grid, write_esri_ascii

TX = "40.00,-105.25,10"
RX = "40.03,-105.22,10"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# --- predict -------------------------------------------------------------------------------


def test_predict_flat(capsys):
    code, out, _ = run(["predict", "--flat", "1600", "--tx", TX, "--rx", RX, "--freq", "900"], capsys)
    assert code == 0
    res = json.loads(out)
    assert math.isfinite(res["total_loss_db"]) and res["kwx"] in range(5)
    assert res["config"]["params"]["climate"] == 5
    assert res["config"]["params"]["surface_refractivity"] == 301.0
    assert "gmpy2" in res["config"] and "trace" not in res


def test_predict_precision_and_trace(capsys):
    code, out, _ = run(["predict", "--flat", "1600", "--tx", TX, "--rx", RX, "--freq", "900",
                        "--precision", "24", "--trace"], capsys)
    res = json.loads(out)
    assert code == 0 and res["precision_bits"] == 24
    assert res["trace"] and all(len(e) == 2 for e in res["trace"])


def test_predict_low_frequency_warns(capsys):
    code, out, _ = run(["predict", "--flat", "1600", "--tx", TX, "--rx", RX, "--freq", "0.148"], capsys)
    res = json.loads(out)
    assert code == 0 and res["kwx"] >= 1 and math.isfinite(res["total_loss_db"])


def test_predict_dem(tmp_path, capsys):
    g = synth_grid("random_hills", {"origin": (40.04, -105.26), "rows": 301, "cols": 301, "cell_size": 1 / 6000}, 1)
    write_esri_ascii(g, tmp_path / "dem.asc")
    code, out, _ = run(["predict", "--dem", str(tmp_path / "dem.asc"), "--tx", TX, "--rx", RX, "--freq", "2400"],
                       capsys)
    assert code == 0 and math.isfinite(json.loads(out)["total_loss_db"])


@pytest.mark.parametrize("argv, flag", [
    (["--climate", "9"], "--climate"),
    (["--freq", "-5"], "--freq"),
    (["--sgm", "0"], "--sgm"),
    (["--bogus"], "--bogus"),
    (["--precision", "one"], "--precision"),
])
def test_predict_input_errors(argv, flag, capsys):
    base = ["predict", "--flat", "1600", "--tx", TX, "--rx", RX, "--freq", "900"]
    code, _, err = run(base + argv, capsys)
    assert code == 1 and flag in err


def test_predict_needs_one_terrain_source(capsys):
    code, _, _ = run(["predict", "--tx", TX, "--rx", RX, "--freq", "900"], capsys)
    assert code == 1
    code, _, _ = run(["predict", "--flat", "1", "--dem", "x", "--tx", TX, "--rx", RX, "--freq", "900"], capsys)
    assert code == 1


def test_predict_bad_dem(tmp_path, capsys):
    (tmp_path / "bad.asc").write_text("ncols 2\nnrows 2\n")
    code, _, err = run(["predict", "--dem", str(tmp_path / "bad.asc"), "--tx", TX, "--rx", RX, "--freq", "900"], capsys)
    assert code == 1 and "--dem" in err


def test_predict_outside_dem(tmp_path, capsys):
    g = synth_grid("flat", {"origin": (40.01, -105.26), "rows": 20, "cols": 20, "cell_size": 1 / 1200})
    write_esri_ascii(g, tmp_path / "small.asc")
    code, _, err = run(["predict", "--dem", str(tmp_path / "small.asc"), "--tx", TX, "--rx", RX, "--freq", "900"],
                       capsys)
    assert code == 2 and "coverage" in err


# --- profile --------------------------------------------------------------------------------


def test_profile_to_file(tmp_path, capsys):
    out = tmp_path / "p.json"
    code, _, _ = run(["profile", "--flat", "100", "--tx", TX, "--rx", RX, "--spacing", "100", "--out", str(out)],
                     capsys)
    assert code == 0
    prof = json.loads(out.read_text())
    assert set(prof["elevations_m"]) == {100.0}
    assert prof["spacing_m"] <= 100 and prof["config"]["spacing_requested"] == 100


# --- sweep and report -------------------------------------------------------------------------


def write_config(path, **kw):
    cfg = {"n_links": 2, "frequencies": [900], "climates": [5], "grounds": ["average"], "precisions": [11, 53]}
    cfg.update(kw)
    path.write_text(json.dumps(cfg))
    return path


def strip_wall(path):
    rows = list(csv.reader(open(path)))
    return [r[:-1] for r in rows]


@pytest.fixture(scope="module")
def sweep_out(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep")
    cfg = write_config(d / "cfg.json")
    outs = []
    for workers in (1, 2):
        out = d / f"rec{workers}.csv"
        assert main(["sweep", "--config", str(cfg), "--synth", "random_hills", "--synth-seed", "1",
                     "--out", str(out), "--workers", str(workers), "--traces", str(d / f"tr{workers}.jsonl")]) == 0
        outs.append(out)
    return d, outs


def test_sweep_rows_and_metadata(sweep_out):
    d, (out, _) = sweep_out
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 2 * (2 + 1)
    assert [(r["case_id"], r["precision_bits"]) for r in rows] == [
        ("0", "0"), ("0", "11"), ("0", "53"), ("1", "0"), ("1", "11"), ("1", "53")]
    meta = json.loads(open(str(out) + ".meta.json").read())
    assert meta["config"]["seed"] == 1 and meta["terrain"] == {"synth": "random_hills", "synth_seed": 1}
    assert "bbox" in meta["defaults_applied"] and meta["config"]["bbox"] == [39.95324, 40.07186, -105.31843, -105.18602]
    assert meta["n_records"] == 6 and meta["artifact_version"]
    # half precision may leave the profile in the least-squares fit; that is recorded, not fatal
    assert meta["n_failures"] == len(meta["failures"])
    assert all(f["precision_bits"] == 11 and "ComputationError" in f["error"] for f in meta["failures"])
    failed = [r for r in rows if r["loss_db"] == "nan"]
    assert len(failed) == meta["n_failures"] and all(r["kwx"] == "-1" and r["trace_hash"] == "" for r in failed)


def test_sweep_defaults_echoed(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_links": 1, "climates": [5], "grounds": ["average"], "precisions": [24]}))
    out = tmp_path / "r.csv"
    code, _, _ = run(["sweep", "--config", str(cfg), "--synth", "flat", "--out", str(out)], capsys)
    assert code == 0
    meta = json.loads(open(str(out) + ".meta.json").read())
    assert tuple(meta["config"]["frequencies"]) == STUDY_FREQUENCIES
    assert "frequencies" in meta["defaults_applied"]


def test_sweep_worker_count_invariant(sweep_out):
    _, (a, b) = sweep_out
    assert strip_wall(a) == strip_wall(b)


def test_sweep_config_errors(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", climates=[5, 9])
    code, _, err = run(["sweep", "--config", str(cfg), "--synth", "flat", "--out", str(tmp_path / "r.csv")], capsys)
    assert code == 1 and "climates[1]" in err
    (tmp_path / "j.json").write_text("{nope")
    code, _, err = run(["sweep", "--config", str(tmp_path / "j.json"), "--synth", "flat",
                        "--out", str(tmp_path / "r.csv")], capsys)
    assert code == 1 and "line 1" in err


def test_sweep_coverage_failure(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", bbox=[10.0, 10.1, 10.0, 10.1])
    code, _, err = run(["sweep", "--config", str(cfg), "--synth", "flat", "--out", str(tmp_path / "r.csv")], capsys)
    assert code == 2 and "coverage" in err


def test_report_pipeline(sweep_out, capsys):
    d, (out, _) = sweep_out
    summary, box, outl = d / "s.csv", d / "box.dat", d / "o.csv"
    code, _, _ = run(["report", "--in", str(out), "--out", str(summary), "--boxplot", str(box),
                      "--outliers", str(outl), "--traces", str(d / "tr1.jsonl"), "--threshold", "0"], capsys)
    assert code == 0
    srows = list(csv.DictReader(open(summary)))
    assert [r["precision_bits"] for r in srows] == ["0", "11", "53"]
    assert float(srows[0]["max_abs_eps"]) == 0
    lines = [ln.split() for ln in box.read_text().splitlines() if not ln.startswith("#")]
    assert [ln[0] for ln in lines] == ["0", "11", "53"]
    assert lines[0][1:] == ["0"] * 5
    orows = list(csv.DictReader(open(outl)))
    assert all(r["first_divergent_site"] for r in orows)
    meta = json.loads(open(str(summary) + ".meta.json").read())
    assert meta["sweep"]["config"]["seed"] == 1 and meta["threshold_db"] == 0


def _rec(cid, p, loss):
    g = GeoPoint(40.0, -105.0, 5.0)
    return PredictionRecord(cid, 0, 900.0, 5, (15.0, 0.005), g, g, p, loss, 0, 7, 0.001)


def test_report_all_equal(tmp_path, capsys):
    path = tmp_path / "r.csv"
    write_records(path, [_rec(c, p, 120.0) for c in range(3) for p in (0, 53)])
    code, _, _ = run(["report", "--in", str(path), "--out", str(tmp_path / "s.csv")], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert all(float(r[k]) == 0 for r in rows for k in ("min", "q1", "median", "q3", "max"))


def test_report_missing_baseline(tmp_path, capsys):
    path = tmp_path / "r.csv"
    write_records(path, [_rec(0, 0, 1.0), _rec(0, 53, 1.0), _rec(3, 53, 1.0), _rec(5, 24, 1.0)])
    code, _, err = run(["report", "--in", str(path), "--out", str(tmp_path / "s.csv")], capsys)
    assert code == 1 and "3, 5" in err


def test_report_malformed_line(tmp_path, capsys):
    path = tmp_path / "r.csv"
    write_records(path, [_rec(0, 0, 1.0), _rec(0, 53, 1.0)])
    text = path.read_text().splitlines()
    text.append("1,2,3")
    path.write_text("\n".join(text) + "\n")
    code, _, err = run(["report", "--in", str(path), "--out", str(tmp_path / "s.csv")], capsys)
    assert code == 1 and "line 4" in err


def test_missing_subcommand(capsys):
    assert run([], capsys)[0] == 1
