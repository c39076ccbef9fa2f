import csv
import io
import json
import math
import xml.etree.ElementTree as ET

import pytest

from kleinstep.cli import SWEEP_HEADER, dumps, main, parse_complex, solution_record
from kleinstep.core import PhysParams


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_klein(capsys):
    code, out, _ = run(capsys, "solve", "--E", "2")
    assert code == 0
    rec = json.loads(out)
    assert rec["zone"] == "Klein"
    assert rec["probabilities"]["R2"] == pytest.approx(0.25, abs=1e-12)
    assert parse_complex(rec["amplitudes"]["A"]) == pytest.approx(-0.5, abs=1e-12)


def test_solve_threshold_rejected(capsys):
    code, _, err = run(capsys, "solve", "--E", "3")
    assert code == 1
    assert "BranchPoint" in err


def test_solve_sub_threshold_rejected(capsys):
    assert run(capsys, "solve", "--E", "0.5")[0] == 1


def test_solve_over_barrier_conserves_flux(capsys):
    code, out, _ = run(capsys, "solve", "--E", "6")
    rec = json.loads(out)
    assert code == 0 and rec["zone"] == "OverBarrier"
    p = rec["probabilities"]
    assert p["R2"] + p["T2"] == pytest.approx(1.0, abs=1e-12)


def test_bad_params_rejected(capsys):
    assert run(capsys, "solve", "--E", "2", "--V", "-1")[0] == 1


def test_argparse_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 1


def _sweep(capsys, *extra):
    code, out, _ = run(capsys, "sweep", "--emin", "1.000001", "--emax", "2.999999", "--n", "201", *extra)
    assert code == 0
    return list(csv.reader(io.StringIO(out)))


def test_sweep_klein_profile(capsys):
    rows = _sweep(capsys)
    assert rows[0] == SWEEP_HEADER
    data = [[float(c) if i != 1 else c for i, c in enumerate(r)] for r in rows[1:]]
    R2 = [r[2] for r in data]
    j = min(range(len(R2)), key=R2.__getitem__)
    assert data[j][0] == pytest.approx(2.0)
    assert R2[j] == pytest.approx(0.25, abs=1e-12)
    assert R2[0] > 0.99 and R2[-1] > 0.99
    for r in data:
        assert r[6] < 1e-12
        assert r[7] == pytest.approx(r[8], abs=1e-12)


def test_sweep_csv_is_deterministic(capsys):
    a = run(capsys, "sweep", "--emin", "1.5", "--emax", "7", "--n", "50")[1]
    b = run(capsys, "sweep", "--emin", "1.5", "--emax", "7", "--n", "50")[1]
    assert a == b
    assert "\r" not in a


def test_sweep_nan_outside_klein_zone(capsys):
    out = run(capsys, "sweep", "--emin", "3.5", "--emax", "6", "--n", "3")[1]
    rows = list(csv.DictReader(io.StringIO(out)))
    assert all(math.isnan(float(r["Rv2"])) for r in rows)


def test_sweep_degenerate_range(capsys):
    code, out, _ = run(capsys, "sweep", "--emin", "3", "--emax", "3", "--n", "2", "--V", "2")
    assert code == 0
    assert out.strip().splitlines() == [",".join(SWEEP_HEADER)]


def test_sweep_rejects_bad_range(capsys):
    assert run(capsys, "sweep", "--emin", "0.5", "--emax", "2")[0] == 1
    assert run(capsys, "sweep", "--emin", "2", "--emax", "1.5")[0] == 1


def test_json_round_trip_is_exact():
    params = PhysParams(1.0, 4.0)
    for E in (1.3, 2.0, 2.7172, 3.5, 6.25):
        rec = solution_record(params, E)
        back = json.loads(dumps(rec))
        for key, val in rec["amplitudes"].items():
            assert parse_complex(back["amplitudes"][key]) == val
        for key, val in rec["probabilities"].items():
            assert back["probabilities"][key] == val
        assert dumps(back) == dumps(json.loads(dumps(rec)))


def test_dumps_non_finite_is_null():
    assert json.loads(dumps({"x": math.nan, "y": math.inf})) == {"x": None, "y": None}


def test_out_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("KLEIN_OUT_DIR", str(tmp_path))
    assert run(capsys, "solve", "--E", "2", "--out", "sub/res.json")[0] == 0
    assert json.loads((tmp_path / "sub" / "res.json").read_text())["E"] == 2.0


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(capsys, "solve", "--E", "2", "--out", str(blocker / "res.json"))[0] == 3


def test_svg_output_is_xml(tmp_path, capsys):
    plot = tmp_path / "r.svg"
    code, out, _ = run(capsys, "sweep", "--emin", "1.1", "--emax", "8", "--n", "60", "--format", "svg",
                       "--plot", str(plot))
    assert code == 0
    assert ET.fromstring(out).tag.endswith("svg")
    assert ET.parse(plot).getroot().tag.endswith("svg")


def test_sweep_json(capsys):
    out = run(capsys, "sweep", "--emin", "2", "--emax", "6", "--n", "3", "--format", "json")[1]
    rows = json.loads(out)
    assert [r["zone"] for r in rows] == ["Klein", "Evanescent", "OverBarrier"]


def test_zones(capsys):
    code, out, _ = run(capsys, "zones", "--E", "0.5,2,3,3.5,6")
    info = json.loads(out)
    assert code == 0 and info["klein_zone_exists"]
    zones = [e["zone"] for e in info["energies"]]
    assert zones[0] == "SubThreshold" and zones[1] == "Klein"
    assert zones[2].startswith("BranchPoint")
    assert zones[3:] == ["Evanescent", "OverBarrier"]


def test_verify_default_passes(capsys):
    code, out, _ = run(capsys, "verify", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert rep["max_gap"] < 1e-4
    assert {r["zone"] for r in rep["rows"]} == {"Klein", "Evanescent", "OverBarrier"}


def test_verify_without_klein_zone(capsys, caplog):
    code, out, _ = run(capsys, "verify", "--V", "1.5", "--format", "json")
    rep = json.loads(out)
    assert code == 0
    assert "Klein" not in {r["zone"] for r in rep["rows"]}
    assert "empty" in caplog.text


def test_verify_loose_settings_widen_gap(capsys):
    tight = json.loads(run(capsys, "verify", "--E", "2", "--format", "json")[1])["max_gap"]
    code, out, _ = run(capsys, "verify", "--E", "2", "--a-min", "0.05", "--threshold", "1e-9",
                       "--format", "json")
    loose = json.loads(out)["max_gap"]
    assert loose > tight
    assert code == 2


def test_verify_text_report(capsys):
    code, out, _ = run(capsys, "verify", "--E", "2,6")
    assert code == 0
    assert out.strip().splitlines()[-1].endswith("PASS")


@pytest.mark.parametrize("E0,key", [(2.0, "klein"), (3.5, "evan"), (6.0, "over")])
def test_packet_summary(tmp_path, capsys, E0, key):
    out_dir = tmp_path / key
    code, out, _ = run(capsys, "packet", "--E0", str(E0), "--out", str(out_dir), "--snapshots", "9",
                       "--format", "json", "--dx", "0.1")
    assert code == 0
    summary = json.loads((out_dir / "summary.json").read_text())
    assert json.loads(out) == summary
    assert len(list(out_dir.glob("snapshot_*.csv"))) == 9
    assert (out_dir / "run.meta.json").exists()
    if key == "klein":
        assert summary["pen_prob"] < 1e-3 and summary["refl_norm"] > 1 - 1e-3
    elif key == "evan":
        assert summary["max_pen_prob"] > 1e-2 and summary["refl_norm"] > 1 - 1e-3
    else:
        assert summary["trans_norm"] == pytest.approx(summary["spectral_T2"], abs=1e-3)


def test_packet_snapshot_columns(tmp_path, capsys):
    run(capsys, "packet", "--E0", "2", "--out", str(tmp_path), "--t", "0", "--dx", "0.2")
    with open(tmp_path / "snapshot_000.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["x", "re_upper", "im_upper", "re_lower", "im_lower", "density"]


def test_packet_straddle_warns(tmp_path, capsys, caplog):
    code, _, _ = run(capsys, "packet", "--E0", "3", "--sigma", "0.2", "--out", str(tmp_path), "--t", "0",
                       "--dx", "0.2")
    assert code == 0
    assert "zone boundary" in caplog.text


def test_packet_requires_energy(capsys):
    assert run(capsys, "packet")[0] == 1
