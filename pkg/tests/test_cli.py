import csv
import io
import json
import subprocess
import sys

import pytest

from latticecount.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_count(capsys):
    code, out, _ = run(capsys, "count", "--R", "3", "--check")
    assert code == 0
    (row,) = rows(out)
    assert row["count"] == "20" and row["orbit_count"] == "10"


def test_count_hyperbolic_and_congruence(capsys):
    code, out, _ = run(capsys, "count", "--domain", "hyperbolic_ball", "--radius", "5", "--modulus", "2")
    assert code == 0
    assert float(rows(out)[0]["covolume"]) == pytest.approx(3.141592653589793)


def test_count_sl3(capsys):
    code, out, _ = run(capsys, "count", "--group", "SL3", "--R", "3")
    assert code == 0 and rows(out)[0]["count"] == "24"


def test_sweep_csv_columns_and_precision(capsys):
    code, out, _ = run(capsys, "sweep", "--grid", "10,20")
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert header[:6] == ["param", "count", "singular_count", "volume", "covolume", "relative_error"]
    r = rows(out)
    assert len(r) == 2 and len(set(x["config_hash"] for x in r)) == 1
    assert r[0]["covolume"] == format(3.141592653589793 / 6, ".17g")


def test_sweep_json_and_out(tmp_path, capsys):
    path = tmp_path / "s.json"
    code, out, _ = run(capsys, "sweep", "--grid", "10:30:10", "--format", "json", "--out", str(path), "--seed", "5")
    assert code == 0 and out == ""
    blob = json.loads(path.read_text())
    assert blob["meta"]["seed"] == 5 and len(blob["rows"]) == 3


def test_sweep_empty_grid(capsys):
    code, out, _ = run(capsys, "sweep")
    assert code == 0
    assert out.strip() == "param,count,singular_count,volume,covolume,relative_error,normalization,config_hash"


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# sweep\ngrid = 10:20:10\nformat = csv\n")
    code, out, _ = run(capsys, "sweep", "--config", str(cfg))
    assert code == 0 and len(rows(out)) == 2
    cfg.write_text("grid = 10\nmystery = 3\n")
    code, _, err = run(capsys, "sweep", "--config", str(cfg))
    assert code == 1 and "unknown key" in err


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "count", "--R", "not-a-number")[0] == 1
    assert run(capsys, "volume")[0] == 1
    assert run(capsys, "sweep", "--grid", "5,4")[0] == 1


def test_numerical_failure_exit_code(capsys):
    assert run(capsys, "adelic-hc", "--p-exp", "2", "--prime-bound", "100")[0] == 2
    assert run(capsys, "count", "--R", str(2**61))[0] == 2


def test_check_failure_exit_code(capsys):
    # p_exp = 4.5 leaves a large tail increment at this prime bound
    code, out, err = run(capsys, "adelic-hc", "--p-exp", "4.5", "--prime-bound", "1000", "--check")
    assert code == 3 and "check failed" in err


def test_volume(capsys):
    code, out, _ = run(capsys, "volume", "--domain", "norm_ball", "--radius", "2")
    assert code == 0 and float(rows(out)[0]["volume"]) == pytest.approx(6.283185307179586)


def test_exponent_predict(capsys):
    code, out, _ = run(capsys, "exponent", "--predict", "slm", "--m", "4")
    assert code == 0 and rows(out)[0]["exact"] == "59/60"
    code, out, _ = run(capsys, "exponent", "--predict", "thm41", "--p", "6", "--d", "9", "--sharp-spectrum")
    assert rows(out)[0]["exact"] == "59/60"
    code, out, _ = run(capsys, "exponent", "--predict", "affine", "--p", "2", "--dim", "3")
    assert float(rows(out)[0]["value"]) == pytest.approx(0.05)


def test_exponent_fit_from_csv(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    assert run(capsys, "sweep", "--grid", "200:650:50", "--out", str(path))[0] == 0
    code, out, _ = run(capsys, "exponent", "--input", str(path), "--target", "1/6", "--check")
    assert code == 0
    assert rows(out)[0]["verdict"] == "true"


def test_sectors_and_bisectors(capsys):
    code, out, _ = run(capsys, "sectors", "--t", "6", "--bins", "8")
    assert code == 0 and len(rows(out)) == 8
    code, out, _ = run(capsys, "bisectors", "--t", "6", "--bins", "4", "8")
    assert code == 0 and len(rows(out)) == 32
    assert run(capsys, "bisectors", "--t", "6", "--bins", "4")[0] == 1


def test_congruence(capsys):
    code, out, _ = run(capsys, "congruence", "--N", "2", "3", "--R", "20000")
    assert code == 0
    assert [r["index"] for r in rows(out)] == ["6", "24"]


def test_sandwich(capsys):
    code, out, _ = run(capsys, "sandwich", "--R", "3", "--samples", "20000", "--check")
    assert code == 0 and all(r["holds"] == "true" for r in rows(out))


def test_probe(capsys):
    code, out, _ = run(capsys, "probe-roundedness", "--radius", "50", "--check")
    assert code == 0 and len(rows(out)) == 4


def test_worker_count_does_not_change_output(capsys):
    outs = [run(capsys, "sweep", "--grid", "100,200", "--workers", str(w))[1] for w in (1, 4, 16)]
    body = [[line.rsplit(",", 1)[0] for line in o.splitlines()] for o in outs]
    assert body[0] == body[1] == body[2]


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "latticecount.cli", "count", "--R", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and "4" in proc.stdout.splitlines()[1]
