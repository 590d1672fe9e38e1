import csv
import json
import math

import pytest

from compcap.cli import main
from compcap.config import load_config


def run(tmp_path, text, *args):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    return main([args[0], "--config", str(cfg), *args[1:]])


def test_solve_flat(tmp_path):
    out = tmp_path / "o"
    assert run(tmp_path, "grid.resolution = 32\nbounds.c_R = 5\n", "solve", "--out", str(out)) == 0
    doc = json.loads((out / "energy.json").read_text())
    assert doc["energy"]["total"] == pytest.approx(1 - math.exp(-1), abs=1e-3)
    assert doc["monitor"]["monotone"]
    for name in ("v_star.csv", "u_star.csv", "trace.csv", "config.txt", "v_star.png", "trace.png"):
        assert (out / name).exists()
    header = next(csv.reader(open(out / "trace.csv")))
    assert header == ["iteration", "E_S", "W", "E_Sigma", "total", "grad_norm"]
    # echoed config re-parses to the effective one
    assert load_config(out / "config.txt").output_dir == str(out)


def test_solve_rejects_bad_beta(tmp_path, capsys):
    assert run(tmp_path, "beta.value = 1.5\n", "solve", "--out", str(tmp_path / "o")) == 2
    assert "exceeds" in capsys.readouterr().err


def test_solve_nonconvergence_exit(tmp_path):
    text = "grid.resolution = 16\nbeta.value = 0.4\nsolver.max_iterations = 2\noutput.plots = false\n"
    assert run(tmp_path, text, "solve", "--out", str(tmp_path / "o")) == 3


def test_missing_config(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_verify(tmp_path):
    out = tmp_path / "o"
    run(tmp_path, "grid.resolution = 16\noutput.plots = false\n", "solve", "--out", str(out))
    assert run(tmp_path, "grid.resolution = 16\nbounds.c_R = 5\n", "verify", "--field",
               str(out / "v_star.csv"), "--out", str(tmp_path / "v")) == 0
    doc = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert doc["passed"] and all(doc["checks"].values())

    rows = list(csv.reader(open(out / "v_star.csv")))
    low = tmp_path / "low.csv"
    with open(low, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(rows[0])
        w.writerows(r[:4] + ["0.1"] for r in rows[1:])
    assert run(tmp_path, "grid.resolution = 16\nbeta.value = -0.2\n", "verify", "--field", str(low),
               "--out", str(tmp_path / "v2")) == 4
    doc = json.loads((tmp_path / "v2" / "verify.json").read_text())
    assert doc["checks"]["lower_bound_nonpositive_beta"] is False

    bad = tmp_path / "bad.csv"
    bad.write_text("row,col,x,y\n0,0,0,0\n")
    assert run(tmp_path, "grid.resolution = 16\n", "verify", "--field", str(bad), "--out", str(tmp_path / "v3")) == 2


def test_radial(tmp_path):
    out = tmp_path / "r"
    assert run(tmp_path, "domain.shape = disk\nbeta.value = 0\n", "radial", "--out", str(out)) == 0
    rows = list(csv.DictReader(open(out / "profile.csv")))
    assert all(float(r["u"]) == 1.0 for r in rows)
    assert run(tmp_path, "beta.value = 0.2\n", "radial", "--out", str(out)) == 2


def test_continuation_flat(tmp_path):
    out = tmp_path / "c"
    assert run(tmp_path, "grid.resolution = 32\ncontinuation.value = 1\n", "continuation", "--out", str(out)) == 0
    rows = list(csv.DictReader(open(out / "continuation.csv")))
    assert float(rows[-1]["sigma"]) == 1.0
    assert all(int(r["newton_iterations"]) == 0 for r in rows)
    doc = json.loads((out / "continuation.json").read_text())
    assert doc["height_bound"]["max_u"] == 1.0 and doc["height_bound"]["min_u"] == 1.0


def test_continuation_bad_ball(tmp_path):
    text = "grid.resolution = 32\ncontinuation.center = 0.1 0.1\n"
    assert run(tmp_path, text, "continuation", "--out", str(tmp_path / "c")) == 2


def test_lemmas(tmp_path, capsys):
    out = tmp_path / "l"
    text = "lemmas.C = 1\nlemmas.gamma = 2\nlemmas.k0 = 1.5\nlemmas.B0 = 0\n"
    assert run(tmp_path, text, "lemmas", "--out", str(out)) == 0
    assert "K = 1.5 " in capsys.readouterr().out
    doc = json.loads((out / "lemmas.json").read_text())
    assert doc["alpha_2"]["K"] == 1.5
    text = "lemmas.C = 1\nlemmas.gamma = 2\nlemmas.k0 = 1\nlemmas.B0 = 1\n"
    assert run(tmp_path, text, "lemmas", "--out", str(out)) == 0
    assert "not applicable" in capsys.readouterr().out
    assert run(tmp_path, "grid.resolution = 8\n", "lemmas", "--out", str(out)) == 2
