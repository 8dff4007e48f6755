import csv
import json

import numpy as np
import pytest
import yaml

from tlnmemory.cli import main
from tlnmemory.data import load_model

SYN = ["--set", "data.source=synthetic", "--set", "data.d=40"]


def run(tmp, name, *argv):
    out = tmp / name
    return main([*argv, "--out", str(out)]), out


@pytest.fixture(scope="module")
def learned(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    code, out = run(tmp, "learn", "learn", *SYN, "--set", "data.patterns=3", "--seed", "4")
    assert code == 0
    return out


def test_learn_outputs(learned):
    doc = json.loads((learned / "results.json").read_text())
    assert doc["schema"] == "tlnmemory.results/1" and doc["command"] == "learn"
    assert [p["support"] for p in doc["patterns"]] == [[1, 2], [2, 3], [3, 4]]
    assert doc["identity_error"] < 1e-10
    assert all(p["similarity"] > 1 - 1e-10 for p in doc["patterns"])
    m = load_model(learned / "model.tlnm")
    assert len(m.registry) == 3 and m.d == 40
    eff = yaml.safe_load((learned / "config.effective.yaml").read_text())
    assert eff["data"]["source"] == "synthetic" and eff["seed"] == 4
    header = (learned / "learn_traj_p2-i1.csv").read_text().splitlines()[0]
    assert header.startswith("t,x1,") and header.endswith("G,gamma,q,T,w")


def test_learn_is_deterministic(tmp_path, learned):
    code, out = run(tmp_path, "again", "learn", *SYN, "--set", "data.patterns=3", "--seed", "4")
    assert code == 0
    assert (out / "results.json").read_bytes() == (learned / "results.json").read_bytes()
    assert (out / "model.tlnm").read_bytes() == (learned / "model.tlnm").read_bytes()


def test_learn_empty_sequence(tmp_path):
    code, out = run(tmp_path, "empty", "learn", *SYN, "--set", "data.patterns=0")
    assert code == 0
    assert json.loads((out / "results.json").read_text())["registered"] == 0


def test_learn_over_capacity(tmp_path):
    code, out = run(tmp_path, "cap", "learn", *SYN, "--set", "data.patterns=7")
    assert code == 2
    err = json.loads((out / "error.json").read_text())
    assert err["type"] == "CapacityError"
    assert json.loads((out / "results.json").read_text())["registered"] == 6


def test_infer_stored_and_dimension_error(tmp_path, learned):
    code, out = run(tmp_path, "inf", "infer", "--model", str(learned / "model.tlnm"))
    assert code == 0
    with open(out / "inference.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["support"] for r in rows] == ["1 2", "2 3", "3 4"]
    assert all(float(r["similarity"]) > 0.999 for r in rows)
    bad = tmp_path / "bad.csv"
    np.savetxt(bad, np.ones((1, 39)), delimiter=",")
    code, out = run(tmp_path, "inf2", "infer", "--model", str(learned / "model.tlnm"),
                    "--set", f"infer.inputs={bad}")
    assert code == 2
    assert json.loads((out / "error.json").read_text())["type"] == "DimensionError"


def test_certify_both_methods(tmp_path, learned):
    code, out = run(tmp_path, "cert", "certify", "--model", str(learned / "model.tlnm"))
    assert code == 0
    with open(out / "certificates.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert all(float(r["r_lp"]) > 0 and float(r["r_sdp"]) > 0 for r in rows)
    assert "single-sided" in rows[0]["lp_flags"]


def test_certify_infeasible_levels(tmp_path):
    code, model_dir = run(tmp_path, "l45", "learn", *SYN, "--set", "data.patterns=2",
                          "--set", "network.epsilon=0.45")
    assert code == 0
    mp = str(model_dir / "model.tlnm")
    code, out = run(tmp_path, "c45", "certify", "--model", mp, "--method", "lp")
    assert code == 2
    doc = json.loads((out / "results.json").read_text())
    assert all(c["lp"]["r"] == 0 and c["lp"]["reason"] for c in doc["certificates"])
    code, _ = run(tmp_path, "c45b", "certify", "--model", mp, "--method", "sdp")
    assert code == 0


def test_plot_from_learn_dir(tmp_path, learned):
    code, out = run(tmp_path, "plot", "plot", "--set", f"plot.results={learned}",
                    "--set", "plot.grid=40")
    assert code == 0
    rates = (out / "rates.svg").read_text()
    assert rates.count('class="rate"') == 7
    proj = (out / "projection.svg").read_text()
    assert proj.count('class="attractor"') == 3
    meta = json.loads((out / "plots.json").read_text())
    assert "accuracy.svg" not in meta["figures"] and meta["missing"]
    code, out2 = run(tmp_path, "plot2", "plot", "--set", f"plot.results={learned}",
                     "--set", "plot.grid=40")
    assert (out2 / "projection.svg").read_bytes() == (out / "projection.svg").read_bytes()


def test_plot_nothing(tmp_path):
    code, _ = run(tmp_path, "p0", "plot", "--set", f"plot.results={tmp_path / 'nowhere'}")
    assert code == 1


def test_config_file_and_overrides(tmp_path):
    cfgf = tmp_path / "c.yaml"
    cfgf.write_text("seed: 9\ndata:\n  source: synthetic\n  d: 20\n  patterns: 1\n")
    code, out = run(tmp_path, "cfg", "learn", "--config", str(cfgf), "--seed", "11")
    assert code == 0
    eff = yaml.safe_load((out / "config.effective.yaml").read_text())
    assert eff["seed"] == 11 and eff["data"]["d"] == 20


@pytest.mark.parametrize("argv", [
    ["learn", "--set", "network.bogus=1"],
    ["learn", "--set", "nodot"],
    ["learn", "--method", "xyz"],
    ["frobnicate"],
])
def test_usage_errors(tmp_path, argv):
    try:
        code = main([*argv, "--out", str(tmp_path / "u")])
    except SystemExit as exc:
        code = exc.code
    assert code == 1
