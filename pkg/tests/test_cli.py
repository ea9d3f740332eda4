import csv
import json

import numpy as np
import pytest

from scrisk.cascade import risk_profile
from scrisk.cli import main
from scrisk.io import load_edge_list
from scrisk.production import EssentialityMatrix, calibrate


def two_firms(path):
    path.write_text("source,target,source_nace3,target_nace3,weight\nA,B,011,102,5000\n")
    return path


@pytest.fixture(scope="module")
def gen_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert main(["generate", "-o", str(out), "--n-firms", "30", "--n-sectors", "4", "--seed", "2"]) == 0
    return out


def optimize(gen_dir, out, *extra):
    argv = ["optimize", str(gen_dir / "network.csv"), "--essentiality", str(gen_dir / "essentiality.csv"),
            "-o", str(out), "--workers", "1", "--steps", "30", "--seed", "4", *extra]
    return main(argv)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_esri_two_firms(tmp_path, capsys):
    net = two_firms(tmp_path / "n.csv")
    assert main(["esri", str(net), "-o", str(tmp_path / "out"), "--workers", "1"]) == 0
    assert len(read_rows(tmp_path / "out" / "profile.csv")) == 2
    assert "mean ESRI" in capsys.readouterr().out


def test_missing_essentiality_fallback(tmp_path):
    net = two_firms(tmp_path / "n.csv")
    missing = str(tmp_path / "nope.csv")
    assert main(["esri", str(net), "--essentiality", missing, "-o", str(tmp_path / "a")]) == 3
    assert main(["esri", str(net), "--essentiality", missing, "--default-essential",
                 "-o", str(tmp_path / "b")]) == 0


def test_esri_matches_library(tmp_path):
    assert main(["generate", "-o", str(tmp_path), "--n-firms", "20", "--n-sectors", "4", "--seed", "6"]) == 0
    assert main(["esri", str(tmp_path / "network.csv"), "--essentiality", str(tmp_path / "essentiality.csv"),
                 "-o", str(tmp_path / "out"), "--workers", "1"]) == 0
    net = load_edge_list(tmp_path / "network.csv")
    prof = risk_profile(net, calibrate(net, EssentialityMatrix.read_csv(tmp_path / "essentiality.csv")), workers=1)
    got = {r["firm"]: float(r["esri"]) for r in read_rows(tmp_path / "out" / "profile.csv")}
    assert set(got) == set(prof.labels)
    assert np.allclose([got[l] for l in prof.labels], prof.esri, atol=1e-12, rtol=0)


def test_beta_zero_accepts_everything(gen_dir, tmp_path):
    assert optimize(gen_dir, tmp_path, "--beta", "0") == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["results"]["acceptance_rate"] == 1.0
    assert all(r["accepted"] == "1" for r in read_rows(tmp_path / "trajectory.csv"))


def test_linear_schedule_in_manifest(gen_dir, tmp_path):
    assert optimize(gen_dir, tmp_path, "--beta", "linear:12800:50000") == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["schedule"] == "linear:12800:50000"
    assert manifest["config"]["beta"] == "linear:12800:50000"
    assert manifest["inputs"]["network"]["sha256"]


def test_same_seed_identical_files(gen_dir, tmp_path):
    for name in ("a", "b"):
        assert optimize(gen_dir, tmp_path / name, "--beta", "fixed:3000") == 0
    for f in ("trajectory.csv", "moves.jsonl", "final.csv", "best.csv", "profile_final.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_replay_reproduces_trajectory(gen_dir, tmp_path, capsys):
    assert optimize(gen_dir, tmp_path / "a", "--beta", "linear:5000:30") == 0
    assert main(["optimize", "--replay", str(tmp_path / "a" / "manifest.json"), "-o", str(tmp_path / "b")]) == 0
    assert "identical" in capsys.readouterr().out
    assert (tmp_path / "a/trajectory.csv").read_bytes() == (tmp_path / "b/trajectory.csv").read_bytes()


def test_replay_detects_changed_input(gen_dir, tmp_path):
    net = tmp_path / "net.csv"
    net.write_bytes((gen_dir / "network.csv").read_bytes())
    assert main(["optimize", str(net), "-o", str(tmp_path / "a"), "--steps", "3", "--workers", "1"]) == 0
    with open(net, "a") as fh:
        fh.write("\n")
    assert main(["optimize", "--replay", str(tmp_path / "a" / "manifest.json"), "-o", str(tmp_path / "b")]) == 3


def test_report(gen_dir, tmp_path):
    assert optimize(gen_dir, tmp_path / "run", "--beta", "fixed:3000", "--snapshot-every", "10") == 0
    assert optimize(gen_dir, tmp_path / "base", "--beta", "0") == 0
    assert main(["report", str(tmp_path / "run"), "--baseline", str(tmp_path / "base")]) == 0
    rep = tmp_path / "run" / "report"
    rows = read_rows(rep / "summary.csv")
    assert [r["network"] for r in rows] == ["empirical", "rewired", "configuration model"]
    for col in ("N", "L", "<k_tot>", "Reciprocity", "Size of the largest WCC", "Diameter*"):
        assert col in rows[0]
    for svg in ("trajectory.svg", "profile_bars.svg", "degree_esri.svg"):
        assert (rep / svg).read_text().startswith("<?xml")
    # the profile diff agrees with the trajectory endpoint
    traj = read_rows(tmp_path / "run" / "trajectory.csv")
    reduction = float(traj[-1]["mean_esri"]) / float(traj[0]["mean_esri"]) - 1
    assert float(rows[1]["<ESRI> reduction"]) == pytest.approx(reduction, abs=1e-12)


def test_report_is_deterministic(gen_dir, tmp_path):
    assert optimize(gen_dir, tmp_path / "run", "--beta", "fixed:3000") == 0
    assert main(["report", str(tmp_path / "run"), "-o", str(tmp_path / "r1")]) == 0
    assert main(["report", str(tmp_path / "run"), "-o", str(tmp_path / "r2")]) == 0
    for f in ("summary.csv", "trajectory.svg", "profile_bars.svg"):
        assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes()


def test_report_on_empty_dir(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 3
    assert "trajectory.csv" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [["--beta", "cosine"], ["--steps", "-1"], ["--band", "1.5"]])
def test_config_errors(gen_dir, tmp_path, extra):
    assert optimize(gen_dir, tmp_path, *extra) == 2


def test_bad_edge_list_is_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("source,target\nA,B\n")
    assert main(["esri", str(bad), "-o", str(tmp_path / "o")]) == 3


def test_config_file_layering(gen_dir, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('steps = 50\nbeta = "fixed:100"\n[optimize]\nsteps = 7\n')
    assert optimize(gen_dir, tmp_path / "a", "--config", str(cfg)) == 0
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    # explicit --steps 30 beats the file
    assert m["config"]["steps"] == 30 and m["schedule"] == "fixed:100"
    argv = ["optimize", str(gen_dir / "network.csv"), "-o", str(tmp_path / "b"), "--workers", "1",
            "--config", str(cfg)]
    assert main(argv) == 0
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["config"]["steps"] == 7
    cfg.write_text("stepz = 3\n")
    assert optimize(gen_dir, tmp_path / "c", "--config", str(cfg)) == 2


def test_cli_does_not_touch_inputs(gen_dir, tmp_path):
    before = (gen_dir / "network.csv").read_bytes()
    assert optimize(gen_dir, tmp_path, "--beta", "0") == 0
    assert (gen_dir / "network.csv").read_bytes() == before


def test_ingest_and_extract(tmp_path, gen_dir):
    assert main(["ingest", str(gen_dir / "network.csv"), "-o", str(tmp_path / "clean.csv")]) == 0
    assert json.loads((tmp_path / "clean.json").read_text())["firms"] == 30
    assert main(["extract", str(tmp_path / "clean.csv"), "-o", str(tmp_path / "sub.csv"),
                 "--section", "C", "--target-size", "10"]) == 0
    assert load_edge_list(tmp_path / "sub.csv").n_firms >= 1
    assert main(["extract", str(tmp_path / "clean.csv"), "-o", str(tmp_path / "x.csv")]) == 2
