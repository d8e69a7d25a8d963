import json

import numpy as np
import pytest

from pahy.cli import RunConfig, UsageError, main
from pahy.grids import build_panel, write_ticks_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_kernel_constants(capsys):
    code, out, _ = run(capsys, "kernel-constants", "--kernel", "triangle")
    assert code == 0
    data = json.loads(out)
    assert data["psi"] == 0.25
    assert set(data) >= {"psi", "mu", "mu_tilde", "kappa", "kappa_bar", "kappa_tilde"}


def test_usage_errors(capsys):
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "kernel-constants", "--theta", "abc")[0] == 2
    code, _, err = run(capsys, "simulate", "--reps", "1", "--out", "x")
    assert code == 2 and "seed" in err
    assert run(capsys, "mc", "--reps", "2")[0] == 2
    assert run(capsys, "calibrate", "--reps", "100")[0] == 2


def test_non_monotone_input_exit_three(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("asset,time,value\na,0,1\na,0.6,2\na,0.3,3\na,1,4\n")
    code, _, err = run(capsys, "estimate", "--input", str(bad))
    assert code == 3 and "a" in err


def test_unknown_kernel_exit_three(capsys):
    assert run(capsys, "kernel-constants", "--kernel", "nope")[0] == 3


def test_estimate_with_interval(tmp_path, capsys):
    rng = np.random.default_rng(0)
    t = np.linspace(0, 1, 2001)
    p = build_panel([("x", t, rng.normal(size=2001).cumsum() / 45), ("y", t[::2], rng.normal(size=1001).cumsum() / 32)])
    path = tmp_path / "t.csv"
    write_ticks_csv(p, path)
    out = tmp_path / "r.json"
    assert main(["estimate", "--input", str(path), "--ci", "0.9", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["assets"] == ["x", "y"]
    assert len(data["variance"]["vec_matrix"]) == 4
    assert data["confidence_region"]["level"] == 0.9


def test_mc_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["mc", "--scenario", "2", "--N", "4680", "--reps", "50", "--seed", "1", "--no-calibration"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_calibrate_then_mc(tmp_path):
    cal = tmp_path / "cal.json"
    assert main(["calibrate", "--scenario", "1", "--N", "4680", "--reps", "100", "--seed", "3", "--out", str(cal)]) == 0
    rep = tmp_path / "rep.json"
    assert main(["mc", "--scenario", "1", "--N", "4680", "--reps", "5", "--seed", "3", "--calibration", str(cal), "--out", str(rep)]) == 0
    assert json.loads(rep.read_text())["calibrated"] is True
    # A table for another scheme is refused as invalid input.
    assert main(["mc", "--scenario", "2", "--N", "4680", "--reps", "5", "--seed", "3", "--calibration", str(cal)]) == 3


def test_simulate_writes_manifest(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--scheme", "poisson", "--N", "2340", "--reps", "2", "--seed", "5", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert [r["file"] for r in manifest["replications"]] == ["rep_00000.csv", "rep_00001.csv"]
    assert (out / "rep_00001.csv").exists()
    assert len(manifest["replications"][0]["integrated_covariance"]) == 2


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kernel": "sine"}))
    code, out, _ = run(capsys, "kernel-constants", "--config", str(cfg))
    assert code == 0 and json.loads(out)["kernel"] == "sine"
    code, out, _ = run(capsys, "kernel-constants", "--config", str(cfg), "--kernel", "triangle")
    assert json.loads(out)["kernel"] == "triangle"
    cfg.write_text(json.dumps({"kernal": "sine"}))
    assert run(capsys, "kernel-constants", "--config", str(cfg))[0] == 2


def test_config_round_trip():
    cfg = RunConfig(theta=0.2, seed=4, scheme="shifted")
    once = cfg.dumps()
    assert RunConfig.from_dict(json.loads(once)).dumps() == once
    with pytest.raises(UsageError):
        RunConfig.from_dict({"bogus": 1})
