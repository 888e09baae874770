import json

import numpy as np
import pytest

from extpos.cli import main
from extpos.drone import drone
from extpos.lti import LtiSystem, Trajectory, save_system, write_trajectory_csv


@pytest.fixture
def drone_file(tmp_path):
    path = tmp_path / "drone.json"
    save_system(path, drone())
    return path


def test_check(drone_file, tmp_path):
    out = tmp_path / "check.json"
    assert main(["check", str(drone_file), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["failed"] == []


def test_check_failing_plant(tmp_path):
    path = tmp_path / "bad.json"
    save_system(path, LtiSystem([[1.0]], [[1.0]], [[0.0]]))
    assert main(["check", str(path)]) == 1


def test_bad_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["check", str(bad)]) == 2
    assert main(["check", str(tmp_path / "missing.json")]) == 2


def test_lift(drone_file, tmp_path):
    out = tmp_path / "lift.json"
    assert main(["lift", str(drone_file), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert np.array(data["A"]).shape == (4, 4) and np.array(data["C"]).tolist() == [[0, 0, 0, 1]]


def test_synth_model_and_simulate(drone_file, tmp_path):
    gain = tmp_path / "gain.json"
    assert main(["synth", "--model", str(drone_file), "--lambda", "0.4", "--out", str(gain)]) == 0
    res = json.loads(gain.read_text())
    assert res["verification"]["monotone"] and res["verification"]["stable"]
    sim = tmp_path / "sim"
    assert main(["simulate", str(drone_file), "--gain", str(gain), "--x0", "10,0", "--out", str(sim)]) == 0
    assert (sim / "closed_loop.csv").exists()


def test_synth_bad_lambda(drone_file):
    assert main(["synth", "--model", str(drone_file), "--lambda", "1.5"]) == 2
    assert main(["synth", "--model", str(drone_file), "--lambda", "abc"]) == 2


def test_gen_data_and_synth_data(drone_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen-data", str(drone_file), "--T", "8", "--seed", "3", "--out", str(a)]) == 0
    assert main(["gen-data", str(drone_file), "--T", "8", "--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 10  # header + t = 0..8
    gain = tmp_path / "gain.json"
    assert main(["synth", "--data", str(a), "--lambda", "0.4", "--out", str(gain)]) == 0
    assert json.loads(gain.read_text())["verification"]["monotone"]


def test_gen_data_too_short(drone_file, tmp_path):
    assert main(["gen-data", str(drone_file), "--T", "7", "--out", str(tmp_path / "x.csv")]) == 2


def test_order_inferred_without_sidecar(drone_file, tmp_path):
    a = tmp_path / "a.csv"
    main(["gen-data", str(drone_file), "--T", "12", "--out", str(a)])
    (tmp_path / "a.csv.meta.json").unlink()
    gain = tmp_path / "g.json"
    assert main(["synth", "--data", str(a), "--out", str(gain)]) == 0
    assert np.array(json.loads(gain.read_text())["K"]).shape == (1, 4)


def test_mimo_data_refused(tmp_path, capsys):
    rng = np.random.default_rng(0)
    path = tmp_path / "mimo.csv"
    write_trajectory_csv(path, Trajectory(rng.standard_normal((21, 2)), rng.standard_normal((21, 1))))
    assert main(["synth", "--data", str(path), "--n", "2"]) == 1
    assert "SISO" in capsys.readouterr().err


def test_non_pe_data_refused(tmp_path):
    path = tmp_path / "zero.csv"
    write_trajectory_csv(path, Trajectory(np.zeros((9, 1)), np.zeros((9, 1))))
    assert main(["synth", "--data", str(path), "--n", "2"]) == 1


def test_infeasible_exit(tmp_path):
    path = tmp_path / "unstab.json"
    save_system(path, LtiSystem([[2.0]], [[0.0]], [[1.0]]))
    assert main(["synth", "--model", str(path)]) == 1


def test_simulate_bad_gain(drone_file, tmp_path):
    g = tmp_path / "g.json"
    g.write_text("[[1, 2")
    assert main(["simulate", str(drone_file), "--gain", str(g)]) == 2
    g.write_text("[[1, 2, 3]]")
    assert main(["simulate", str(drone_file), "--gain", str(g), "--x0", "1,0"]) == 2


def test_demo_drone(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["demo-drone", "--out", str(a)]) == 0
    assert main(["demo-drone", "--out", str(b)]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert len(files) == 13 and "summary.json" in files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = json.loads((a / "summary.json").read_text())
    assert summary["monotone_constrained"]
    unconstrained = [p for p in summary["panels"] if p["mode"] == "unconstrained"]
    assert not all(p["monotone"] for p in unconstrained)
