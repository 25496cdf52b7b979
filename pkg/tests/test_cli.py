"""Command-line interface: artifacts, exit codes, determinism."""

import json

import pytest

from slipgait.cli import main
from slipgait.model import ModelParams


@pytest.fixture(scope="module")
def params_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "params.json"
    path.write_text(ModelParams().to_json())
    return str(path)


def _run(*argv):
    return main(list(argv))


def test_mesh_command_writes_artifacts(params_file, tmp_path):
    out = tmp_path / "mesh"
    rc = _run("mesh", "--params", params_file, "--energy", "820",
              "--vertices", "120", "--out", str(out))
    assert rc == 0
    assert (out / "mesh_vertices.csv").exists()
    assert (out / "mesh_triangles.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["shell"]["energy_J"] == 820.0


def test_simulate_command(params_file, tmp_path):
    out = tmp_path / "sim"
    rc = _run("simulate", "--params", params_file, "--energy", "820",
              "--r", "0.9777", "--vy", "0.0", "--angle-seq", "65x4",
              "--gait", "W", "--out", str(out))
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["steps_completed"] == 4
    assert summary["max_relative_energy_drift"] < 1e-5
    traj = (out / "trajectory.csv").read_text().splitlines()
    assert traj[0].startswith("t_s,chart,")
    assert len(traj) > 10


def test_simulate_reports_mid_sequence_failure(params_file, tmp_path):
    out = tmp_path / "simfail"
    rc = _run("simulate", "--params", params_file, "--energy", "820",
              "--r", "0.9777", "--vy", "0.0", "--angle-seq", "65x2,89.9",
              "--out", str(out))
    assert rc == 0  # partial trajectories are still a valid result
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failure"] is not None


def test_viability_command_and_determinism(params_file, tmp_path):
    outs = []
    for tag, workers in (("a", "1"), ("b", "2")):
        out = tmp_path / tag
        rc = _run("viability", "--params", params_file, "--energy", "820",
                  "--vertices", "120", "--angles", "24", "--workers", workers,
                  "--out", str(out))
        assert rc == 0
        outs.append(out)
    for name in ("viability_R.csv", "viability_GR.csv", "viability_W.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_transitions_command(params_file, tmp_path):
    out = tmp_path / "trans"
    rc = _run("transitions", "--params", params_file, "--energy", "820",
              "--vertices", "120", "--angles", "24", "--from", "GR",
              "--to", "W", "--out", str(out))
    assert rc == 0
    assert (out / "transition_GR_to_W.csv").exists()
    assert (out / "transition_GR_to_W_window.csv").exists()


def test_missing_params_file_exits_2(tmp_path):
    rc = _run("simulate", "--params", str(tmp_path / "nope.json"),
              "--energy", "820", "--r", "0.97", "--vy", "0",
              "--angle-seq", "65", "--out", str(tmp_path / "o"))
    assert rc == 2


def test_energy_below_minimum_exits_2(params_file, tmp_path):
    rc = _run("mesh", "--params", params_file, "--energy", "10",
              "--vertices", "50", "--out", str(tmp_path / "o"))
    assert rc == 2


def test_unplannable_itinerary_exits_3(params_file, tmp_path, shell):
    rc = _run("plan", "--params", params_file, "--energy", "820",
              "--vertices", "120", "--angles", "24",
              "--r", str(shell.r_center + 0.999 * shell.L), "--vy", "0.0",
              "--itinerary", "GR,W", "--out", str(tmp_path / "o"))
    assert rc == 3
