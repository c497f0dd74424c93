import json

import pytest

from incsynth.cli import main
from incsynth.fixtures import START, gate_tables
from incsynth.learning import Dataset, write_dataset
from incsynth.scenario import Scenario, room_samples


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("which,wins", [(0, False), (1, True)])
@pytest.mark.parametrize("method", ["psi", "lifting"])
def test_gate_solve(tmp_path, capsys, which, wins, method):
    tab = gate_tables()[which]
    (tmp_path / "t.json").write_text(json.dumps(tab.to_dict()))
    code, _, _ = _run(capsys, "abstract", tmp_path / "t.json", "--goal", "2", "--out", tmp_path / "g.json")
    assert code == 0
    code, out, _ = _run(capsys, "solve", tmp_path / "g.json", "--method", method, "--regions", tmp_path / "r.json")
    assert code == 0
    regions = json.loads((tmp_path / "r.json").read_text())
    assert (START in regions) == wins
    assert 2 in regions
    assert json.loads(out)["regions"] == regions


def test_file_pipeline(tmp_path, capsys, small):
    sc_path = tmp_path / "s.json"
    small.save(sc_path)
    d = tmp_path / "d.txt"
    assert _run(capsys, "simulate", sc_path, "dataset", "--out", d)[0] == 0
    goal = ",".join(map(str, sorted(small.goal)))
    obst = ",".join(map(str, sorted(small.obstacles)))
    grid = ["--grid", "6x6", "--clip"]

    code, _, _ = _run(capsys, "learn", d, *grid, "--obstacles", obst, "--out", tmp_path / "tab.json")
    assert code == 0
    code, _, _ = _run(capsys, "abstract", tmp_path / "tab.json", "--goal", goal, "--out", tmp_path / "g.json")
    assert code == 0
    code, out, _ = _run(capsys, "solve", tmp_path / "g.json", "--regions", tmp_path / "r0.json")
    assert code == 0

    ck = tmp_path / "ck.json"
    start = ",".join(map(str, sorted(small.start)))
    code, _, _ = _run(capsys, "init", d, *grid, "--goal", goal, "--obstacles", obst, "--start", start,
                      "--out", ck, "--regions", tmp_path / "r1.json")
    assert code == 0
    r0 = json.loads((tmp_path / "r0.json").read_text())
    r1 = json.loads((tmp_path / "r1.json").read_text())
    assert r0 == r1 and r1

    room = room_samples(small.model, small)[0]
    write_dataset(tmp_path / "room.txt", Dataset(2, small.model.n_inputs, room), small.model.noise_support())
    code, out, _ = _run(capsys, "increment", ck, tmp_path / "room.txt", "--regions", tmp_path / "r2.json")
    assert code == 0
    rep = json.loads(out)
    assert set(rep["win0_before"]) <= set(rep["win0_after"])
    code, _, _ = _run(capsys, "solve", ck, "--fresh", "--regions", tmp_path / "r3.json")
    assert code == 0
    assert (tmp_path / "r2.json").read_text() == (tmp_path / "r3.json").read_text()

    code, out, _ = _run(capsys, "simulate", sc_path, "rollouts", "--checkpoint", ck, "--runs", "3", "--horizon", "40")
    assert code == 0
    summary = json.loads(out)
    assert summary["obstacle_hits"] == 0 and summary["runs"] == 3 * summary["starts"]

    code, _, _ = _run(capsys, "bench", sc_path, "--out", tmp_path / "b.csv")
    assert code == 0
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0].startswith("stage,states,deltas") and len(lines) == 3


def test_scenario_command(tmp_path, capsys):
    code, _, _ = _run(capsys, "scenario", "--size", "16", "--seed", "4", "--out", tmp_path / "s.json")
    assert code == 0
    sc = Scenario.load(tmp_path / "s.json")
    assert sc.cells == (16, 16) and sc.seed == 4 and len(sc.rooms) == 5


def test_errors_are_json(tmp_path, capsys):
    code, out, err = _run(capsys, "solve", tmp_path / "missing.json")
    assert code == 1 and json.loads(err)["error"] == "FileNotFoundError"
    bad = tmp_path / "bad.txt"
    bad.write_text("2 1 ; -1 -1 ; 1 1\n0 0 ; 0\n")
    code, _, err = _run(capsys, "init", bad, "--grid", "2x2", "--goal", "0", "--out", tmp_path / "c.json")
    assert code == 1 and "malformed" in json.loads(err)["message"]
    code, _, err = _run(capsys, "scenario", "--size", "4")
    assert code == 1 and json.loads(err)["error"] == "ValueError"


def test_noise_flag_overrides(tmp_path, capsys, small):
    sc_path = tmp_path / "s.json"
    small.save(sc_path)
    d = tmp_path / "d.txt"
    _run(capsys, "simulate", sc_path, "dataset", "--out", d)
    code, out, _ = _run(capsys, "learn", d, "--grid", "6", "--noise=-2,2")
    assert code == 0
    assert json.loads(out)["config"]["noise"]["h"] == [2.0, 2.0]
