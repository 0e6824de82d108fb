import json
from pathlib import Path

import pytest

from dislodyn import cli
from dislodyn.reporting import read_table


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


DYN = """
experiment = "dynamics"
out = "{out}"
[dyn]
s = 0.5
gamma = 6.283185307179586
positions = [-1.0, 0.0, 1.0]
orientations = [1, -1, 1]
horizon = 1.0
"""


def test_dynamics_run_and_plotdata(tmp_path):
    cfg = write(tmp_path, DYN.format(out=tmp_path / "dyn"))
    assert cli.main(["run", str(cfg)]) == 0
    manifest = json.loads((tmp_path / "dyn" / "manifest.json").read_text())
    assert manifest["rollup"] is True
    assert manifest["files"] and all(Path(f).exists() for f in manifest["files"])
    header, data = read_table(tmp_path / "dyn" / "traj.csv")
    assert header == ["t", "x_1", "x_2", "x_3", "theta_1", "theta_2", "V", "V0"]
    report = json.loads((tmp_path / "dyn" / "report.json").read_text())
    assert report["collision"]["classification"] == "triple"
    assert cli.main(["plotdata", "--manifest", str(tmp_path / "dyn" / "manifest.json")]) == 0
    theta = (tmp_path / "dyn" / "plot" / "theta.dat").read_text().splitlines()
    assert theta[0] == "# t theta_1 theta_2"


def test_outputs_are_deterministic(tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert cli.main(["run", str(write(tmp_path, DYN.format(out=out), f"c{k}.toml"))]) == 0
        texts.append(((out / "traj.csv").read_bytes(), (out / "report.json").read_bytes()))
    assert texts[0] == texts[1]


def test_out_of_range_key_exit_3(tmp_path, capsys):
    cfg = write(tmp_path, DYN.format(out=tmp_path / "x").replace("s = 0.5", "s = 1.5"))
    assert cli.main(["run", str(cfg)]) == 3
    assert "dyn.s" in capsys.readouterr().err


def test_unknown_key_exit_3(tmp_path, capsys):
    cfg = write(tmp_path, DYN.format(out=tmp_path / "x") + "bogus = 1\n")
    assert cli.main(["run", str(cfg)]) == 3
    assert "dyn.bogus" in capsys.readouterr().err


def test_parse_error_exit_2(tmp_path):
    assert cli.main(["run", str(write(tmp_path, "experiment = [unclosed\n"))]) == 2
    assert cli.main(["run", str(tmp_path / "missing.toml")]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_grid_too_coarse_exit_3(tmp_path):
    text = """
experiment = "pde"
out = "{out}"
[pde]
eps = 0.04
cells = 1024
""".format(out=tmp_path / "p")
    assert cli.main(["run", str(write(tmp_path, text))]) == 3


def test_failed_check_exit_1(tmp_path):
    # the barrier residual at eps = 0.04 is a known failing acceptance probe
    out = tmp_path / "b"
    assert cli.main(["verify", "--criteria", "12", "--out", str(out)]) == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["rollup"] is False


def test_presets_listed_and_valid():
    names = cli.preset_names()
    for k in range(1, 15):
        assert any(n.startswith(f"ac{k:02d}_") for n in names)
    for n in names:
        cfg = cli.load_config(cli.preset_path(n))
        assert cfg.kind in cli.KINDS


def test_verify_theorems_preset(tmp_path, capsys):
    assert cli.main(["run", "--preset", "verify_theorems", "--out", str(tmp_path / "v")]) == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("[")]
    assert lines and all(ln.startswith("[PASS]") for ln in lines)
    data = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert all(o["passed"] for o in data["outcomes"])


def test_layer_subcommand(tmp_path):
    out = tmp_path / "profile.json"
    assert cli.main(["layer", "--s", "0.5", "--potential", "cosine", "--L", "40", "--h", "0.05",
                     "--out", str(out)]) == 0
    prof = json.loads(out.read_text())
    assert abs(prof["gamma"] - 6.283185307179586) <= 1e-3
    assert prof["tail_report"]["kappa_exceeds_2s"]


def test_sweep_and_conv(tmp_path, monkeypatch):
    monkeypatch.setenv("DISLODYN_THREADS", "2")
    text = """
experiment = "sweep"
out = "{out}"
[pde]
t_end = 0.004
probe_x = [0.0, 5.0]
[sweep]
eps = [0.16, 0.08]
""".format(out=tmp_path / "s")
    assert cli.main(["run", str(write(tmp_path, text))]) == 0
    header, data = read_table(tmp_path / "s" / "conv.csv")
    assert data.shape[0] == 2 and header[0] == "eps"
    assert (tmp_path / "s" / "eps_1" / "pde_report.json").exists()
    assert cli.main(["plotdata", "--manifest", str(tmp_path / "s" / "manifest.json")]) == 0
    conv = (tmp_path / "s" / "plot" / "conv.dat").read_text().splitlines()
    assert conv[0] == "# eps probe_error" and len(conv) == 3


def test_plotdata_empty_trajectory(tmp_path):
    traj = tmp_path / "traj.csv"
    traj.write_text("t,x_1,x_2,theta_1,V,V0\n")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"kind": "dynamics", "artifacts": {"trajectory": str(traj)}}))
    assert cli.main(["plotdata", "--manifest", str(manifest)]) != 0
    assert not (tmp_path / "plot").exists()


def test_worker_count(monkeypatch):
    monkeypatch.setenv("DISLODYN_THREADS", "1")
    assert cli.worker_count(5) == 1
    monkeypatch.delenv("DISLODYN_THREADS")
    assert 1 <= cli.worker_count(3) <= 3
