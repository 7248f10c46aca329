import hashlib
import os

import numpy as np
import pytest

from rtdtopo.cli import main
from rtdtopo.geometry import classify_and_measure, export_isosurface
from rtdtopo.io import (COMPARISON_COLUMNS, HISTORY_COLUMNS, read_history_csv,
                        write_history_csv, write_polydata_vtk, write_snapshot,
                        write_structured_vtk)
from rtdtopo.mesh import build_grid
from rtdtopo.optimizer import TimeSchedule, make_schedule, run
from rtdtopo.problems import cantilever_2d

SMALL = """[app_cli]
preset = cantilever2d
[core_mesh]
dims = 16 8
[optimizer]
n = 6
T = 0.4
"""


def _digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL, encoding="utf-8")
    return path


def test_single_time_outputs(tmp_path):
    p = cantilever_2d(8, 4)
    hist = run(p, TimeSchedule((0.0,)))
    write_history_csv(tmp_path / "h.csv", hist)
    paths = write_snapshot(tmp_path, "closed_form", p.grid, hist[0])
    assert sorted(os.listdir(tmp_path)) == ["closed_form_0000.vtk",
                                            "closed_form_0000_interface.vtk", "h.csv"]
    data = read_history_csv(tmp_path / "h.csv")
    assert data["step"].shape == (1,)
    with open(paths[0], encoding="ascii") as fh:
        text = fh.read()
    assert "CELL_DATA 32" in text and "SCALARS chi double 1" in text
    assert "POINT_DATA 45" in text and "SCALARS psi_tau double 1" in text


def test_history_schema(tmp_path):
    p = cantilever_2d(12, 6)
    hist = run(p, make_schedule(4, -4.5, 0.0, 0.5))
    write_history_csv(tmp_path / "h.csv", hist)
    with open(tmp_path / "h.csv", encoding="ascii") as fh:
        assert fh.readline().strip() == ",".join(HISTORY_COLUMNS)
    data = read_history_csv(tmp_path / "h.csv")
    np.testing.assert_allclose(data["vol_hard_frac"] + data["vol_soft_frac"], 1.0, atol=1e-10)
    np.testing.assert_array_equal(data["wall_ms"], 0.0)


def test_vtk_shape_checked(tmp_path):
    g = build_grid((2, 2), (1.0, 1.0))
    with pytest.raises(ValueError):
        write_structured_vtk(tmp_path / "x.vtk", g, cell_data={"chi": np.ones(3)})


def test_interface_file_3d(tmp_path):
    g = build_grid((3, 3, 3), (1.0, 1.0, 1.0))
    psi = 0.5 - g.node_coords[:, 2]
    snap = classify_and_measure(g, psi)
    write_polydata_vtk(tmp_path / "s.vtk", *export_isosurface(snap))
    text = (tmp_path / "s.vtk").read_text(encoding="ascii")
    assert "POLYGONS" in text and "NORMALS normals double" in text


def test_cli_run_both_and_determinism(small_config, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(small_config), "--method", "both",
                 "--out", str(out1)]) == 0
    assert main(["run", "--config", str(small_config), "--method", "both",
                 "--out", str(out2)]) == 0
    with open(out1 / "comparison.csv", encoding="ascii") as fh:
        assert fh.readline().strip() == ",".join(COMPARISON_COLUMNS)
    for name in ("history_closed_form.csv", "history_levelset.csv", "comparison.csv"):
        assert _digest(out1 / name) == _digest(out2 / name)
    assert len([f for f in os.listdir(out1) if f.startswith("closed_form_")]) == 14


def test_cli_seed_warns(small_config, tmp_path):
    with pytest.warns(UserWarning, match="ignored"):
        assert main(["run", "--config", str(small_config), "--seed", "3",
                     "--out", str(tmp_path)]) == 0


def test_cli_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[elasticity]\nnu = banana\n", encoding="utf-8")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "bad.ini:2" in capsys.readouterr().err


def test_cli_nonconvergence_exit_code(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL + "tol_chi = 1e-12\nmax_iter = 2\n", encoding="utf-8")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert (tmp_path / "o" / "history_closed_form.csv").exists()


def test_cli_schedule(capsys):
    assert main(["schedule", "--n", "40", "--K", "-4.5"]) == 0
    lines = capsys.readouterr().out.split("\n")
    assert lines[0] == "0 0" and lines[40] == "40 1"
    assert main(["schedule", "--n", "0"]) == 2


def test_cli_verify(capsys):
    assert main(["verify"]) == 0
    assert capsys.readouterr().out.count("PASS") == 4


def test_threads_env(small_config, tmp_path, monkeypatch):
    monkeypatch.setenv("RTD_TOPOPT_THREADS", "zero")
    with pytest.raises(SystemExit):
        main(["schedule"])
    monkeypatch.setenv("RTD_TOPOPT_THREADS", "1")
    assert main(["schedule", "--n", "2"]) == 0
