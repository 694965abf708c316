import json
import os

import numpy as np
import pytest

from lls_cd import cli, dynamics
from lls_cd.dynamics import DriveMode
from lls_cd.model import DriveSchedule, SpinSystem

SMALL = {"T_list": [0.01, 0.1], "N_list": [10, 20], "eig_samples": 11, "phase_N": 5,
         "spectrum_points": 512, "plots": False}


def write_config(tmp_path, **over):
    cfg = dict(SMALL, **over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_defaults_reproduce_reference_parameters():
    cfg = cli.load_config(None)
    assert cfg.delta_hz == 90.7 and cfg.j_hz == 3.24
    assert cfg.T_list == [0.01, 0.05, 0.1, 0.3, 0.5]
    assert cfg.N_list == [10, 15, 20, 25, 30]
    assert cfg.tau_storage_s == 30.0


@pytest.mark.parametrize("bad", [{"delta_hz": -1}, {"T_list": []}, {"alpha_mode": "magic"},
                                 {"N_list": [0]}, {"unknown": 1}, {"modes": ["XX"]}])
def test_config_errors_exit_2(tmp_path, bad):
    assert cli.run(["eigs", "--config", write_config(tmp_path, **bad), "--out", str(tmp_path)]) == 2


def test_unreadable_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.run(["eigs", "--config", str(p)]) == 2


def test_eigs_csv(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["eigs", "--config", write_config(tmp_path), "--out", str(out)]) == 0
    lines = (out / "eigs.csv").read_text().splitlines()
    assert lines[0] == "t_over_T,E1,E2,E3,E4,mode,T"
    assert len(lines) == 1 + 2 * 2 * 11
    last_ad = [l for l in lines if ",AD," in l][10].split(",")
    assert float(last_ad[0]) == 1.0
    sys = SpinSystem()
    expect = np.linalg.eigvalsh(__import__("lls_cd").model.h_final(sys))
    assert np.allclose([float(x) for x in last_ad[1:5]], expect, rtol=1e-8)
    assert {l.split(",")[-1] for l in lines[1:] if ",CD," in l} == {"0.01", "0.1"}


def test_phases_csv(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["phases", "--config", write_config(tmp_path), "--out", str(out)]) == 0
    rows = [l.split(",") for l in (out / "phases.csv").read_text().splitlines()]
    assert rows[0] == ["t", "theta", "gamma", "mode"]
    ad = [r for r in rows[1:] if r[3] == "AD"]
    assert max(abs(float(r[2])) for r in ad) <= 1e-8
    assert float(ad[0][1]) == 0 and float(ad[0][2]) == 0


def test_sweep_csv_and_bitwise_cell(tmp_path):
    out = tmp_path / "o"
    cfg = write_config(tmp_path, T_list=[0.1], N_list=[30], modes=["CD"])
    assert cli.run(["sweep", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "T,N,mode,alpha_mode,fidelity_final"
    value = float(lines[1].split(",")[-1])
    direct = dynamics.evolve(SpinSystem(), DriveSchedule(0.1, 30), DriveMode.CD).final_fidelity
    assert value == float(format(direct, ".9g"))


def test_default_sweep_grid_rows(tmp_path):
    cfg = cli.load_config(None)
    out = cli.Outputs()
    res = cli.cmd_sweep(cfg, out)
    assert len(res.cells) == 50
    for N in cfg.N_list:
        assert res.lookup(0.01, N, DriveMode.CD) >= res.lookup(0.01, N, DriveMode.AD)
    means = out.files["sweep_mean_over_N.csv"].splitlines()
    assert len(means) == 1 + 10


def test_compile_outputs(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["compile", "--config", write_config(tmp_path), "--out", str(out)]) == 0
    progs = sorted(os.listdir(out / "programs"))
    assert len(progs) == 2 * 2 * 2
    timing = json.loads((out / "timing.json").read_text())
    assert list(timing) == ["w_mode", "angle_scale", "nu_x_hz", "nu_f_hz", "cells"]
    cell = timing["cells"][0]
    assert cell["f_factor"] == pytest.approx(cell["t_cd"] / cell["t_ad"])
    assert list(cell)[:5] == ["T", "N", "t_ad", "t_cd", "f_factor"]


def test_compile_calibration_failure_exit_3(tmp_path, monkeypatch):
    from lls_cd import pulseir
    from lls_cd.errors import CalibrationFailed

    def boom(*a, **k):
        raise CalibrationFailed("forced", 1.0)

    monkeypatch.setattr(pulseir, "calibrate_w", boom)
    assert cli.run(["compile", "--config", write_config(tmp_path), "--out", str(tmp_path / "o")]) == 3


@pytest.mark.parametrize("source", cli.SPECTRUM_SOURCES)
def test_spectrum_sources(tmp_path, source):
    out = tmp_path / "o"
    assert cli.run(["spectrum", "--config", write_config(tmp_path, spectrum_source=source),
                    "--out", str(out)]) == 0
    lines = (out / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "frequency_hz,real" and len(lines) == 513


def test_fit_decay_command(tmp_path):
    tau = np.arange(5, 51, 5)
    data = tmp_path / "decay.csv"
    data.write_text("tau_s,signal\n" + "".join(f"{t},{float(np.exp(-t / 27.3))!r}\n" for t in tau))
    out = tmp_path / "o"
    assert cli.run(["fit-decay", "--input", str(data), "--out", str(out), "--no-plots"]) == 0
    doc = json.loads((out / "decay_fit.json").read_text())
    assert doc["t_dec_s"] == pytest.approx(27.3, rel=1e-9)
    assert doc["ratio_to_t1"] == pytest.approx(5.35, abs=0.01)


def test_fit_decay_failure_exit_4(tmp_path):
    data = tmp_path / "decay.csv"
    data.write_text("tau_s,signal\n1,1\n2,-1\n3,0\n")
    assert cli.run(["fit-decay", "--input", str(data), "--out", str(tmp_path)]) == 4


def test_fit_decay_needs_input():
    assert cli.run(["fit-decay"]) == 2


def test_aggregate_command(tmp_path):
    data = tmp_path / "bars.csv"
    data.write_text("T,signal\n0.1,1\n0.1,3\n0.5,2\n")
    out = tmp_path / "o"
    assert cli.run(["aggregate", "--input", str(data), "--out", str(out)]) == 0
    assert (out / "aggregate.csv").read_text() == "T,signal_mean\n0.1,2\n0.5,2\n"


def test_all_is_deterministic_and_plots(tmp_path):
    cfg = write_config(tmp_path, plots=True)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run(["all", "--config", cfg, "--out", str(a)]) == 0
    assert cli.run(["all", "--config", cfg, "--out", str(b)]) == 0
    for name in ("eigs.csv", "phases.csv", "sweep.csv", "sweep_mean_over_N.csv", "spectrum.csv",
                 "timing.json"):
        assert read(a / name) == read(b / name)
        assert b"\r" not in read(a / name)
    for png in ("eigs.png", "phases.png", "sweep.png", "spectrum.png"):
        assert (a / png).stat().st_size > 0


def test_fmt_nine_digits():
    assert cli.fmt(1 / 3) == "0.333333333"
    assert cli.fmt(-0.0) == "0"
    assert cli.fmt(30) == "30"
