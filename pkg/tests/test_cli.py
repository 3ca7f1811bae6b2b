import csv
import io
from importlib import resources

import numpy as np
import pytest

from lhring.cli import main

DATA = resources.files("lhring.data")

QUBITS = """\
qubits:
  A: {E_J0: 23.8, E_C: 0.243, d: 0.38}
  B: {E_J0: 25.7, E_C: 0.223, d: 0.39}
"""


def run(tmp_path, text, command, *extra, name="c.yaml"):
    cfg = tmp_path / name
    cfg.write_text(text)
    return main([command, "--config", str(cfg), "--out", str(tmp_path / "out"), *extra])


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def bundled(name):
    return DATA.joinpath(name).read_text()


def test_modes_fixture(tmp_path, capsys):
    assert run(tmp_path, bundled("fixture.yaml"), "modes") == 0
    r = rows(tmp_path / "out" / "modes.csv")
    assert len(r) == 13
    assert "modes: 13" in (tmp_path / "out" / "modes_report.txt").read_text()
    assert "modes: 13" in capsys.readouterr().out


def test_modes_ideal_ring_pairs(tmp_path):
    assert run(tmp_path, bundled("ideal24.yaml"), "modes") == 0
    rep = (tmp_path / "out" / "modes_report.txt").read_text()
    assert "degenerate_pairs: 11" in rep
    f = np.array([float(x["freq_GHz"]) for x in rows(tmp_path / "out" / "modes.csv")])
    assert f.min() == pytest.approx(1 / (4 * np.pi * np.sqrt(1.04e-9 * 303e-15)) * 1e-9, rel=1e-9)


def test_window_override(tmp_path):
    assert run(tmp_path, bundled("fixture.yaml"), "modes", "--window", "5:6") == 0
    f = [float(x["freq_GHz"]) for x in rows(tmp_path / "out" / "modes.csv")]
    assert f and all(5 <= x <= 6 for x in f)


def test_gcouple_fixture(tmp_path):
    assert run(tmp_path, bundled("fixture.yaml"), "gcouple") == 0
    r = rows(tmp_path / "out" / "couplings.csv")
    assert len(r) == 13 and {x["source"] for x in r} == {"Numeric"}


def test_zzsweep_decoupled_gives_zero(tmp_path):
    g = tmp_path / "zero.csv"
    g.write_text("freq_GHz,gA_MHz,gB_MHz,parity\n4.6,0,0,Even\n5.3,0,0,Odd\n")
    text = QUBITS + "couplings: zero.csv\nsweeps:\n  zzsweep: {f_A: [5.1, 5.2, 5.3], f_B: 5.04}\n"
    assert run(tmp_path, text, "zzsweep") == 0
    z = [float(x["zeta_MHz"]) for x in rows(tmp_path / "out" / "zzsweep.csv")]
    assert len(z) == 3 and max(abs(v) for v in z) < 1e-10


def test_jsweep_parallel_matches_serial(tmp_path):
    text = bundled("fixture.yaml").replace("{start: 4.0, stop: 6.48, step: 0.02}", "[4.0, 4.1, 4.2, 4.3]")
    assert run(tmp_path, text, "jsweep") == 0
    serial = (tmp_path / "out" / "jsweep.csv").read_text()
    assert run(tmp_path, text, "jsweep", "--parallel", "2") == 0
    assert (tmp_path / "out" / "jsweep.csv").read_text() == serial
    assert len(rows(tmp_path / "out" / "jsweep.csv")) == 4


@pytest.mark.parametrize("pipe", ["g", "j", "zeta"])
def test_synth_is_reproducible(tmp_path, pipe):
    text = bundled(f"synth_{pipe}.yaml")
    assert run(tmp_path, text, "synth", "--seed", "7") == 0
    first = (tmp_path / "out" / f"synth_{pipe}.csv").read_bytes()
    assert run(tmp_path, text, "synth", "--seed", "7") == 0
    assert (tmp_path / "out" / f"synth_{pipe}.csv").read_bytes() == first
    assert run(tmp_path, text, "synth", "--seed", "8") == 0
    assert (tmp_path / "out" / f"synth_{pipe}.csv").read_bytes() != first


@pytest.mark.parametrize("pipe,param,truth,tol", [("g", "g0", 26.6, 0.1), ("j", "J", 2.1, 0.05),
                                                  ("zeta", "zeta", -3.0, 0.05)])
def test_bundled_dataset_fit(tmp_path, pipe, param, truth, tol):
    text = bundled(f"synth_{pipe}.yaml").replace(f"dataset: synth_{pipe}.csv",
                                                 f"dataset: package:synth_{pipe}.csv")
    assert run(tmp_path, text, "fit") == 0
    r = {x["param"]: x for x in rows(tmp_path / "out" / f"fit_{pipe}.csv")}
    assert float(r[param]["estimate"]) == pytest.approx(truth, abs=tol)


def test_synth_then_fit_round_trip(tmp_path):
    text = bundled("synth_zeta.yaml")
    assert run(tmp_path, text, "synth") == 0
    out = tmp_path / "out"
    assert main(["fit", "--config", str(tmp_path / "c.yaml"), "--out", str(out),
                 "--dataset", str(out / "synth_zeta.csv")]) == 0


def test_fit_missing_dataset(tmp_path, capsys):
    assert run(tmp_path, bundled("synth_g.yaml"), "fit") == 2
    assert "dataset not found" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_corrupted_dataset_is_invalid(tmp_path, capsys):
    (tmp_path / "synth_g.csv").write_text("phi_ext,branch,freq_GHz,noise_sigma_GHz\n0.3,0,4.5,0.001\n0.3,0,x,0.001\n")
    assert run(tmp_path, bundled("synth_g.yaml"), "fit") == 2
    assert "line 3" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_invalid_config_writes_nothing(tmp_path, capsys):
    text = bundled("fixture.yaml").replace("N: 24", "N: -24")
    assert run(tmp_path, text, "modes") == 2
    err = capsys.readouterr().err
    assert "ring.N" in err and "line 4" in err
    assert not (tmp_path / "out").exists()


def test_missing_section_is_invalid(tmp_path):
    assert run(tmp_path, QUBITS, "zzsweep") == 2
    assert not (tmp_path / "out").exists()


def test_unusable_fit_exits_one(tmp_path):
    text = bundled("synth_zeta.yaml").replace("dataset: synth_zeta.csv",
                                              "dataset: package:synth_zeta.csv\n    init: {max_err: 1.0e-9}")
    assert run(tmp_path, text, "fit") == 1
    r = {x["param"]: x for x in rows(tmp_path / "out" / "fit_zeta.csv")}
    assert r["converged"]["estimate"] == "false"


@pytest.mark.parametrize("argv", [["modes"], ["nope", "--config", "x"], ["modes", "--config", "x", "--window", "6:5"]])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_bad_seed_and_parallel(tmp_path):
    assert run(tmp_path, bundled("synth_zeta.yaml"), "synth", "--seed", "-1") == 2
    assert run(tmp_path, bundled("synth_zeta.yaml"), "synth", "--parallel", "0") == 2
