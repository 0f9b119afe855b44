import csv
import io
import json

import numpy as np
import pytest

from aaqst import fileio, fixtures
from aaqst.cli import main
from aaqst.densmat import fidelity


def _plan_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def liquid_files(tmp_path):
    sys, lay = fixtures.LIQUID.load()
    fileio.write_system(sys, lay, tmp_path / "system.json")
    fileio.write_state(fixtures.thermal_state(2), tmp_path / "rho1.json")
    return tmp_path


@pytest.fixture
def oriented_files(tmp_path):
    sys, lay = fixtures.ORIENTED.load()
    fileio.write_system(sys, lay, tmp_path / "system.json")
    fileio.write_state(fixtures.thermal_state(3), tmp_path / "rho1.json")
    return tmp_path


def _delays(sc):
    return [str(t) for t in sc.delays]


def test_plan_single(capsys):
    assert main(["plan", "--input", "2", "--ancilla", "1"]) == 0
    (row,) = _plan_rows(capsys.readouterr().out)
    assert row["K_min"] == "1"
    assert main(["plan", "--input", "3", "--ancilla", "0"]) == 0
    (row,) = _plan_rows(capsys.readouterr().out)
    assert row["K_min"] == "3"


def test_plan_sweep_monotone_in_ancilla(capsys, tmp_path):
    assert main(["plan", "--sweep", "1..6", "--out", str(tmp_path)]) == 0
    rows = _plan_rows(capsys.readouterr().out)
    assert len(rows) == 6 * 7
    for n in range(1, 7):
        ks = [int(r["K_min"]) for r in rows if int(r["n_input"]) == n]
        assert ks == sorted(ks, reverse=True)
    assert (tmp_path / "plan.csv").exists()


def test_plan_with_system_verifies_rank(capsys, liquid_files):
    assert main(["plan", "--input", "2", "--ancilla", "1", "--system", str(liquid_files / "system.json"),
                 "--generations", "15"]) == 0
    (row,) = _plan_rows(capsys.readouterr().out)
    assert row["rank_verified"] == "true" and row["K_min"] == "1"


def test_optimize_writes_outputs_and_is_reproducible(liquid_files, capsys):
    args = ["optimize", "--system", str(liquid_files / "system.json"), "--seed", "11", "--generations", "10"]
    assert main(args + ["--out", str(liquid_files / "a")]) == 0
    assert main(args + ["--out", str(liquid_files / "b")]) == 0
    a = (liquid_files / "a" / "sequence.json").read_bytes()
    assert a == (liquid_files / "b" / "sequence.json").read_bytes()
    seq = json.loads(a)
    assert seq["seed"] == 11 and len(seq["params_s"]) == 2 and "sha256_system" in seq
    report = json.loads((liquid_files / "a" / "conditioning.json").read_text())
    assert report["rank"] == 15 and report["condition"] == pytest.approx(seq["condition"])
    log = (liquid_files / "a" / "convergence.csv").read_text().splitlines()
    assert "generation,best_condition,mean_condition" in log


def test_optimize_collapsed_bounds_echo(liquid_files):
    out = liquid_files / "o"
    assert main(["optimize", "--system", str(liquid_files / "system.json"), "--bounds-ms", "7", "7",
                 "--generations", "3", "--out", str(out)]) == 0
    seq = json.loads((out / "sequence.json").read_text())
    assert seq["params_s"] == [pytest.approx(7e-3)] * 2


def test_simulate_identity_gives_zero_peaks(liquid_files):
    (liquid_files / "id.json").write_text("[]")
    out = liquid_files / "s"
    assert main(["simulate", "--system", str(liquid_files / "system.json"), "--state", str(liquid_files / "rho1.json"),
                 "--sequences", str(liquid_files / "id.json"), "--out", str(out)]) == 0
    peaks = fileio.read_peaks(out / "peaks_k0.csv")
    assert len(peaks) == 12
    np.testing.assert_array_equal(peaks.intensity, 0)
    assert (out / "trace_k0.csv").exists() and (out / "prepared_state.json").exists()


def test_simulate_noise_is_deterministic(liquid_files):
    base = ["simulate", "--system", str(liquid_files / "system.json"), "--state", str(liquid_files / "rho1.json"),
            "--template", "two_delay_xy", "--params", *_delays(fixtures.LIQUID), "--noise", "0.01"]
    for name, seed in (("a", "7"), ("b", "7"), ("c", "8")):
        assert main(base + ["--seed", seed, "--out", str(liquid_files / name)]) == 0
    a, b, c = ((liquid_files / n / "peaks_k0.csv").read_text() for n in "abc")
    assert a == b and a != c


def test_liquid_pipeline(liquid_files, capsys):
    sim, rec = liquid_files / "sim", liquid_files / "rec"
    params = ["--template", "two_delay_xy", "--params", *_delays(fixtures.LIQUID)]
    assert main(["simulate", "--system", str(liquid_files / "system.json"), "--state",
                 str(liquid_files / "rho1.json"), *params, "--out", str(sim)]) == 0
    assert main(["tomo", "--system", str(liquid_files / "system.json"), *params, "--peaks", str(sim / "peaks_k0.csv"),
                 "--reference", str(liquid_files / "rho1.json"), "--dump-matrix", "--out", str(rec)]) == 0
    result = json.loads((rec / "result.json").read_text())
    assert result["report"]["fidelity"] >= 0.999
    assert fidelity(fileio.read_state(rec / "result.json"), fixtures.thermal_state(2)) > 1 - 1e-6
    matrix = (rec / "constraint_matrix.csv").read_text().splitlines()
    assert sum(1 for ln in matrix if ln.startswith("k0:")) == 24


def test_liquid_pipeline_from_traces(liquid_files):
    sim, rec = liquid_files / "sim", liquid_files / "rec"
    params = ["--template", "two_delay_xy", "--params", *_delays(fixtures.LIQUID)]
    assert main(["simulate", "--system", str(liquid_files / "system.json"), "--state",
                 str(liquid_files / "rho1.json"), "--prep", "pi4_pi4", *params, "--out", str(sim)]) == 0
    assert main(["tomo", "--system", str(liquid_files / "system.json"), *params, "--traces", str(sim / "trace_k0.csv"),
                 "--reference", str(sim / "prepared_state.json"), "--out", str(rec)]) == 0
    assert json.loads((rec / "result.json").read_text())["report"]["fidelity"] >= 0.999


def test_oriented_pipeline_via_config(oriented_files):
    cfg = {"system": "system.json", "state": "rho1.json", "prep": "U0", "template": "two_delay_xx",
           "params": list(fixtures.ORIENTED.delays), "out": str(oriented_files / "sim")}
    (oriented_files / "sim.json").write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(oriented_files / "sim.json")]) == 0
    cfg.update(peaks=["sim/peaks_k0.csv"], reference="sim/prepared_state.json", out=str(oriented_files / "rec"))
    (oriented_files / "tomo.json").write_text(json.dumps(cfg))
    assert main(["tomo", "--config", str(oriented_files / "tomo.json")]) == 0
    report = json.loads((oriented_files / "rec" / "result.json").read_text())["report"]
    assert report["fidelity"] >= 0.999 and report["rank"] == 63


def test_truncated_peaks_exit_2_names_rows(liquid_files, capsys):
    sim = liquid_files / "sim"
    params = ["--template", "two_delay_xy", "--params", *_delays(fixtures.LIQUID)]
    main(["simulate", "--system", str(liquid_files / "system.json"), "--state", str(liquid_files / "rho1.json"),
          *params, "--out", str(sim)])
    p = sim / "peaks_k0.csv"
    p.write_text("\n".join(p.read_text().splitlines()[:-1]) + "\n")
    capsys.readouterr()
    code = main(["tomo", "--system", str(liquid_files / "system.json"), *params, "--peaks", str(p)])
    assert code == 2
    assert "(3, 3)" in capsys.readouterr().err


def test_identifiability_exit_3(liquid_files, capsys):
    (liquid_files / "id.json").write_text("[]")
    sim = liquid_files / "sim"
    seq = ["--sequences", str(liquid_files / "id.json")]
    main(["simulate", "--system", str(liquid_files / "system.json"), "--state", str(liquid_files / "rho1.json"),
          *seq, "--out", str(sim)])
    code = main(["tomo", "--system", str(liquid_files / "system.json"), *seq, "--peaks", str(sim / "peaks_k0.csv")])
    assert code == 3
    assert "null space" in capsys.readouterr().err


def test_missing_option_exit_2(capsys):
    assert main(["simulate"]) == 2
    assert "system" in capsys.readouterr().err


def test_fidelity_command(tmp_path, capsys):
    fileio.write_state(fixtures.thermal_state(2), tmp_path / "a.json")
    fileio.write_state(3 * fixtures.thermal_state(2), tmp_path / "b.json")
    assert main(["fidelity", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.0)


def test_fit_peaks_command(liquid_files):
    sim = liquid_files / "sim"
    main(["simulate", "--system", str(liquid_files / "system.json"), "--state", str(liquid_files / "rho1.json"),
          "--prep", "pi4_pi4", "--sequences", str(_write_identity(liquid_files)), "--out", str(sim)])
    assert main(["fit-peaks", "--system", str(liquid_files / "system.json"), "--trace", str(sim / "trace_k0.csv"),
                 "--out", str(liquid_files / "fit")]) == 0
    fitted = fileio.read_peaks(liquid_files / "fit" / "peaks.csv")
    truth = fileio.read_peaks(sim / "peaks_k0.csv")
    np.testing.assert_allclose(fitted.intensity, truth.intensity, atol=1e-6)


def _write_identity(d):
    p = d / "id.json"
    p.write_text("[]")
    return p
