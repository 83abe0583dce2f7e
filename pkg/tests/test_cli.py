import json
import subprocess
import sys

import numpy as np
import pytest

from parabolab.cli import main
from parabolab.grid import read_gf01


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_case_dump(tmp_path):
    assert run(tmp_path, "case", "--case", "cone", "--resolution", "33") == 0
    u = read_gf01(tmp_path / "u.gf")
    assert u.spec.cells_per_axis == 33
    rep = json.loads((tmp_path / "case.json").read_text())
    assert rep["schema"] == "parabolab/1"
    assert rep["in_class"] is False
    assert rep["manifest"]["config"]["case"] == "cone"


def test_contact_from_file(tmp_path):
    run(tmp_path, "case", "--case", "cone", "--resolution", "33")
    assert run(tmp_path, "contact", "--in", str(tmp_path / "u.gf"), "--kappa", "4",
               "--dir", "lower") == 0
    mask = read_gf01(tmp_path / "mask.gf")
    vals = mask.values[mask.spec.mask]
    assert set(np.unique(vals)) <= {0.0, 1.0}
    rep = json.loads((tmp_path / "contact.json").read_text())
    assert rep["nodes"] == int(vals.sum())
    assert rep["tol"] == pytest.approx(4 / 16**2)
    # the manifest records the grid read from the file
    assert rep["manifest"]["config"]["resolution"] == 33


def test_contact_vertex_ball(tmp_path):
    assert run(tmp_path, "contact", "--case", "bump", "--resolution", "33", "--kappa", "4",
               "--vertex-set", "ball", "0", "0", "0.5") == 0
    rep = json.loads((tmp_path / "contact.json").read_text())
    assert rep["vertex_set"] == "restricted"


def test_decay_csv(tmp_path):
    assert run(tmp_path, "decay", "--case", "radial_plaplace:1.5", "--t0", "1", "--M", "2",
               "--kmax", "8", "--resolution", "33") == 0
    lines = (tmp_path / "decay.csv").read_text().splitlines()
    assert lines[0] == "k,t_k,measure_lower,measure_upper,measure_both"
    assert len(lines) == 10
    assert lines[1].startswith("0,1.0,")
    rep = json.loads((tmp_path / "decay.json").read_text())
    assert "sigma" in rep


@pytest.mark.parametrize("argv", [
    ["envelope", "--case", "quadratic:1", "--epsilon", "0.5"],
    ["w2d", "--case", "bump"],
    ["density", "--case", "quadratic:1", "--balls", "20", "--step-balls", "1"],
    ["covering", "--balls", "40"],
    ["solve", "--p", "1.8"],
    ["solve", "--kind", "pucci", "--boundary-case", "quadratic:1", "--f", "2"],
])
def test_subcommands_run(tmp_path, argv):
    assert run(tmp_path, *argv, "--resolution", "33") == 0


def test_solve_reports_error_against_boundary_case(tmp_path):
    run(tmp_path, "solve", "--kind", "pucci", "--boundary-case", "quadratic:1", "--f", "2",
        "--resolution", "33", "--lam", "1", "--Lam", "2")
    rep = json.loads((tmp_path / "solve.json").read_text())
    assert rep["converged"]
    assert rep["max_error_vs_boundary_case"] < 1e-12


def test_deterministic_outputs(tmp_path, monkeypatch):
    # same flags, including the relative --out, must give identical bytes
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        monkeypatch.chdir(d)
        main(["decay", "--case", "bump", "--resolution", "33", "--out", "run"])
        main(["covering", "--resolution", "33", "--seed", "3", "--balls", "40", "--out", "run"])
    a, b = a / "run", b / "run"
    for name in ("decay.csv", "decay.json", "covering.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_non_finite_values_become_null(tmp_path):
    # an affine field saturates: sigma is infinite
    from parabolab import build_ball_grid, sample_function
    from parabolab.grid import write_gf01

    spec = build_ball_grid(2, 17)
    write_gf01(tmp_path / "flat.gf", sample_function(lambda x: np.zeros(len(x)), spec))
    assert run(tmp_path, "decay", "--in", str(tmp_path / "flat.gf")) == 0
    text = (tmp_path / "decay.json").read_text()
    assert "Infinity" not in text and "NaN" not in text


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["contact", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert run(tmp_path, "contact", "--in", str(tmp_path / "missing.gf"), "--kappa", "1") == 2
    assert run(tmp_path, "contact", "--case", "bump", "--kappa", "-1",
               "--resolution", "17") == 2
    assert run(tmp_path, "covering", "--E", "x.gf") == 2


def test_manifest_echo(capsys):
    assert main(["decay", "--case", "cone", "--manifest"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["schema"] == "parabolab/1"
    assert out["config"]["resolution"] == 129


def test_verify_subset(tmp_path):
    assert run(tmp_path, "verify", "--only", "1", "5", "--resolution", "65", "--quiet") == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["all_ok"] and [c["number"] for c in summary["criteria"]] == [1, 5]
    assert (tmp_path / "criterion_01.json").exists()
    assert "runtime_s" in (tmp_path / "timings.json").read_text()
    assert (tmp_path / "fields" / "case_cone.gf").exists()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "parabolab", "case", "--list"],
                         capture_output=True, text=True, check=True)
    assert "radial_plaplace" in out.stdout
