import csv
import hashlib
import json
import subprocess
import sys

import pytest

from fieldqc import cli
from fieldqc.homogenized import build_model, green_u


def run(tmp_path, *argv, out="out"):
    d = tmp_path / out
    code = cli.main(["--out", str(d), *argv])
    return code, d


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_greens_three_rows(tmp_path):
    code, d = run(tmp_path, "greens", "--lambda", "0.1666667", "--alpha", "0.1629", "--gamma", "0.9449",
                  "--r-list", "1,5,10")
    assert code == 0
    rows = list(csv.reader((d / "greens.csv").open()))
    assert rows[0] == ["r", "E_u", "E_phi"] and len(rows) == 4
    m = build_model(0.1666667, 0.1629, 0.9449)
    assert float(rows[2][1]) == green_u(m, 5.0)
    head = json.loads((d / "greens.json").read_text())
    assert head["regime"] == "Case1" and set(head) >= {"k_plus", "k_minus", "l0", "l1"}


def test_manifest_hashes_outputs(tmp_path):
    code, d = run(tmp_path, "greens", "--r-list", "2")
    mf = manifest(d)
    assert mf["status"] == "ok" and mf["exit_code"] == 0
    for name, digest in mf["outputs"].items():
        assert hashlib.sha256((d / name).read_bytes()).hexdigest() == digest
    assert "numpy" in mf["versions"] and "timestamp" not in json.dumps(mf)


def test_paper_figure(tmp_path):
    code, d = run(tmp_path, "paper-figure")
    assert code == 0
    mf = manifest(d)
    assert mf["inputs"]["alpha"] == 0.1629
    rows = list(csv.reader((d / "paper_figure.csv").open()))
    assert rows[0] == ["R0_bohr", "R0_over_a0", "E_es_hartree", "rel_error"] and len(rows) == 41
    svg = (d / "paper_figure.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg
    info = json.loads((d / "paper_figure.json").read_text())
    assert set(info) >= {"E_inf", "R0_at_1pct", "k_plus", "k_minus"}


def test_determinism_and_manifest_rerun(tmp_path):
    _, a = run(tmp_path, "defect", "sweep", "--points", "12", out="a")
    _, b = run(tmp_path, "defect", "sweep", "--points", "12", out="b")
    for name in ("sweep.csv", "sweep.json", "sweep.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    code, c = run(tmp_path, "--config", str(a / "manifest.json"), out="c")
    assert code == 0
    assert (c / "sweep.csv").read_bytes() == (a / "sweep.csv").read_bytes()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mu": 1, "kappa": 1, "sigma0": 1, "rho": 1, "r0": 1, "R0": 2}))
    code, d = run(tmp_path, "--config", str(cfg), "elastic")
    res = json.loads((d / "elastic.json").read_text())
    assert res["theta1"] == pytest.approx(-0.125) and res["E_el"] == pytest.approx(-0.1875)
    code, d = run(tmp_path, "--config", str(cfg), "elastic", "--R0", "4", out="o2")
    assert json.loads((d / "elastic.json").read_text())["rel_error"] == pytest.approx(1 / 64)


def test_format_subset(tmp_path):
    code, d = run(tmp_path, "--format", "csv", "defect", "sweep", "--points", "3")
    assert code == 0
    assert (d / "sweep.csv").exists() and not (d / "sweep.json").exists() and not (d / "sweep.svg").exists()
    assert cli.main(["--out", str(tmp_path / "x"), "--format", "png", "greens"]) == 2


def test_unitcell_solve_with_dump(tmp_path):
    code, d = run(tmp_path, "unitcell", "solve", "--mode", "uniform-background", "--N", "16", "--Z", "4",
                  "--dump-fields")
    assert code == 0
    s = json.loads((d / "unitcell.json").read_text())
    assert s["N"] == 16 and s["alpha"] == pytest.approx(0.19474579822405913, rel=1e-12)
    assert "fields_u.bin" in manifest(d)["outputs"]


def test_unitcell_config_layout(tmp_path):
    cfg = tmp_path / "uc.json"
    cfg.write_text(json.dumps({"lattice": {"a0_bohr": 7.5, "type": "fcc"}, "Z": 4, "N": 16,
                               "mode": "uniform-background", "lambda": 0.2}))
    code, d = run(tmp_path, "--config", str(cfg), "unitcell", "solve")
    assert code == 0 and manifest(d)["inputs"]["lambda"] == 0.2


def test_kernel_fit(tmp_path):
    samples = tmp_path / "k.csv"
    ks = [i * 0.125 for i in range(40)]
    samples.write_text("k,Khat\n" + "".join(f"{k!r},{2 * k * k / (k * k + 3)!r}\n" for k in ks))
    code, d = run(tmp_path, "kernel", "fit", "--samples", str(samples), "--m", "1")
    res = json.loads((d / "kernel_fit.json").read_text())
    assert code == 0 and res["residual"] < 1e-12
    assert res["pairs"][0]["P_re"] == pytest.approx(2.0) and res["pairs"][0]["Q_re"] == pytest.approx(3.0)


def test_defect_energy_with_elastic_part(tmp_path):
    code, d = run(tmp_path, "defect", "energy", "--R0", "22.5", "--mu", "0.01", "--kappa", "0.03",
                  "--sigma0", "0.1")
    res = json.loads((d / "defect_energy.json").read_text())
    assert code == 0
    assert res["total"]["E_d"] == pytest.approx(res["E_es"] + res["total"]["E_el"])
    assert run(tmp_path, "defect", "energy", "--mu", "1", out="bad")[0] == 2


@pytest.mark.parametrize("argv, status", [
    (["defect", "sweep", "--gamma", "-1"], 4),
    (["elastic", "--mu", "1"], 2),
    (["defect", "energy", "--r0", "5", "--R0", "4"], 2),
    (["unitcell", "solve", "--N", "32", "--sigma-nuc", "0.1"], 2),
])
def test_error_exit_codes(tmp_path, argv, status):
    code, d = run(tmp_path, *argv)
    assert code == status
    if (d / "manifest.json").exists():
        mf = manifest(d)
        assert mf["status"] == "error" and mf["exit_code"] == status and mf["error"]["message"]


def test_convergence_failure_writes_manifest(tmp_path, monkeypatch):
    from fieldqc import unitcell
    real = unitcell.solve_unit_cell
    monkeypatch.setattr(unitcell, "timed_solve", lambda spec, **kw: (real(spec, max_iter=1), 0.0))
    code, d = run(tmp_path, "unitcell", "solve", "--N", "32", "--sigma-nuc", "0.75", "--Z", "4")
    assert code == 3
    assert manifest(d)["error"]["type"] == "ConvergenceError"


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["bogus"])
    assert e.value.code == 2
    assert cli.main([]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fieldqc", "--out", str(tmp_path / "m"), "greens", "--r-list", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "greens.csv" in r.stdout
