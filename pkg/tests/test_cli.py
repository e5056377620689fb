import json
import subprocess
import sys

import numpy as np
import pytest

from patchhopf import charroots, dde, equilibrium, network, spectral
from patchhopf.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_validate(capsys):
    code, out, _ = run(["validate", "--net", "paper9"], capsys)
    assert code == 0
    assert out.splitlines() == ["ok,n,delta,edges", "True,9,128,12"]


def test_invalid_network_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 3, "m": [1, 1, 1], "edges": [[1, 2, 1.0]]}))
    code, _, err = run(["validate", "--net", str(bad)], capsys)
    assert code == 1
    assert err.startswith("error: invalid-network-connectivity: ")
    assert len(err.strip().splitlines()) == 1


def test_missing_file(capsys):
    code, _, err = run(["validate", "--net", "/nonexistent/net.json"], capsys)
    assert code == 1 and err.startswith("error: io: ")


def test_lambda_star_paper_is_domain_error(capsys):
    code, out, err = run(["lambda-star", "--net", "paper9"], capsys)
    assert code == 1 and out == ""
    assert err.startswith("error: delta-nonnegative")


def test_lambda_star_two_patch(tmp_path, capsys):
    path = tmp_path / "two.json"
    network.save(network.build_from_edges(2, [(1, 2, 1.0)], [1.0, -2.0]), path)
    code, out, _ = run(["lambda-star", "--net", str(path), "--format", "json"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["lambda_star"] == pytest.approx(0.5, abs=1e-10)
    assert obj["d_star"] == pytest.approx(2.0, abs=1e-10)
    code, _, err = run(["equilibrium", "--net", str(path), "--d", "3"], capsys)
    assert code == 1 and err.startswith("error: extinction-regime")


@pytest.mark.parametrize(
    "argv",
    [
        ["hopf"],
        ["simulate", "--d", "0.5"],
        ["hopf", "--d", "1", "--format", "xml"],
        ["nonsense"],
        [],
        ["simulate", "--d", "0.5", "--r", "0.1", "--steps-per-delay", "5"],
        ["equilibrium-sweep", "--d-min", "5", "--d-max", "1"],
        ["reproduce-fig", "4"],
    ],
)
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err.startswith("error: usage: ")


def test_hopf_large_d(capsys):
    code, out, _ = run(["hopf", "--net", "paper9", "--d", "1000"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "d,branch,theta,nu,r,l,transversal"
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert abs(float(row["r"]) - 0.1104) < 5e-4
    assert float(row["theta"]) > 0 and float(row["nu"]) > 0


def _same(tmp_path, argv, write):
    cli_path = tmp_path / "cli.out"
    lib_path = tmp_path / "lib.out"
    assert main(argv + ["--out", str(cli_path)]) == 0
    write(lib_path)
    assert cli_path.read_bytes() == lib_path.read_bytes()


def test_byte_identical_outputs(tmp_path, paper9):
    _same(tmp_path, ["equilibrium", "--d", "0.5"],
          lambda p: equilibrium.write_branch_csv([equilibrium.equilibrium(paper9, 0.5)], p))
    grid = np.geomspace(1e-2, 1e2, 7)
    _same(tmp_path, ["equilibrium-sweep", "--d-min", "1e-2", "--d-max", "1e2", "--d-steps", "7"],
          lambda p: equilibrium.write_branch_csv(equilibrium.branch_sweep(paper9, grid), p))
    _same(tmp_path, ["hopf", "--d", "0.01"],
          lambda p: charroots.write_hopf_csv(charroots.hopf_scan(paper9, 0.01), p))
    _same(tmp_path, ["spectral", "--lambda-max", "3", "--lambda-steps", "11"],
          lambda p: spectral.write_spectral_csv(spectral.spectral_curve(paper9, np.linspace(0, 3, 11)), p))
    _same(tmp_path, ["simulate", "--d", "0.5", "--r", "0.087", "--t-end", "2"],
          lambda p: dde.write_trajectory_csv(dde.simulate(paper9, 0.5, 0.087, t_end=2.0), p))
    _same(tmp_path, ["simulate", "--d", "0.5", "--r", "0.087", "--t-end", "2", "--pattern"],
          lambda p: dde.pattern_export(dde.simulate(paper9, 0.5, 0.087, t_end=2.0), p))
    grid = np.geomspace(1e-3, 1e-2, 3)
    _same(tmp_path, ["hopf-sweep", "--d-min", "1e-3", "--d-max", "1e-2", "--d-steps", "3", "--format", "json"],
          lambda p: charroots.write_curves_json(charroots.hopf_curves_sweep(paper9, grid), p))
    _same(tmp_path, ["reproduce-fig", "1"], lambda p: network.save(paper9, p))
    _same(tmp_path, ["reproduce-fig", "2L"],
          lambda p: dde.write_trajectory_csv(dde.simulate(paper9, 0.5, 0.087, t_end=50.0), p))


def test_history_file(tmp_path, paper9):
    hist = tmp_path / "h.txt"
    ue = equilibrium.equilibrium(paper9, 0.5).u
    hist.write_text(" ".join(repr(float(x)) for x in ue))
    out = tmp_path / "o.csv"
    assert main(["simulate", "--d", "0.5", "--r", "0.05", "--t-end", "1",
                 "--history-file", str(hist), "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1:] - ue)) < 1e-10


def test_json_floats_round_trip(capsys):
    code, out, _ = run(["equilibrium", "--d", "0.5", "--format", "json"], capsys)
    assert code == 0
    u = np.array(json.loads(out)[0]["u"])
    np.testing.assert_array_equal(u, equilibrium.equilibrium(network.paper_network_9(), 0.5).u)


def test_verdict_period_transversality(capsys):
    code, out, _ = run(["verdict", "--d", "0.5", "--r", "0.087", "--t-end", "60"], capsys)
    assert code == 0 and out.splitlines()[1].endswith("oscillates")
    code, out, _ = run(["period", "--d", "0.5", "--r", "0.087", "--t-end", "100", "--format", "json"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["n_peaks"] >= 3 and 0 < obj["peak_spacing_cv"] < 0.05
    code, out, _ = run(["transversality", "--d", "0.5", "--format", "json"], capsys)
    assert code == 0 and json.loads(out)["transversal"] == "positive"


def test_period_insufficient_oscillation(capsys):
    code, _, err = run(["period", "--d", "0.5", "--r", "0.01", "--t-end", "5"], capsys)
    assert code == 1 and err.startswith("error: insufficient-oscillation")


def test_probe_seed(capsys):
    _, a, _ = run(["probe", "--seed", "3"], capsys)
    _, b, _ = run(["probe", "--seed", "3"], capsys)
    _, c, _ = run(["probe", "--seed", "4"], capsys)
    assert a == b and a != c
    rows = [line.split(",") for line in a.splitlines()[1:]]
    for row in rows:
        assert float(row[3]) == pytest.approx(float(row[4]), rel=1e-5)


def test_grid_pattern_figure(tmp_path):
    mfile = tmp_path / "m.json"
    rng = np.random.default_rng(0)
    mfile.write_text(json.dumps(list(rng.uniform(1, 3, 16))))
    out = tmp_path / "pat.csv"
    assert main(["reproduce-fig", "4", "--net", "grid:4x4:1.0", "--m-file", str(mfile),
                 "--t-end", "5", "--out", str(out)]) == 0
    mat = dde.read_pattern(out)
    assert mat.shape[1] == 16


def test_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "patchhopf.cli", "lambda-star", "--net", "paper9"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert proc.stderr.startswith("error: delta-nonnegative")
    proc = subprocess.run([sys.executable, "-m", "patchhopf.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "reproduce-fig" in proc.stdout
