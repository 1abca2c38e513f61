import json

import numpy as np
import pytest

from wasslearn.cli import main
from wasslearn.spaces import EmpiricalDistribution, PointSet, save_dataset


@pytest.fixture
def data(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "a.csv"
    save_dataset(path, EmpiricalDistribution.uniform(PointSet(rng.uniform(-0.5, 0.5, (6, 2)), rng.uniform(-1, 1, 6))))
    return path


def _json(out, name):
    return json.loads((out / f"{name}.json").read_text())


def test_wass_identical_inputs(data, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["wass", "--p", "1", str(data), str(data), "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "0.0"
    assert _json(out, "wass")["result"]["wasserstein"] == 0.0


def test_worst_case_primal_equals_dual(data, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["worst-case", str(data), "--rho", "0.2", "--p", "2", "--out", str(out)]) == 0
    for row in _json(out, "worst-case")["result"]["hypotheses"]:
        assert row["gap"] <= 1e-9


def test_erm_commands(data, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["erm", str(data), "--out", str(out)]) == 0
    assert main(["minimax-erm", str(data), "--rho", "0", "--out", str(out)]) == 0
    res = _json(out, "minimax-erm")["result"]
    assert res["procedure"] == "minimax"
    assert res["winner"] == _json(out, "erm")["result"]["winner"]


def test_casebook_reports_analytic(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["casebook", "--alpha", "10", "--p", "1", "--n", "10", "--rho", "0.05", "--trials", "2000",
                 "--seed", "1", "--out", str(out)]) == 0
    row = _json(out, "casebook")["result"]["rows"][0]
    assert row["selection_probability"] == pytest.approx(0.5**10)
    assert (out / "casebook.csv").exists()


def test_bounds_sweep(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["bounds", "--kind", "corollary-network", "--d", "1", "--out", str(out)]) == 0
    assert _json(out, "bounds")["result"]["reports"][0]["C1"] == pytest.approx(1824.0)
    assert main(["bounds", "--kind", "theorem2", "--sweep-n", "10,40", "--out", str(out)]) == 0
    assert (out / "bounds.csv").read_text().count("\n") == 3


def test_verify_passes(tmp_path, capsys):
    assert main(["verify", "duality", "--seeds", "20", "--out", str(tmp_path)]) == 0
    assert "pass" in capsys.readouterr().out


def test_env_out_dir(data, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("WASSLEARN_OUT", str(tmp_path / "env"))
    assert main(["erm", str(data)]) == 0
    assert (tmp_path / "env" / "erm.json").exists()


def test_exit_codes(data, tmp_path, capsys):
    out = ["--out", str(tmp_path)]
    assert main(["bogus"]) == 1
    assert main(["minimax-erm", str(data), "--lambda-grid", "a,b"] + out) == 1
    assert main(["minimax-erm", str(data), "--candidates", "weird"] + out) == 1
    assert main(["erm", str(tmp_path / "missing.csv")] + out) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("0.1,0.2\n0.3\n")
    assert main(["erm", str(bad)] + out) == 2
    assert main(["worst-case", str(data), "--rho", "-1"] + out) == 1
    ini = tmp_path / "s.ini"
    ini.write_text("[scenario]\nunknown = 1\n")
    assert main(["adapt", "--config", str(ini)] + out) == 2
