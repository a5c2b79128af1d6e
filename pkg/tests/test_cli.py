import json

import pytest

from steinbounds import cli
from steinbounds.verify import ScenarioResult


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_kernel_command(tmp_path, capsys):
    out = tmp_path / "k.json"
    code = cli.main(["kernel", "--dist", "beta:4,8", "--route", "pearson",
                     "--x", "0.5", "--out", str(out)])
    assert code == 0
    payload = read_json(out)
    assert payload["schema_version"] == 1
    assert payload["command"] == "kernel"
    # tau(1/2) = (1/2)(1/2)/12
    assert payload["results"]["tau"][0] == pytest.approx(0.25 / 12.0,
                                                         rel=1e-12)
    assert payload["results"]["mean_tau"] == pytest.approx(
        payload["results"]["variance"], abs=1e-8)
    assert "0.02083" in capsys.readouterr().out


def test_kernel_bad_distribution():
    assert cli.main(["kernel", "--dist", "nonesuch:1", "--route",
                     "pearson", "--x", "0.5"]) == 2


def test_kernel_pearson_unsupported_family():
    assert cli.main(["kernel", "--dist", "two-point:1,1", "--route",
                     "pearson", "--x", "0.0"]) == 2


def test_bound_cacoullos_json(tmp_path):
    out = tmp_path / "b.json"
    code = cli.main(["bound", "--dist", "normal:0,1", "--g", "x",
                     "--method", "cacoullos", "--n-mc", "10000",
                     "--out", str(out)])
    assert code == 0
    rep = read_json(out)["results"]
    assert rep["lower"] == pytest.approx(1.0, abs=1e-5)
    assert rep["upper"] == pytest.approx(1.0, abs=1e-5)


def test_bound_requires_exactly_one_g():
    assert cli.main(["bound", "--dist", "normal:0,1",
                     "--method", "cacoullos"]) == 2
    assert cli.main(["bound", "--dist", "normal:0,1", "--g", "x",
                     "--g-named", "sin", "--method", "cacoullos"]) == 2


def test_bound_not_centered_is_withheld_exit():
    # the zero-bias transform needs a centered law
    assert cli.main(["bound", "--dist", "exp:1", "--g", "x",
                     "--method", "convex", "--n-mc", "10000"]) == 3


def test_bound_withheld_hypothesis(tmp_path):
    # non-convex g'^2 withholds the convex-order upper bound
    out = tmp_path / "w.json"
    code = cli.main(["bound", "--dist", "two-point:1,1", "--g", "sin(x)",
                     "--method", "convex", "--n-mc", "10000",
                     "--out", str(out)])
    assert code == 3
    rep = read_json(out)["results"]
    assert rep["upper"] is None


def test_bound_csv(tmp_path):
    out = tmp_path / "b.csv"
    code = cli.main(["bound", "--dist", "normal:0,1", "--g", "sin(x)",
                     "--method", "cacoullos", "--n-mc", "10000",
                     "--format", "csv", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0].split(",")[:3] == ["method", "lower", "upper"]
    assert lines[1].startswith("cacoullos,")


def test_posterior_command(tmp_path, capsys):
    out = tmp_path / "p.json"
    code = cli.main(["posterior", "--pair", "binomial-beta", "--alpha", "1",
                     "--beta", "1", "--n", "10", "--x", "3", "--g", "x",
                     "--n-mc", "10000", "--out", str(out)])
    assert code == 0
    payload = read_json(out)
    model = payload["results"]["model"]
    assert model["posterior"]["params"] == [4.0, 8.0]
    b = payload["results"]["bounds"]
    assert b["upper"] == pytest.approx(32.0 / (144.0 * 13.0), rel=1e-9)


def test_posterior_pareto_note(capsys):
    code = cli.main(["posterior", "--pair", "uniform-pareto", "--alpha", "3",
                     "--beta", "1", "--n", "5", "--max", "2", "--g", "x",
                     "--n-mc", "10000"])
    assert code == 0
    assert "nonnegative form" in capsys.readouterr().out


def test_posterior_invalid_summary():
    assert cli.main(["posterior", "--pair", "binomial-beta", "--alpha", "1",
                     "--beta", "1", "--n", "5", "--x", "7", "--g", "x"]) == 2


def test_verify_unknown_scenario():
    assert cli.main(["verify", "nonesuch"]) == 2


def test_verify_single_scenario(tmp_path):
    out = tmp_path / "v.json"
    code = cli.main(["verify", "two-point-cx", "--seed", "11",
                     "--out", str(out)])
    assert code == 0
    payload = read_json(out)
    assert payload["results"]["all_passed"] is True
    assert payload["results"]["scenarios"][0]["scenario"] == "two-point-cx"


def test_verify_assertion_failure_exit(monkeypatch):
    def failing(scenario_id, params=None, seed=42):
        res = ScenarioResult(scenario=scenario_id, inputs={})
        res.check("always-fails", 1.0, 0.0, 0.1)
        return res

    monkeypatch.setattr(cli.verify_mod, "run_scenario", failing)
    assert cli.main(["verify", "two-point-cx"]) == 5


def test_seed_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("STEIN_BOUNDS_SEED", "123")
    out = tmp_path / "s.json"
    code = cli.main(["bound", "--dist", "normal:0,1", "--g", "x",
                     "--method", "cacoullos", "--n-mc", "10000",
                     "--out", str(out)])
    assert code == 0
    assert read_json(out)["seed"] == 123
    monkeypatch.setenv("STEIN_BOUNDS_SEED", "notanint")
    assert cli.main(["bound", "--dist", "normal:0,1", "--g", "x",
                     "--method", "cacoullos", "--n-mc", "10000"]) == 2


def test_bound_only_promised_sides_printed(capsys):
    code = cli.main(["bound", "--dist", "uniform:0,2", "--g", "x",
                     "--method", "equilibrium-a", "--n-mc", "10000"])
    assert code == 0
    text = capsys.readouterr().out
    assert "upper" in text
    assert "lower" not in text
