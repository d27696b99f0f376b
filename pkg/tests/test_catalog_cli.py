import json

import numpy as np
import pytest

from causalkit import catalog
from causalkit.cli import main
from causalkit.curves import read_curve
from causalkit.errors import ScenarioError
from causalkit.scenario import (EXIT_ERROR, EXIT_FAIL, EXIT_PASS, OUT_ENV, ConfigError, load_scenario,
                                parse_scenario, run_scenario)

TAU = """\
[scenario]
spacetime = minkowski2d
operation = tau
seed = 1

[operation]
p = 0, 0
q = 2, 1
segments = 8
restarts = 2
"""


def test_catalog_entries():
    names = catalog.names()
    for want in ("minkowski2d", "minkowski3d", "ctc_cylinder", "causal_cylinder", "punctured_minkowski",
                 "slit_minkowski", "bubble_metric", "conformal_scaled"):
        assert want in names
    for name in names:
        d = catalog.get(name).describe()
        json.dumps(d)
        assert d["facts"] and all(f["source"] in ("closed-form", "static", "grid-oracle") for f in d["facts"])


def test_catalog_parameters_validated():
    st = catalog.get("bubble_metric", {"alpha": 0.3})
    assert st.parameters["alpha"] == 0.3
    with pytest.raises(ScenarioError):
        catalog.get("bubble_metric", {"alpha": 1.5})
    with pytest.raises(ScenarioError):
        catalog.get("bubble_metric", {"colour": 1.0})
    with pytest.raises(ScenarioError):
        catalog.get("no_such_spacetime")


def test_parse_and_run_tau(tmp_path):
    sc = parse_scenario(TAU)
    assert sc.operation == "tau" and sc.seed == 1 and np.allclose(sc.vector("q"), [2, 1])
    sc.output = str(tmp_path)
    res = run_scenario(sc)
    assert res.status == EXIT_PASS
    assert res.summary["tau"] == pytest.approx(np.sqrt(3), abs=1e-9)
    assert json.loads((tmp_path / "summary.json").read_text())["tau"] == res.summary["tau"]
    assert np.allclose(read_curve(tmp_path / "tau_curve.txt").end, [2, 1])


@pytest.mark.parametrize("text,line,column", [
    (TAU.replace("operation = tau", "operation = teleport"), 3, 13),
    (TAU.replace("seed = 1", "seed = one"), 4, 8),
    (TAU + "this line is broken\n", 11, 1),
    (TAU.replace("spacetime = minkowski2d", "spacetime = nowhere"), 2, 13),
])
def test_config_errors_carry_positions(text, line, column):
    with pytest.raises(ConfigError) as err:
        parse_scenario(text)
    assert (err.value.line, err.value.column) == (line, column)
    assert str(err.value).startswith(f"line {line}")


def test_bad_option_value_position(tmp_path):
    sc = parse_scenario(TAU.replace("q = 2, 1", "q = 2, x"))
    with pytest.raises(ConfigError) as err:
        sc.vector("q")
    assert err.value.line == 8


def test_missing_scenario_section():
    with pytest.raises(ConfigError):
        parse_scenario("[operation]\np = 0, 0\n")


def test_load_scenario_checks_parameters(tmp_path):
    path = tmp_path / "s.ini"
    path.write_text(TAU.replace("minkowski2d", "bubble_metric") + "\n[parameters]\nalpha = 2\n")
    with pytest.raises(ScenarioError):
        load_scenario(path)
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.ini")


def test_runs_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert main(["reach", "bubble_metric", "--p=-0.5,0", "--resolution", "33", "--out", str(d)]) == 0
        outs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())})
    assert outs[0] == outs[1] and "reach.txt" in outs[0]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["tau", "minkowski2d", "--p", "0,0", "--q", "2,1", "--segments", "8",
                 "--out", str(tmp_path / "a")]) == EXIT_PASS
    assert main(["tau", "minkowski2d", "--p", "0,0", "--q", "0.2,1", "--out", str(tmp_path / "b")]) == EXIT_FAIL
    assert main(["diagnose", "ctc_cylinder", "--resolution", "32", "--trials", "10",
                 "--out", str(tmp_path / "c")]) == EXIT_FAIL
    assert any(f.name.startswith("witness") for f in (tmp_path / "c").iterdir())
    assert main(["tau", "atlantis", "--p", "0,0", "--q", "1,0"]) == EXIT_ERROR
    assert "unknown" in capsys.readouterr().err


def test_cli_catalog_json(capsys):
    assert main(["catalog", "--json"]) == 0
    rows = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert len(rows) == len(catalog.names())


def test_env_out_and_run_subcommand(tmp_path, monkeypatch):
    path = tmp_path / "s.ini"
    path.write_text(TAU)
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["run", str(path)]) == EXIT_PASS
    assert (tmp_path / "env" / "summary.json").exists()
    assert main(["run", str(path), "--out", str(tmp_path / "flag")]) == EXIT_PASS
    assert (tmp_path / "flag" / "tau_curve.txt").exists()


@pytest.mark.parametrize("argv,artifact", [
    (["widen", "minkowski2d", "--deltas", "0.2,0.1,0.05,0.025", "--samples", "5"], "widened_metric.csv"),
    (["develop", "minkowski2d", "--lo", "0,-1", "--hi", "0,1", "--resolution", "33"], "development.txt"),
    (["limit", "minkowski2d", "--p", "0,0", "--q", "2,0", "--kmax", "16", "--amplitude", "null",
      "--tol", "0.1"], "limit.jsonl"),
    (["diamond", "minkowski2d", "--p", "0,0", "--q", "1,0", "--resolution", "33"], "diamond.txt"),
])
def test_other_operations(tmp_path, argv, artifact):
    out = tmp_path / "o"
    assert main(argv + ["--out", str(out)]) == EXIT_PASS
    assert (out / artifact).exists() and (out / "summary.json").exists()


def test_shipped_scenarios_load():
    from pathlib import Path
    files = sorted((Path(__file__).parents[1] / "scenarios").glob("*.ini"))
    assert files
    for f in files:
        load_scenario(f)
