import json
import re

import numpy as np
import pytest

from conftest import read_trace_csv
from optcon import scenarios
from optcon.cli import main
from optcon.scenarios import ScenarioFileError


def scaffold(tmp_path, n):
    path = tmp_path / f"example{n}.json"
    assert main(["scaffold", str(n), str(path)]) == 0
    return path


def edit(path, fn):
    d = json.loads(path.read_text())
    fn(d)
    path.write_text(json.dumps(d))
    return path


def test_scaffold_contents(tmp_path):
    d1 = json.loads(scaffold(tmp_path, 1).read_text())
    assert [x[0] for x in d1["init"]["x"]] == [-3, -2, 0, -1, 1, 4, 2, 5]
    assert d1["eps"] == 1.0
    assert d1["nussbaum"] == "theta_sq_sin"
    d2 = json.loads(scaffold(tmp_path, 2).read_text())
    assert d2["eps"] == 0.5
    assert d2["k"] == [[], [1.0], [1.0, 2.0], [1.0, 3.0, 3.0]] * 2
    assert d2["mode"] == "online"
    assert d2["events"][0]["amplitude"] == 10.0


def test_scaffold_unknown(tmp_path, capsys):
    assert main(["scaffold", "3", str(tmp_path / "x.json")]) != 0
    assert "unknown example" in capsys.readouterr().err


@pytest.mark.parametrize("n", [1, 2])
def test_round_trip(n):
    sf = scenarios.builtin(n)
    again = scenarios.loads(scenarios.dumps(sf))
    assert again == sf
    assert scenarios.loads(scenarios.dumps(again)) == again


def test_check_example1(tmp_path, capsys):
    assert main(["check", str(scaffold(tmp_path, 1))]) == 0
    out = capsys.readouterr().out
    lam2 = float(re.search(r"lambda2 = ([0-9.eE+-]+)", out).group(1))
    assert lam2 > 0
    assert "PASS" in out


def test_check_missing_edge(tmp_path, capsys):
    path = edit(scaffold(tmp_path, 1),
                lambda d: d["graph"].__setitem__("edges", [e for e in d["graph"]["edges"] if e[:2] != [8, 1]]))
    assert main(["check", str(path)]) != 0
    assert "not weight-balanced" in capsys.readouterr().out


def test_check_non_hurwitz(tmp_path, capsys):
    path = edit(scaffold(tmp_path, 1), lambda d: d.__setitem__("k", [[-1.0]] * 8))
    assert main(["check", str(path)]) != 0
    assert "not Hurwitz" in capsys.readouterr().out


def test_check_mixed_sign_online_warns(tmp_path, capsys):
    path = edit(scaffold(tmp_path, 1), lambda d: d.__setitem__("mode", "online"))
    main(["check", str(path)])
    assert "mixed sign" in capsys.readouterr().out


def test_parse_error_has_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "graph": {\n    "n": 2,\n  }\n}\n')
    assert main(["check", str(path)]) != 0
    assert "line 4" in capsys.readouterr().err


def test_field_error_names_field():
    with pytest.raises(ScenarioFileError, match="'costs'"):
        d = scenarios.to_dict(scenarios.example1())
        d["costs"][0] = {"type": "cubic"}
        scenarios.from_dict(d)


@pytest.mark.parametrize("n, expect, tol", [(1, 0.75, 1e-10), (2, 3.24, 0.01)])
def test_oracle(tmp_path, capsys, n, expect, tol):
    assert main(["oracle", str(scaffold(tmp_path, n))]) == 0
    out = capsys.readouterr().out
    y = float(re.search(r"y\* = ([0-9.eE+-]+)", out).group(1))
    assert abs(y - expect) <= tol
    assert "residual" in out


def test_oracle_weighted_mean(tmp_path, capsys):
    path = tmp_path / "two.json"
    d = {
        "graph": {"n": 2, "edges": [[1, 2, 1.0], [2, 1, 1.0]]},
        "agents": [{"order": 1, "b": 1.0}, {"order": 1, "b": 1.0}],
        "costs": [{"type": "quadratic", "c": 1.0, "center": 0.0},
                  {"type": "quadratic", "c": 3.0, "center": 4.0}],
        "init": {"x": [[0.0], [4.0]]},
    }
    path.write_text(json.dumps(d))
    assert main(["oracle", str(path)]) == 0
    assert float(re.search(r"y\* = ([0-9.eE+-]+)", capsys.readouterr().out).group(1)) == pytest.approx(3.0)


def equilibrium_file(tmp_path):
    path = tmp_path / "eq.json"
    d = {
        "name": "equilibrium",
        "graph": {"n": 1, "edges": []},
        "agents": [{"order": 2, "b": -1.0}],
        "costs": [{"type": "quadratic", "c": 1.0, "center": 1.0}],
        "gains": {"alpha": 1.0, "beta": 1.0},
        "t_end": 2.0,
        "h": 0.01,
        "init": {"x": [[1.0, 0.0]]},
        "output": {"record_every": 5},
    }
    path.write_text(json.dumps(d))
    return path


def test_run_equilibrium_is_flat(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(equilibrium_file(tmp_path)), "--out", str(out)]) == 0
    tr = read_trace_csv(out / "trace.csv")
    assert np.all(tr["y"] == 1.0) and np.all(tr["u"] == 0.0)
    assert len(tr["t"]) == 41
    m = json.loads((out / "metrics.json").read_text())
    assert m["final_optimality_gap"] == 0.0
    assert "plot" in (out / "plot.gp").read_text()


def test_run_is_deterministic(tmp_path):
    path = scaffold(tmp_path, 2)
    for name in ("a", "b"):
        assert main(["run", str(path), "--out", str(tmp_path / name), "--t-end", "1.5"]) == 0
    for f in ("trace.csv", "metrics.json", "plot.gp"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_run_step_override_keeps_sampling(tmp_path):
    path = scaffold(tmp_path, 1)
    assert main(["run", str(path), "--out", str(tmp_path / "o"), "--t-end", "0.5", "--step", "5e-4"]) == 0
    tr = read_trace_csv(tmp_path / "o" / "trace.csv")
    assert np.allclose(np.diff(tr["t"]), 0.01)


def test_run_blowup_exit_code(tmp_path, capsys):
    path = tmp_path / "boom.json"
    d = json.loads(equilibrium_file(tmp_path).read_text())
    d.update(nussbaum="exp_sq_sin", t_end=5.0)
    d["agents"] = [{"order": 1, "b": 1.0}]
    d["init"] = {"x": [[1e4]], "r": [0.0]}
    path.write_text(json.dumps(d))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "agent 1" in err and "theta=" in err
    assert (tmp_path / "o" / "trace.csv").exists()


def test_run_refuses_failing_check(tmp_path):
    path = edit(scaffold(tmp_path, 1), lambda d: d.__setitem__("k", [[-1.0]] * 8))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 1


def test_run_directory(tmp_path):
    d = tmp_path / "many"
    d.mkdir()
    equilibrium_file(d)
    (d / "eq2.json").write_text((d / "eq.json").read_text())
    assert main(["run", str(d), "--out", str(tmp_path / "res"), "--jobs", "2"]) == 0
    assert (tmp_path / "res" / "eq" / "trace.csv").exists()
    assert (tmp_path / "res" / "eq2" / "trace.csv").exists()
