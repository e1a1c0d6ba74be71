import csv
import json
import math

import numpy as np
import pytest

from tvconsensus.cli import main
from tvconsensus.config import ConfigError, load_config, parse_config


def _write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _run(tmp_path, command, data, *extra):
    cfg = _write(tmp_path, data)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def test_simulate_three_agent(tmp_path, capsys):
    code, out = _run(tmp_path, "simulate", {"scenario": {"name": "three_agent", "periods": 20}})
    assert code == 0
    rows = _rows(out / "trajectory.csv")
    assert rows[0] == ["t", "x_1", "x_2", "x_3", "diameter"]
    d = np.array([float(r[-1]) for r in rows[1:]])
    assert d[-1] < d[0]
    assert np.all(np.diff(d) <= 1e-12)
    assert "final diameter" in capsys.readouterr().out


def test_simulate_counterexample_gap(tmp_path):
    code, out = _run(tmp_path, "simulate", {"scenario": {"name": "ultimate_counterexample", "periods": 20}})
    assert code == 0
    last = _rows(out / "trajectory.csv")[-1]
    gap0 = 1.0
    assert float(last[-1]) == pytest.approx(math.exp(-2 * (1 - 2.0**-20)) * gap0, abs=1e-6)


def test_simulate_equal_start(tmp_path):
    data = {"scenario": {"name": "three_agent", "x0": [0.25, 0.25, 0.25], "periods": 3}}
    code, out = _run(tmp_path, "simulate", data)
    assert code == 0
    assert all(float(r[-1]) == 0.0 for r in _rows(out / "trajectory.csv")[1:])


def test_csv_format_round_trips(tmp_path):
    code, out = _run(tmp_path, "simulate", {"scenario": {"name": "two_agent_constant", "periods": 1}})
    raw = (out / "trajectory.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    row = _rows(out / "trajectory.csv")[2]
    for cell in row:
        assert format(float(cell), ".17g") == cell


def test_periods_and_tolerance_flags(tmp_path):
    code, out = _run(tmp_path, "simulate", {"scenario": {"name": "two_agent_constant"}}, "--periods", "2")
    assert code == 0
    assert float(_rows(out / "trajectory.csv")[-1][0]) == 2.0
    code, _ = _run(tmp_path, "simulate", {"scenario": {"name": "two_agent_constant"}}, "--tolerance", "-1")
    assert code == 2


def test_analyze_reciprocal(tmp_path, capsys):
    code, out = _run(
        tmp_path,
        "analyze",
        {"scenario": {"name": "two_agent_reciprocal", "periods": 6}, "solver": {"method": "runge_kutta"}},
    )
    assert code == 0
    text = (out / "analysis.txt").read_text()
    tps = [float(line.split("t_p=")[1].split()[0]) for line in text.splitlines() if "t_p=" in line]
    assert np.allclose(tps, np.exp(np.arange(7)), rtol=1e-9)


def test_analyze_linear_rho_verdicts(tmp_path):
    data = {"scenario": {"name": "three_agent", "rho": {"kind": "linear"}, "periods": 40}}
    code, out = _run(tmp_path, "analyze", data)
    assert code == 0
    text = (out / "analysis.txt").read_text()
    assert "cut balance: unbounded-trend" in text
    assert "slow divergence: diverging-trend" in text
    assert "overall: ok" in text


def test_check_symmetric(tmp_path, capsys):
    code, out = _run(tmp_path, "check", {"scenario": {"name": "two_agent_constant", "periods": 5}})
    assert code == 0
    assert "K_estimate=1 " in (out / "checks.txt").read_text()


def test_analyze_counterexample_exits_4(tmp_path, capsys):
    code, _ = _run(tmp_path, "analyze", {"scenario": {"name": "ultimate_counterexample", "periods": 2}})
    assert code == 4
    assert "cut {x_1}" in capsys.readouterr().err


def test_numerical_failure_exits_3(tmp_path, capsys):
    data = {
        "scenario": {
            "name": "custom",
            "n": 2,
            "x0": [0, 1e10],
            "weights": [
                {"i": 1, "j": 2, "segments": [{"start": 0, "end": 10, "c": 1e308}]},
                {"i": 2, "j": 1, "segments": [{"start": 0, "end": 10, "c": 1e308}]},
            ],
            "periods": 1,
        },
        "solver": {"method": "runge_kutta"},
    }
    code, _ = _run(tmp_path, "simulate", data)
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_custom_periodic_weights(tmp_path):
    data = {
        "scenario": {
            "name": "custom",
            "n": 2,
            "x0": [0, 1],
            "weights": [{"i": 1, "j": 2, "period": 2, "segments": [{"start": 0, "end": 1}]}],
            "periods": 3,
        }
    }
    cfg = parse_config(data)
    sys = cfg.scenario.build()
    assert sys.w[0][1].evaluate(4.5) == 1.0 and sys.w[0][1].evaluate(5.5) == 0.0
    code, out = _run(tmp_path, "simulate", data)
    assert code == 0


@pytest.mark.parametrize(
    "data,needle",
    [
        ('{"scenario": {"name": "three_agent",\n  "periods": }}', "line 2"),
        ({"scenario": {"name": "three_agent", "bogus": 1}}, "scenario: unknown key(s) bogus"),
        ({"scenario": {"name": "three_agent", "m": 2.5}}, "scenario.m"),
        ({"scenario": {"name": "nowhere"}}, "unknown scenario"),
        ({"scenario": {"name": "three_agent", "rho": {"kind": "power", "exponent": "x"}}}, "scenario.rho.exponent"),
        ({"scenario": {"name": "three_agent"}, "solver": {"max_step": 0}}, "solver"),
        ({"scenario": {"name": "custom", "n": 2, "weights": [{"i": 1, "j": 1}]}}, "scenario.weights[0]"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, data, needle):
    code, _ = _run(tmp_path, "simulate", data)
    assert code == 2
    assert needle in capsys.readouterr().err


def test_load_config_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, {"scenario": {"name": "odd_chain"}}))
    assert cfg.seed == 0 and cfg.scenario.m == 5 and cfg.solver.step_tolerance == 1e-10
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_figure1_small(tmp_path, capsys):
    code = main(["figure1", "--periods", "30", "--out", str(tmp_path)])
    assert code == 0
    finals = {}
    for label in ("const1", "pow0.2", "pow0.4"):
        rows = _rows(tmp_path / f"figure1_{label}.csv")
        assert rows[0] == ["t", "diameter", "log10_diameter"]
        finals[label] = float(rows[-1][1])
    assert finals["const1"] < finals["pow0.2"] < finals["pow0.4"]
    assert capsys.readouterr().out.count("final diameter") == 3
