import csv
import json
import logging

import numpy as np
import pytest

from qubitbath.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, dump_json, main
from qubitbath.config import (
    ConfigError,
    RunConfig,
    parse_config_text,
    parse_element,
    parse_n_range,
    resolve,
)
from qubitbath.dynamics import ReducedState, free_evolution
from qubitbath.register import str_to_spins


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


BASE = {"seed": 3, "register": {"n": 2}, "couplings": {"lambda1": 0.01, "lambda2": 0.01}}


def test_resolve_is_idempotent():
    once = resolve(BASE)
    assert resolve(once) == once
    assert once["register"]["b"]["seed"] == 3
    assert resolve(BASE, seed=9)["register"]["b"]["seed"] == 9
    assert resolve(BASE, tol=1e-4)["tolerances"]["crosscheck"] == 1e-4


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError, match=r"register\.n"):
        resolve({"register": {"n": 0}})
    with pytest.raises(ConfigError, match=r"env\.beta"):
        resolve({"register": {"n": 1}, "env": {"beta": -1}})
    with pytest.raises(ConfigError, match=r"<config>:2:3"):
        parse_config_text("{\n  'bad'\n}")


def test_config_builds_params():
    cfg = RunConfig.from_dict(
        {"register": {"n": 3, "b": [0.6, 0.9, 1.3], "j": {"pattern": "nearest_neighbour", "value": 0.1}}}
    )
    params = cfg.params()
    assert params.b_fields.tolist() == [0.6, 0.9, 1.3]
    assert params.j_matrix[0, 1] == 0.1 and params.j_matrix[2, 0] == 0.1
    assert params.interacting
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"register": {"n": 2, "b": [1.0]}}).params()


def test_parse_element_and_range():
    assert parse_element("+-|-+", 2) == (1, 2)
    assert parse_element("+-:-+", 2) == (1, 2)
    assert parse_element("+--+", 2) == (1, 2)
    with pytest.raises(ConfigError):
        parse_element("+-|-", 2)
    with pytest.raises(ConfigError):
        parse_element("+x|--", 2)
    assert parse_n_range("1..6") == (1, 6)
    for bad in ("6..1", "0..2", "a..b", "3"):
        with pytest.raises(ConfigError):
            parse_n_range(bad)


def test_dump_json_nulls_non_finite():
    assert json.loads(dump_json({"a": float("inf"), "b": np.float64(1.5)})) == {"a": None, "b": 1.5}


def test_spectrum_round_trip_is_byte_identical(tmp_path):
    assert main(["spectrum", "--config", write(tmp_path, BASE), "--out", str(tmp_path / "a")]) == EXIT_OK
    first = (tmp_path / "a" / "spectrum.json").read_text()
    echoed = json.loads(first)["config"]
    assert main(["spectrum", "--config", write(tmp_path, echoed, "echo.json"), "--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "b" / "spectrum.json").read_text() == first


def test_equal_fields_warn_not_generic(tmp_path, caplog):
    data = {"register": {"n": 2, "b": [1.0, 1.0]}}
    with caplog.at_level(logging.WARNING):
        assert main(["spectrum", "--config", write(tmp_path, data), "--out", str(tmp_path)]) == EXIT_OK
    spectrum = json.loads((tmp_path / "spectrum.json").read_text())["spectrum"]
    assert spectrum["generic"] is False
    assert any("generic=false" in w for w in spectrum["warnings"])
    assert "generic=false" in caplog.text


def test_rates_outputs_and_deterministic_svg(tmp_path):
    path = write(tmp_path, BASE)
    for sub in ("a", "b"):
        assert main(["rates", "--config", path, "--out", str(tmp_path / sub)]) == EXIT_OK
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "rates.svg").read_bytes() == (b / "rates.svg").read_bytes()
    assert (a / "rates.json").read_text() == (b / "rates.json").read_text()
    rates = json.loads((a / "rates.json").read_text())
    assert rates["command"] == "rates" and rates["seed"] == 3
    assert all(g["gamma_e"] >= 0 for g in rates["rates"]["groups"])


def test_rates_for_interacting_register(tmp_path):
    data = {"register": {"n": 2, "b": [0.7, 1.2], "j": {"pattern": "explicit", "matrix": [[0, 0.2], [0, 0]]}}}
    assert main(["rates", "--config", write(tmp_path, data), "--out", str(tmp_path)]) == EXIT_OK
    rates = json.loads((tmp_path / "rates.json").read_text())["rates"]
    assert rates["gamma0_interacting"] > 0 and rates["y0"] is None


def test_zero_coupling_dynamics_is_free_evolution(tmp_path):
    data = {
        "seed": 5,
        "register": {"n": 2, "b": [0.7, 1.2]},
        "couplings": {"lambda1": 0.0, "lambda2": 0.0},
        "dynamics": {"times": {"start": 0, "stop": 50, "num": 11}, "initial_state": "random"},
    }
    assert main(["dynamics", "--config", write(tmp_path, data), "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0].startswith("# config:") and lines[1] == "# seed: 5"
    rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
    assert len(rows) == 11 * 16
    cfg = RunConfig.from_dict(data)
    rho0 = ReducedState.random(2, np.random.default_rng(5))
    times = np.linspace(0, 50, 11)
    exact = free_evolution(rho0, cfg.params(), times)
    from qubitbath.register import config_index

    for row in rows:
        k = int(round(float(row["t"]) / 5.0))
        s, t = config_index(str_to_spins(row["sigma"])), config_index(str_to_spins(row["tau"]))
        value = complex(float(row["re"]), float(row["im"]))
        assert abs(value - exact[k, s, t]) <= 1e-12


def test_dynamics_selected_elements(tmp_path):
    assert main(
        ["dynamics", "--config", write(tmp_path, BASE), "--out", str(tmp_path), "--elements", "+-|-+,++|++"]
    ) == EXIT_OK
    assert (tmp_path / "trajectory.svg").exists()
    body = [l for l in (tmp_path / "trajectory.csv").read_text().splitlines() if not l.startswith("#")]
    assert {tuple(l.split(",")[1:3]) for l in body[1:]} == {("+-", "-+"), ("++", "++")}


def test_sweep_writes_scaling(tmp_path):
    data = dict(BASE, sweep={"instances": 1, "hamming_n": 3, "hamming_instances": 5})
    assert main(["sweep", "--config", write(tmp_path, data), "--out", str(tmp_path), "--n-range", "1..3"]) == EXIT_OK
    scaling = json.loads((tmp_path / "scaling.json").read_text())
    assert scaling["n_range"] == [1, 3]
    assert len(scaling["scaling"]["per_n"]) == 3
    assert scaling["hamming_regression"]["r_squared"] > 0.99
    assert (tmp_path / "scaling.svg").exists()


def test_validate_interacting(tmp_path, capsys):
    data = {
        "register": {"n": 2, "b": [0.7, 1.2], "j": {"pattern": "explicit", "matrix": [[0, 0.2], [0, 0]]}},
    }
    assert main(["validate", "--config", write(tmp_path, data), "--out", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "PASS"
    report = json.loads((tmp_path / "crosscheck.json").read_text())
    assert all(row["max_offdiag"] <= 1e-8 for row in report["groups"])
    assert "thermalisation" in report["checks"]


def test_validate_reports_failure_with_tiny_tolerance(tmp_path, capsys):
    code = main(["validate", "--config", write(tmp_path, BASE), "--out", str(tmp_path), "--tol", "1e-30"])
    assert code == EXIT_FAIL
    assert capsys.readouterr().out.strip() == "FAIL"


@pytest.mark.parametrize(
    "argv_tail",
    [
        ["--seed", "-1"],
        ["--tol", "0"],
        ["--n-range", "5..1"],
    ],
)
def test_bad_arguments_exit_2(tmp_path, argv_tail):
    assert main(["sweep", "--config", write(tmp_path, BASE), "--out", str(tmp_path)] + argv_tail) == EXIT_INPUT


def test_bad_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["spectrum", "--config", str(bad)]) == EXIT_INPUT
    assert main(["spectrum", "--config", str(tmp_path / "missing.json")]) == EXIT_INPUT
    big = write(tmp_path, {"register": {"n": 9}}, "big.json")
    assert main(["spectrum", "--config", big, "--out", str(tmp_path)]) == EXIT_INPUT
