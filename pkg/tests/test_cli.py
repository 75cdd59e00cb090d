import csv
import json

import pytest

from sbmlab import cli


def run(tmp_path, payload, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    out = tmp_path / ("out_" + name.split(".")[0])
    code = cli.main([payload["command"], "--config", str(path), "--out", str(out), *extra])
    return code, out


STABLE = {"family": "stable", "alpha": 1.0}


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_phi_table(tmp_path):
    code, out = run(tmp_path, {"command": "phi-table", "spec": STABLE, "n_lambda": 5, "lambda_range": [1, 1e4]})
    assert code == cli.EXIT_PASS
    rows = read_csv(out / "phi_table.csv")
    assert list(rows[0]) == list(cli.PHI_COLUMNS)
    assert float(rows[-1]["phi"]) == pytest.approx(100.0)
    assert float(rows[-1]["H"]) == pytest.approx(50.0)


def test_scaling(tmp_path):
    code, out = run(tmp_path, {"command": "scaling", "spec": STABLE})
    data = json.loads((out / "scaling.json").read_text())
    assert code == 0 and data["phi"]["delta"] == pytest.approx(0.5, abs=1e-9)
    assert data["comparability"]["H/phi"]["comparable"] is True


def test_tails(tmp_path):
    code, out = run(tmp_path, {"command": "tails", "spec": STABLE, "n_t": 3, "n_r": 3})
    assert code == 0
    rows = read_csv(out / "tails.csv")
    assert list(rows[0]) == ["t", "r", "regime_lhs", "tail_prob", "tH", "ratio", "stderr"]
    assert all(float(r["regime_lhs"]) <= 0.5 / 2.718281828 for r in rows)


def test_kernel_columns_and_determinism(tmp_path):
    payload = {"command": "kernel", "spec": STABLE, "n_t": 3, "n_r": 3, "t_range": [0.1, 1.0], "monte_carlo": True}
    code, out = run(tmp_path, payload, "--seed", "4")
    code2, out2 = run(tmp_path, payload, "--seed", "4", name="again.json")
    assert code == code2 == 0
    assert (out / "kernel.csv").read_bytes() == (out2 / "kernel.csv").read_bytes()
    rows = read_csv(out / "kernel.csv")
    assert list(rows[0]) == list(cli.heatkernel.KERNEL_COLUMNS)
    assert all(float(r["p_stderr"]) > 0 for r in rows)


def test_verify_calibration_json(tmp_path):
    code, out = run(tmp_path, {"command": "verify", "spec": STABLE, "n_t": 5, "n_r": 5}, "--d", "3")
    cal = json.loads((out / "calibration.json").read_text())
    assert code == cli.EXIT_PASS and cal["pass"]
    assert {"C", "a_L", "a_U", "grid", "pass", "worst_point"} <= set(cal)
    assert cal["grid"]["d"] == 3


def test_green(tmp_path):
    code, out = run(tmp_path, {"command": "green", "spec": STABLE, "d": 3, "r_range": [0.1, 10], "n_r": 3})
    assert code == 0
    assert list(read_csv(out / "green.csv")[0])[:6] == list(cli.green.GREEN_COLUMNS)


def test_blowup(tmp_path):
    code, out = run(tmp_path, {"command": "blowup", "spec": {"family": "geometric_stable", "beta": 1.0}, "d": 3})
    assert code == 0
    assert json.loads((out / "blowup.json").read_text())["pass"] is True


def test_precondition_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, {"command": "verify", "spec": {"family": "geometric_stable", "beta": 1.0},
                             "n_t": 2, "n_r": 2})
    assert code == cli.EXIT_CONFIG
    assert "precondition violated" in capsys.readouterr().err


def test_failing_check_exit_code(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.HANDLERS, "scaling", lambda cfg, out: False)
    code, _ = run(tmp_path, {"command": "scaling", "spec": STABLE})
    assert code == cli.EXIT_FAIL


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, {"command": "scaling", "spec": {"family": "stable", "alpha": 2.5}})
    assert code == cli.EXIT_CONFIG
    assert "alpha out of (0,2)" in capsys.readouterr().err


def test_config_required(capsys):
    assert cli.main(["kernel"]) == cli.EXIT_CONFIG


def test_numeric_error_writes_error_json(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise cli.NumericError("no convergence", {"where": 1})

    monkeypatch.setitem(cli.HANDLERS, "scaling", boom)
    code, out = run(tmp_path, {"command": "scaling", "spec": STABLE})
    assert code == cli.EXIT_NUMERIC
    err = json.loads((out / "error.json").read_text())
    assert err["type"] == "NumericError" and err["diagnostics"] == {"where": 1}


def test_help_lists_columns(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for col in ("regime_lhs", "p_stderr", "ratio_hi", "refined_envelope", "phi_second"):
        assert col in text
