import json
import subprocess
import sys

import pytest

from prophet_lab import cli, frlp


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_no_arguments_prints_usage(capsys):
    code, out, err = run(capsys)
    assert code == 2 and "usage:" in err


def test_unknown_subcommand(capsys):
    assert run(capsys, "solve")[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "prophet_lab"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage:" in proc.stderr


def test_frlp_two(capsys):
    code, out, _ = run(capsys, "frlp", "two", "--c1", "0.7067", "--c2", "1.8353", "--rho", "0.6204")
    doc = json.loads(out)
    assert code == 0
    assert doc["solution"]["value"] >= 0.6786
    assert doc["solution"]["status"] == "Optimal" and doc["certified"] is True
    assert doc["config"]["zeta_grid"] == 200


def test_frlp_dump_and_config_file(capsys, tmp_path):
    cfg = tmp_path / "oa.json"
    cfg.write_text(json.dumps({"c": 0.72941, "rho": 0.64863, "k": 5}))
    code, out, _ = run(capsys, "frlp", "oa", "--config", str(cfg), "--k", "4", "--dump")
    doc = json.loads(out)
    assert code == 0
    assert doc["config"]["k"] == 4 and doc["config"]["c"] == 0.72941
    assert "quantile_phase:" in doc["lp"]
    assert len(doc["solution"]["point"]) == 2 + 5 * 2 + 4


def test_frlp_invalid_params(capsys):
    code, _, err = run(capsys, "frlp", "two", "--c1", "2", "--c2", "1")
    assert code == 1 and "c1" in err


def test_simulate_example(capsys):
    code, out, _ = run(capsys, "simulate", "--policy", "single", "--c", "1", "--dist", "uniform01",
                       "--n", "100", "--trials", "1000000", "--seed", "7")
    rep = json.loads(out)["report"]
    assert code == 0
    assert abs(rep["alg_mean"] - 0.63086) <= 4 * rep["alg_stderr"]


def test_simulate_csv_echoes_config(capsys):
    code, out, _ = run(capsys, "simulate", "--policy", "observe_accept", "--c", "0.73",
                       "--rho", "0.65", "--n", "50", "--trials", "2000", "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("# config: ")
    assert json.loads(lines[0][len("# config: "):])["policy"] == "observe_accept"
    assert lines[1].startswith("policy,dist,n,trials")
    assert lines[2].startswith("observe_accept,")


def test_simulate_distribution_literal(capsys):
    literal = json.dumps({"kind": "mixture", "components": [{"w": 1.0, "lo": 2.0, "hi": 3.0}]})
    code, out, _ = run(capsys, "simulate", "--dist", literal, "--n", "5", "--trials", "100")
    assert code == 0 and json.loads(out)["report"]["opt"] > 2.0


def test_repeat_runs_byte_identical(capsys):
    argv = ["simulate", "--policy", "secretary", "--n", "40", "--trials", "50000", "--seed", "3"]
    first = run(capsys, *argv)[1]
    second = run(capsys, "--threads", "3", *argv)[1]
    assert json.loads(first)["report"] == json.loads(second)["report"]
    assert first == run(capsys, *argv)[1]


def test_threads_environment(capsys, monkeypatch):
    monkeypatch.setenv("PROPHET_LAB_THREADS", "2")
    code, out, _ = run(capsys, "sweep", "--c-values", "0.5,1.5", "--rho-grid", "5")
    assert code == 0 and "c,best_rho,ratio,k,beta_ratio" in out


def test_malformed_config(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"n": 100,\n  "trials": }\n')
    code, _, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == 2 and "bad.json:2:" in err


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "extra.json"
    cfg.write_text('{"n": 100, "bogus": 1}')
    code, _, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == 2 and "bogus" in err


def test_config_must_be_object(capsys, tmp_path):
    cfg = tmp_path / "list.json"
    cfg.write_text("[1, 2]")
    assert run(capsys, "tune", "--config", str(cfg))[0] == 2


def test_domain_error_exit(capsys):
    code, _, err = run(capsys, "simulate", "--policy", "single", "--c", "-1")
    assert code == 1 and "domain error" in err


def test_bad_flag_value(capsys):
    assert run(capsys, "simulate", "--n", "many")[0] == 2


def test_bounds_oa_with_grid(capsys, tmp_path):
    grid = tmp_path / "grid.csv"
    code, out, _ = run(capsys, "bounds", "oa", "--res", "20", "--rounds", "1",
                       "--grid-csv", str(grid))
    doc = json.loads(out)
    assert code == 0 and set(doc["result"]["argmax"]) == {"c", "rho"}
    assert len(grid.read_text().splitlines()) == 1 + 20 * 20


def test_tune_k1(capsys):
    code, out, _ = run(capsys, "tune", "--kind", "k", "--k", "1")
    res = json.loads(out)["result"]
    assert code == 0 and res["params"]["c"][0] == pytest.approx(1.0, abs=1e-3)


def test_tune_seed_params(capsys):
    seed = json.dumps({"c1": 0.7, "c2": 1.8, "rho": 0.62, "zeta_grid": 10})
    code, out, _ = run(capsys, "tune", "--kind", "two", "--seed-params", seed, "--halvings", "1")
    res = json.loads(out)["result"]
    assert code == 0 and res["value"] >= res["seed_value"]


def test_output_file(capsys, tmp_path):
    target = tmp_path / "sweep.csv"
    code, out, _ = run(capsys, "sweep", "--c-values", "1.2", "--rho-grid", "3", "--out", str(target))
    assert code == 0 and out == ""
    assert target.read_text().splitlines()[2].startswith("1.2,1,")


def test_six_significant_digits(capsys):
    out = run(capsys, "sweep", "--c-values", "0.7", "--rho-grid", "5")[1]
    ratio = out.splitlines()[2].split(",")[2]
    assert len(ratio.replace(".", "").lstrip("0")) >= 6


def test_check_soundness(capsys):
    code, out, _ = run(capsys, "check", "soundness")
    assert code == 0
    assert "[PASS] criterion 8" in out and "[PASS] criterion 10" in out


def test_check_unknown_criterion(capsys):
    assert run(capsys, "check", "soundness", "--only", "1")[0] == 2


def test_check_catches_broken_gamma_sign(capsys, monkeypatch):
    # Flip the sign of the gamma * delta term: the cuts loosen and the
    # two-threshold optimum falls below the reproduced value.
    original = frlp.build_k_threshold

    def broken(params):
        model = original(params)
        gaps = [j for j, name in enumerate(model.names) if name.startswith("delta")]
        for con in model.constraints:
            if con.name.startswith("gamma"):
                con.coeffs[gaps] *= -1.0
        return model

    monkeypatch.setattr(frlp, "build_k_threshold", broken)
    code, out, _ = run(capsys, "check", "reproduce", "--only", "1")
    assert code == 1 and "[FAIL] criterion 1" in out


def test_check_reproduce_single_criterion(capsys):
    code, out, _ = run(capsys, "check", "reproduce", "--only", "1,3")
    assert code == 0
    assert "[PASS] criterion 1" in out and "[PASS] criterion 3" in out
