import csv
import io
import json
import subprocess
import sys

import pytest

from contam_runs import cli
from contam_runs.core import CoinSpec
from contam_runs.theory import m0_center, m_center


def _run(capsys, argv):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_theory_table(capsys):
    code, out, _ = _run(capsys, ["theory", "--N", "1000000", "--T", "1", "--p", "0.5", "--k", "-5..10"])
    assert code == 0
    env = json.loads(out)
    assert env["schema"] == cli.SCHEMA and env["command"] == "theory"
    pl = env["payload"]
    assert pl["m0_center"]["value"] == pytest.approx(m0_center(10**6, 1, CoinSpec(0.5)).value, rel=1e-11)
    assert pl["m_center"]["value"] == pytest.approx(m_center(10**6, 1, CoinSpec(0.5)).value, rel=1e-11)
    assert [r["k"] for r in pl["table"]] == list(range(-5, 11))


def test_theory_t0_refuses_new(capsys):
    code, out, _ = _run(capsys, ["theory", "--N", "1000", "--T", "0", "--p", "0.5"])
    env = json.loads(out)
    assert code == 0 and "m_center" not in env["payload"]
    assert env["payload"]["notes"]


def test_theory_domain_error(capsys):
    code, _, err = _run(capsys, ["theory", "--N", "1", "--T", "1", "--p", "0.5"])
    assert code == 3 and "q*N" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["simulate-longest", "--N", "1000", "--T", "1"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["simulate-longest", "--N", "1000", "--T", "1", "--p", "1.0"])
    assert e.value.code == 2
    assert "p must be in (0,1)" in capsys.readouterr().err


def test_simulate_longest_envelope_and_replay(capsys):
    argv = ["simulate-longest", "--N", "20000", "--s", "40", "--T", "1", "--p", "0.5", "--seed", "42"]
    code, out, _ = _run(capsys, argv)
    env = json.loads(out)
    assert code == 0
    assert env["config"]["seed"] == 42
    pl = env["payload"]
    assert set(pl) >= {"ks_new", "ks_old", "cdf_table"}
    assert pl["ks_new"]["distance"] == round(pl["ks_new"]["distance"], 4)
    cfg = env["config"]
    replay = ["simulate-longest"] + [x for k, v in cfg.items() for x in (f"--{k}", str(v))] + ["--threads", "2"]
    _, out2, _ = _run(capsys, replay)
    assert cli.payload_json(json.loads(out2)["payload"]) == cli.payload_json(pl)


def test_csv_carries_same_numbers(capsys, tmp_path):
    base = ["theory", "--N", "100000", "--T", "2", "--p", "0.6", "--k", "-3..3"]
    _, out_json, _ = _run(capsys, base)
    path = tmp_path / "r.csv"
    code, _, _ = _run(capsys, base + ["--format", "csv", "--out", str(path)])
    assert code == 0
    flat = dict(cli._flatten(json.loads(out_json)["payload"]))
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    payload_rows = {r["path"]: json.loads(r["value"]) for r in rows if r["section"] == "payload"}
    assert payload_rows == flat


def test_simulate_hitting(capsys):
    code, out, _ = _run(capsys, ["simulate-hitting", "--T", "1", "--p", "0.5", "--m", "13", "--s", "30", "--seed", "7"])
    env = json.loads(out)
    assert code == 0 and env["payload"]["censored"] == 0
    assert 0 <= env["payload"]["ks"]["distance"] <= 1


def test_simulate_hitting_single_sample(capsys):
    code, out, _ = _run(capsys, ["simulate-hitting", "--T", "1", "--p", "0.5", "--m", "10", "--s", "1"])
    table = json.loads(out)["payload"]["ks"]["table"]
    assert code == 0 and len(table) == 1
    assert table[0]["empirical_cdf_left"] == 0 and table[0]["empirical_cdf"] == 1


def test_simulate_hitting_negative_alpha(capsys):
    code, _, err = _run(capsys, ["simulate-hitting", "--T", "2", "--p", "0.5", "--m", "3", "--s", "5"])
    assert code == 3 and "alpha" in err


def test_oracle_dp_vs_enum(capsys):
    common = ["oracle", "--N", "12", "--m", "4", "--T", "1", "--p", "0.5"]
    _, a, _ = _run(capsys, common + ["--method", "dp"])
    _, b, _ = _run(capsys, common + ["--method", "enum"])
    pa = json.loads(a)["payload"]["table"][0]["probability"]
    pb = json.loads(b)["payload"]["table"][0]["probability"]
    assert abs(pa - pb) <= 1e-12


def test_oracle_enum_limit(capsys):
    code, _, err = _run(capsys, ["oracle", "--method", "enum", "--N", "30"])
    assert code == 3 and "N <= 22" in err


def test_oracle_compare_auto(capsys):
    code, out, _ = _run(capsys, ["oracle", "--N", "100000", "--T", "1", "--p", "0.5", "--m-range", "auto", "--compare"])
    pl = json.loads(out)["payload"]
    assert code == 0 and len(pl["table"]) == 17
    for row in pl["table"]:
        assert abs(row["error_new"]) < 0.05
        assert "k_old" in row


def test_ks_report(capsys, tmp_path):
    vals = tmp_path / "mu.txt"
    vals.write_text("23 24 22 25 23 23 24 21\n")
    code, out, _ = _run(capsys, ["ks-report", "--input", str(vals), "--theory", "new", "--N", "1000000", "--T", "1", "--p", "0.5"])
    assert code == 0 and 0 <= json.loads(out)["payload"]["ks"]["distance"] <= 1
    taus = tmp_path / "tau.json"
    taus.write_text(json.dumps([1200, 800, 3000, 150]))
    code, out, _ = _run(capsys, ["ks-report", "--input", str(taus), "--theory", "exp", "--T", "1", "--p", "0.5", "--m", "13"])
    assert code == 0 and json.loads(out)["payload"]["ks"]["which_theory"] == "exp_limit"


def test_threads_env(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    args = cli.build_parser().parse_args(["simulate-longest", "--N", "100", "--T", "1", "--p", "0.5"])
    assert cli._threads(args) == 3


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "contam_runs", "theory", "--N", "1", "--T", "1", "--p", "0.5"], capture_output=True, text=True)
    assert r.returncode == 3
    r = subprocess.run([sys.executable, "-m", "contam_runs", "oracle", "--p", "2"], capture_output=True, text=True)
    assert r.returncode == 2
