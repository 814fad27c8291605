import csv
import io
import json

import numpy as np
import pytest

from mwhittaker.cli import RunConfig, decode_matrix, encode_matrix, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_whittaker_eval_example(capsys):
    code, out, err = run(capsys, "whittaker-eval", "--lambda", "0,0", "--z", "1,1")
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["value"] == pytest.approx(0.2277877, abs=1e-7)
    assert err.startswith("# mwhittaker ") and "seed=0" in err and "command=whittaker-eval" in err


def test_config_round_trip(capsys):
    code, out, _ = run(capsys, "simulate-right-edge", "--N", "3", "--n", "4", "--alpha", "2.0",
                       "--beta", "0.1,0.2,0.3", "--seed", "5")
    assert code == 0
    doc = json.loads(out)
    cfg = RunConfig.from_dict(doc["config"])
    assert cfg.command == "simulate-right-edge" and cfg.seed == 5 and cfg.N == 3 and cfg.beta == [0.1, 0.2, 0.3]
    assert len(doc["result"]["records"]) == 5 * 3


def test_seed_reproducibility_and_env(capsys, monkeypatch):
    args = ["simulate-triangular", "--N", "3", "--n", "3", "--samples", "2"]
    _, a, _ = run(capsys, *args, "--seed", "11")
    _, b, _ = run(capsys, *args, "--seed", "11")
    _, c, _ = run(capsys, *args, "--seed", "12")
    assert a == b and a != c
    monkeypatch.setenv("MW_SEED", "11")
    _, d, err = run(capsys, *args)
    assert d == a and "seed=11" in err
    monkeypatch.setenv("MW_SEED", "eleven")
    assert run(capsys, *args)[0] == 2


def test_csv_output_and_file(capsys, tmp_path):
    path = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate-left-edge", "--d", "2", "--N", "2", "--n", "2", "--alpha", "2.0",
                       "--format", "csv", "-o", str(path))
    assert code == 0 and out == ""
    rows = list(csv.reader(io.StringIO(path.read_text())))
    assert rows[0] == ["sample", "step", "i", "j", "m0", "m1", "m2"]
    assert len(rows) == 1 + 3 * 2


def test_matrix_encoding_round_trip():
    m = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.array_equal(decode_matrix(json.loads(json.dumps(encode_matrix(m)))), m)


def test_minimize_energy(capsys):
    code, out, _ = run(capsys, "minimize-energy", "--graph", "triangular:3")
    res = json.loads(out)["result"]
    assert code == 0 and res["energy"] == pytest.approx(4 * np.sqrt(2)) and res["certified"]
    assert decode_matrix(res["minimiser"]["2,1"])[0, 0] == pytest.approx(np.sqrt(2))


def test_matrix_bottom_row(capsys):
    code, out, _ = run(capsys, "whittaker-eval", "--d", "2", "--lambda", "2,3", "--z", "1,0,1;2,0,2",
                       "--samples", "2000")
    res = json.loads(out)["result"]
    assert code == 0 and res["method"] == "mc" and res["value"] > 0


def test_laplace_and_sweep(capsys):
    code, out, _ = run(capsys, "laplace", "--graph", "chain", "--k", "50")
    assert code == 0 and abs(json.loads(out)["result"]["ratio"] - 1) < 0.02
    code, out, _ = run(capsys, "asymptotics-sweep", "--k", "10,20")
    assert code == 0 and len(json.loads(out)["result"]["records"]) == 2


def test_schur_check(capsys):
    code, out, _ = run(capsys, "schur-check", "--x", "0.3,0.1", "--y", "0.2,0.4", "--mu", "2,1")
    res = json.loads(out)["result"]
    assert code == 0 and res["cauchy"]["ok"] and res["pieri"]["ok"]


@pytest.mark.parametrize("argv", [
    ["simulate-triangular", "--d", "3", "--alpha", "0.1"],     # alpha + beta too small
    ["simulate-right-edge", "--N", "2", "--beta", "1,2,3"],     # wrong length
    ["whittaker-eval", "--lambda", "0,0", "--z", "1,-1"],       # non-positive row
    ["whittaker-eval", "--lambda", "0,x", "--z", "1,1"],        # unparsable
    ["minimize-energy", "--graph", "triangular:1"],
    ["schur-check", "--x", "1.5"],
    ["laplace", "--k", "-1"],
    ["verify", "nope"],
    ["no-such-command"],
])
def test_invalid_parameters_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "Traceback" not in err


def test_verify_command(capsys):
    code, out, _ = run(capsys, "verify", "schur", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[1][0] == "schur" and rows[1][4] == "True"


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "mwhittaker 0.1.0" in capsys.readouterr().out
