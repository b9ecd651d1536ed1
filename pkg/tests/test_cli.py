import json
import subprocess
import sys

import pytest

from qbil.cli import load_config, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        p = tmp_path / name
        p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(p)

    return write


def test_list_text_sorted(capsys):
    code, out, _ = run(capsys, "list")
    lines = out.splitlines()
    ids = [line.split("\t")[0] for line in lines]
    assert code == 0 and ids == sorted(ids)
    (row,) = [line for line in lines if line.startswith("bailey_6psi6")]
    assert "|a^2 q/(bcde)|<1" in row


def test_list_json(capsys):
    code, out, _ = run(capsys, "list", "--json")
    data = json.loads(out)
    assert code == 0 and {"id", "shape", "domain", "equalities", "params"} <= set(data[0])
    assert [d["id"] for d in data] == sorted(d["id"] for d in data)


def test_eval_terminating(capsys, files):
    spec = files("s.json", {"kind": "unilateral", "upper": ["4"], "lower": [], "q": "1/2", "z": "1"})
    code, out, _ = run(capsys, "eval", spec)
    assert code == 0 and out.splitlines()[0] == "3.0"
    code, out, _ = run(capsys, "eval", "--tower", "exact", spec)
    assert code == 0 and out.splitlines()[0] == "3"
    code, out, _ = run(capsys, "eval", "--tower", "exact", "--format", "json", spec)
    assert json.loads(out)["value"] == "3/1"


def test_eval_exact_fraction(capsys, files):
    spec = files("s.json", {"kind": "unilateral", "upper": ["9", "1/2"], "lower": ["1/5"], "q": "1/3", "z": "1/7"})
    code, out, _ = run(capsys, "eval", "--tower", "exact", spec)
    assert code == 0 and "/" in out.splitlines()[0]


def test_eval_divergent(capsys, files):
    spec = files("d.json", {"kind": "unilateral", "upper": [[0.5, 0]], "lower": [], "q": [0.5, 0], "z": [1.5, 0]})
    code, _, err = run(capsys, "eval", spec)
    assert code == 2 and "DivergentDomain" in err


def test_eval_parse_errors(capsys, files):
    broken = files("b.json", '{"kind": "unilateral",\n "upper": [}')
    code, _, err = run(capsys, "eval", broken)
    assert code == 1 and "line 2" in err
    missing = files("m.json", {"kind": "unilateral", "upper": [], "lower": [], "q": "1/2"})
    code, _, err = run(capsys, "eval", missing)
    assert code == 1 and "'z'" in err


def test_check_sample_pass(capsys):
    code, out, _ = run(capsys, "check", "--identity", "ramanujan_1psi1", "--sample", "7")
    assert code == 0 and "PASS" in out


def test_check_json(capsys):
    code, out, _ = run(capsys, "check", "--identity", "ramanujan_1psi1", "--sample", "7", "--format", "json")
    assert code == 0 and json.loads(out)["status"] == "PASS"


def test_check_constraint_violation(capsys, files):
    pt = files("p.json", {"q": "1/5", "a": "2", "b": "1/25", "z": "2"})
    code, out, _ = run(capsys, "check", "--identity", "ramanujan_1psi1", "--point", pt)
    assert code == 3 and "CONSTRAINT_VIOLATION" in out


def test_check_failure_exit(capsys, files):
    pt = files("p.json", {"q": "1/5", "a": "2", "b": "1/25", "z": "1/3"})
    code, out, _ = run(capsys, "check", "--identity", "ramanujan_1psi1", "--point", pt, "--tol", "1e-30")
    assert code == 4 and "FAIL" in out


def test_check_certify(capsys, files):
    pt = files("p.json", {"q": "1/5", "a": "2", "b": "1/25", "z": "1/2"})
    code, out, _ = run(capsys, "check", "--identity", "ramanujan_1psi1", "--point", pt, "--certify",
                       "--eps", "1e-30")
    assert code == 0 and "PASS certified" in out


def test_check_point_with_shape(capsys, files):
    pt = files("p.json", {"params": {"q": "1/3", "a": "2/7", "b": "3", "c": "5/4", "d": "9/2"},
                          "shape": {"n": 3}})
    code, out, _ = run(capsys, "check", "--identity", "jackson_8phi7", "--point", pt, "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["abs_residual"] == "0/1" and rep["tower"] == "exact"


def test_unknown_identity(capsys):
    code, _, err = run(capsys, "check", "--identity", "nope", "--sample", "1")
    assert code == 1 and "nope" in err


def test_sweep_json_deterministic(capsys, files, tmp_path):
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    args = ["sweep", "--identity", "ramanujan_1psi1", "--identity", "heine_euler", "-n", "5", "--seed", "3"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2), "--workers", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    data = json.loads(out1.read_text())
    assert len(data["reports"]) == 10 and [s["identity"] for s in data["summary"]] == ["ramanujan_1psi1",
                                                                                       "heine_euler"]


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--identity", "q_binomial", "-n", "3", "--format", "csv", "--workers", "1")
    rows = out.splitlines()
    assert code == 0 and rows[0].startswith("identity,seed,index") and len(rows) == 4


def test_sweep_failure_exit(capsys):
    code, out, _ = run(capsys, "sweep", "--identity", "ramanujan_1psi1", "-n", "2", "--tol", "1e-30",
                       "--workers", "1")
    assert code == 4 and "FAIL" in out


def test_config_file_and_flag_precedence(capsys, files, monkeypatch):
    cfg = files("c.toml", 'format = "json"\nseed = 5\nn = 2\nworkers = 1\n')
    monkeypatch.setenv("QBIL_CONFIG", cfg)
    code, out, _ = run(capsys, "sweep", "--identity", "q_binomial")
    data = json.loads(out)
    assert code == 0 and len(data["reports"]) == 2 and data["reports"][0]["seed"] == 5
    code, out, _ = run(capsys, "sweep", "--identity", "q_binomial", "-n", "1", "--seed", "8", "--format", "csv")
    assert out.splitlines()[1].startswith("q_binomial,8,0")


def test_config_validation(files):
    with pytest.raises(Exception, match="unknown key"):
        load_config(files("c.toml", "colour = 1\n"))
    with pytest.raises(Exception, match="must be int"):
        load_config(files("c.toml", 'seed = "x"\n'))
    assert load_config(files("c.toml", "tol = 1\n")) == {"tol": 1.0}


def test_bad_config_exit(capsys, files, monkeypatch):
    monkeypatch.setenv("QBIL_CONFIG", files("c.toml", "seed = \n"))
    code, _, err = run(capsys, "list")
    assert code == 1 and "config" in err


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qbil.cli", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "ramanujan_1psi1" in proc.stdout
