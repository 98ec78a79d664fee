import csv
import io
import json
import subprocess
import sys

import pytest

from dasep.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


def test_generator_json():
    code, text = run("generator", "--L", "2", "--q", "0.5", "--n", "2", "--emit", "json")
    assert code == 0
    js = json.loads(text)
    assert js["dim"] == 16
    assert [1, 4, 4.0625] in js["entries"]
    assert js["validation"]["pass"] is True


def test_generator_csv():
    code, text = run("generator", "--L", "2", "--q", "0.5", "--emit", "csv")
    rows = list(csv.reader(io.StringIO(text)))
    assert code == 0 and rows[0] == ["row", "col", "rate"]


@pytest.mark.parametrize("argv", [
    ("generator", "--L", "2", "--q", "0.5", "--bogus"),
    ("nonsense",),
    ("qgroup", "theorem2", "--L", "2", "--q", "0.5"),
    ("generator", "--L", "2", "--q", "1.5"),
    ("qgroup", "verify", "--q", "0.5", "--phi", "1,2"),
])
def test_argument_errors_exit_2(argv):
    assert run(*argv)[0] == 2


def test_verify_duality_report():
    code, text = run("verify", "duality", "--L", "2", "--q", "0.5", "--n", "2",
                     "--alpha1", "10", "--alpha2", "10", "--all-checks")
    js = json.loads(text)
    assert {"command", "parameters", "checks", "pass", "timing_seconds", "versions", "seed"} <= set(js)
    names = [c["check"] for c in js["checks"]]
    assert names[:2] == ["interlacing", "detailed_balance"]
    for c in js["checks"]:
        assert {"check", "params", "residual", "threshold", "pass"} <= set(c)
    # orthogonality is out of range at alpha = 10, so the run as a whole fails
    assert code == 1 and js["pass"] is False


def test_round_trip_bit_exact():
    code, text = run("verify", "duality", "--L", "2", "--q", "0.3", "--n", "3",
                     "--alpha1", "0.5", "--alpha2", "2")
    js = json.loads(text)
    argv = js["command"][1:]
    _, text2 = run(*argv)
    js2 = json.loads(text2)
    assert [c["residual"] for c in js["checks"]] == [c["residual"] for c in js2["checks"]]
    assert code == 0


def test_qgroup_verify_alias():
    a = json.loads(run("qgroup", "verify", "--m", "4", "--q", "0.7", "--L", "2")[1])
    b = json.loads(run("verify", "qgroup", "--m", "4", "--q", "0.7", "--L", "2")[1])
    assert [c["residual"] for c in a["checks"]] == [c["residual"] for c in b["checks"]]
    assert a["pass"] and b["pass"]


def test_theorem2_cli():
    code, text = run("qgroup", "theorem2", "--L", "3", "--q", "0.5", "--M0", "0", "--M1", "1", "--M2", "1")
    js = json.loads(text)
    assert code == 0
    assert js["checks"][0]["details"]["matching_readings"] == ["intersection/v2-both"]


def test_simulate_duality_cli():
    code, text = run("simulate", "duality", "--L", "2", "--q", "0.5", "--n", "2", "--t", "1",
                     "--trials", "500", "--seed", "2", "--eta0", "31", "--xi0", "13")
    js = json.loads(text)
    assert js["seed"] == 2
    assert code == (0 if js["pass"] else 1)
    again = json.loads(run(*js["command"][1:])[1])
    assert again["checks"][0]["details"]["lhs"] == js["checks"][0]["details"]["lhs"]


def test_step_ic_csv(tmp_path):
    code, text = run("simulate", "step-ic", "--L", "80", "--q", "0.5", "--n", "2", "--t", "10",
                     "--m", "3", "--trials", "4", "--seed", "1", "--emit", "csv",
                     "--plot", str(tmp_path))
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["trial", "species", "m", "position", "rescaled"]
    assert len(rows) == 1 + 4 * 2
    assert code == 0
    assert (tmp_path / "step_ic.png").exists()


def test_suite_only_exit_code():
    code, text = run("suite", "--quick", "--only", "1", "--only", "6")
    js = json.loads(text)
    assert [c["check"] for c in js["checks"]] == ["1 generator validity", "6 single-species reduction"]
    assert code == 0 and js["pass"]


def test_suite_quick_exit_matches_verdict():
    code, text = run("suite", "--quick")
    js = json.loads(text)
    gating = [c for c in js["checks"] if c["details"].get("gating", True)]
    assert code == (0 if all(c["pass"] for c in gating) else 1)


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "dasep", "generator", "--L", "2", "--q", "0.5"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["dim"] == 16
