from pathlib import Path
import json
import sys

import pandas as pd
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import run_rigidity as rr
from _padic_rigidity.series import MultiSeries


@pytest.fixture
def workspace(tmp_path):
    params = {"p": 3, "precision": 8, "degree_bound": 8, "level": 2, "workers": 1, "trials": 3}
    (tmp_path / "params.json").write_text(json.dumps(params), encoding="utf-8")
    return tmp_path


def run(workspace, *argv):
    base = ["--params", str(workspace / "params.json"),
            "--log-dir", str(workspace / "logs"), "--reports-dir", str(workspace / "reports")]
    return rr.main([*argv, *base])


def write_ideal(workspace, generators, variables=("X", "Y"), name="ideal.json"):
    path = workspace / name
    path.write_text(json.dumps({"vars": list(variables), "generators": list(generators)}), encoding="utf-8")
    return str(path)


def report(workspace, name):
    return json.loads((workspace / "reports" / name).read_text(encoding="utf-8"))


def test_lt_build_writes_law_and_brackets(workspace):
    code = run(workspace, "lt-build", "--group", "cyclotomic", "--a", "1", "--a", "0")
    assert code == 0
    out = workspace / "reports" / "lt_build"
    law = MultiSeries.from_json(json.loads((out / "group_law.json").read_text(encoding="utf-8")))
    assert {x: law.coefficient_int(x) for x in [(1, 0), (0, 1), (1, 1), (2, 0)]} == {
        (1, 0): 1, (0, 1): 1, (1, 1): 1, (2, 0): 0,
    }
    one = MultiSeries.from_json(json.loads((out / "bracket_1.json").read_text(encoding="utf-8")))
    assert one.coefficient_int((1,)) == 1
    zero = MultiSeries.from_json(json.loads((out / "bracket_0.json").read_text(encoding="utf-8")))
    assert zero.is_zero()


def test_lt_build_rejects_the_multiplicative_group(workspace):
    assert run(workspace, "lt-build", "--group", "multiplicative") == 2


def test_verify_cyclotomic(workspace):
    assert run(workspace, "verify", "--group", "cyclotomic") == 0
    payload = report(workspace, "verify.json")
    assert payload["all_passed"] is True
    assert payload["trials"] == 3


def test_verify_rejects_a_bad_endomorphism(workspace):
    bad = workspace / "bad_f.json"
    # X^2 is not X^3 mod 3
    bad.write_text(json.dumps({"p": 3, "f": {"terms": [{"exp": [1], "coeff": "3"}, {"exp": [2], "coeff": "1"}]}}),
                   encoding="utf-8")
    assert run(workspace, "verify", "--group", str(bad)) == 2


def test_scan_reports_near_zero_sets(workspace):
    ideal = write_ideal(workspace, ["X"])
    assert run(workspace, "scan", "--in", ideal, "--epsilon", "5") == 0
    payload = report(workspace, "scan.json")
    assert payload["tuples"] == 81
    members = payload["near_zero_sets"]["5"]["members"]
    assert len(members) == 9
    assert all(m.startswith("0:0,") for m in members)
    ledger = json.loads((workspace / "logs" / "provenance" / "run_scan.json").read_text(encoding="utf-8"))
    assert ledger["exit_code"] == 0
    assert ledger["config"]["epsilons"] == ["5"]


def test_scan_requires_an_input(workspace):
    assert run(workspace, "scan") == 2


def test_invalid_prime_is_an_input_error(workspace):
    ideal = write_ideal(workspace, ["X"])
    assert run(workspace, "scan", "--in", ideal, "--p", "4") == 2


def test_detect_special_relation(workspace):
    ideal = write_ideal(workspace, ["(1+X)**5 - (1+Y)"])
    assert run(workspace, "detect", "--in", ideal) == 0
    payload = report(workspace, "detect.json")
    assert payload["outcome"] == "special-found"
    assert payload["witness"]["m"] == {"value": "5", "modulus_exp": 2}


def test_detect_bounded_below(workspace):
    ideal = write_ideal(workspace, ["X - 3"], variables=("X",))
    assert run(workspace, "detect", "--in", ideal) == 1
    payload = report(workspace, "detect.json")
    assert payload["outcome"] == "bounded-below"
    assert payload["constant"] == "1/2"
    assert payload["exceptions"] == ["0:0"]


def test_profile_writes_json_and_csv(workspace):
    ideal = write_ideal(workspace, ["X - 3"], variables=("X",))
    assert run(workspace, "profile", "--in", ideal, "--level", "3") == 0
    payload = report(workspace, "profile.json")
    assert payload["stabilized"] is True
    df = pd.read_csv(workspace / "reports" / "profile.csv", dtype=str)
    assert list(df["max_min_valuation"]) == ["1", "1/2", "1/6", "1/18"]
    assert list(df["level"]) == ["0", "1", "2", "3"]


def test_changevars_moves_series_and_tuples(workspace):
    ideal = write_ideal(workspace, ["X + Y"])
    identity = workspace / "identity.json"
    identity.write_text(json.dumps({"permutation": [0, 1], "matrix": []}), encoding="utf-8")
    assert run(workspace, "changevars", "--in", ideal, "--cv", str(identity), "--tuple", "2:1,1:1") == 0
    payload = report(workspace, "changevars.json")
    assert payload["tuples"] == [{"input": "2:1,1:1", "image": "2:1,1:1"}]
    moved = MultiSeries.from_json(payload["generators"][0])
    assert moved.coefficient_int((1, 0)) == 1 and moved.coefficient_int((0, 1)) == 1

    shear = workspace / "shear.json"
    shear.write_text(json.dumps({"permutation": [0, 1],
                                 "matrix": [{"i": 1, "j": 0, "value": "-5", "modulus_exp": 10}]}),
                     encoding="utf-8")
    assert run(workspace, "changevars", "--in", ideal, "--cv", str(shear), "--tuple", "2:1,2:5",
               "--out", "shear_out.json") == 0
    assert report(workspace, "shear_out.json")["tuples"][0]["image"] == "2:1,0:0"


def test_changevars_requires_a_change_of_variables(workspace):
    ideal = write_ideal(workspace, ["X + Y"])
    assert run(workspace, "changevars", "--in", ideal) == 2


def test_reports_are_byte_identical_across_runs(workspace):
    ideal = write_ideal(workspace, ["(1+X)**4 - (1+Y) + 9*X*Y"])
    assert run(workspace, "scan", "--in", ideal, "--epsilon", "1/2", "--out", "a.json") == 0
    assert run(workspace, "scan", "--in", ideal, "--epsilon", "1/2", "--workers", "3", "--out", "b.json") == 0
    first = (workspace / "reports" / "a.json").read_bytes()
    assert first == (workspace / "reports" / "b.json").read_bytes()
    assert first.endswith(b"\n")


def test_series_input_round_trips(workspace):
    ideal = write_ideal(workspace, ["X*Y - 3"])
    assert run(workspace, "changevars", "--in", ideal, "--cv", _identity(workspace)) == 0
    series_file = workspace / "series.json"
    series_file.write_text(json.dumps(report(workspace, "changevars.json")["generators"][0]), encoding="utf-8")
    assert run(workspace, "scan", "--in", str(series_file), "--epsilon", "1", "--out", "from_series.json") == 0
    assert run(workspace, "scan", "--in", ideal, "--epsilon", "1", "--out", "from_expr.json") == 0
    assert (workspace / "reports" / "from_series.json").read_bytes() == \
        (workspace / "reports" / "from_expr.json").read_bytes()


def _identity(workspace):
    path = workspace / "identity.json"
    path.write_text(json.dumps({"permutation": [0, 1], "matrix": []}), encoding="utf-8")
    return str(path)
