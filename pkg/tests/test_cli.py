"""
End-to-end tests for the command-line entry point.

Core claims:
    - construct writes a JSON payload the other subcommands read back
    - verify exits 0 when every case passes and 2 on an unknown check
    - emit converts a payload to CSV with a header row
    - range and list parameter syntax parse to Python values
"""

import json

import pandas as pd
import pytest
from pytest import approx

import main as cli


# -- Helpers -----------------------------------------------------------------

def _construct(tmp_path, *args, name="obj.json"):
    out = str(tmp_path / name)
    assert cli.main(["construct", *args, "--out", out]) == cli.EXIT_OK
    return out


# == Parameter parsing ======================================================

class TestParseValues:
    def test_range(self):
        assert cli.parse_values("3..6") == [3, 4, 5, 6]

    def test_list(self):
        assert cli.parse_values("2,3") == [2, 3]

    def test_floats_and_words(self):
        assert cli.parse_values("0.5,W4") == [0.5, "W4"]

    def test_params(self):
        assert cli.parse_params(["n=3..4", "r=2"]) == {"n": [3, 4], "r": [2]}

    def test_params_missing_equals(self):
        with pytest.raises(cli.UsageError):
            cli.parse_params(["n"])


# == construct and friends ==================================================

class TestConstruct:
    def test_kravtsov_array(self, tmp_path):
        path = _construct(tmp_path, "kravtsov", "--n", "4")
        kind, arr = cli.load_object(path)
        assert kind == "array"
        assert arr.total() == 4

    def test_missing_flag(self, tmp_path):
        assert cli.main(["construct", "stacked", "--n", "3"]) == cli.EXIT_USAGE

    def test_round_tensor(self, tmp_path):
        path = _construct(tmp_path, "round-tensor", "--l", "2", "--bits", "16")
        assert cli.load_object(path)[0] == "tensor"

    def test_minnorm_on_written_file(self, tmp_path):
        path = _construct(tmp_path, "qubit", "--d", "3")
        out = str(tmp_path / "mn.json")
        assert cli.main(["minnorm", path, "--out", out]) == cli.EXIT_OK
        result = json.loads(open(out).read())
        assert result["distance"] == approx(2 ** -0.5, abs=1e-9)
        assert result["certificate"] == "separating"

    def test_affhull(self, tmp_path):
        path = _construct(tmp_path, "gamma3", "--n", "3")
        out = str(tmp_path / "aff.json")
        assert cli.main(["affhull", path, "--out", out]) == cli.EXIT_OK
        assert json.loads(open(out).read())["member"] is False

    def test_wrong_payload_kind(self, tmp_path):
        path = _construct(tmp_path, "kravtsov", "--n", "3")
        assert cli.main(["minnorm", path]) == cli.EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert cli.main(["minnorm", str(tmp_path / "none.json")]) == cli.EXIT_USAGE

    def test_svmin_diameter(self, tmp_path):
        out = str(tmp_path / "sv.json")
        assert cli.main(["svmin", "--l", "2", "--out", out]) == cli.EXIT_OK
        assert json.loads(open(out).read())["zero_count"] == 3


class TestEmit:
    def test_weightset_to_csv(self, tmp_path):
        path = _construct(tmp_path, "omega", "--n", "2", "--d", "1")
        out = str(tmp_path / "ws.csv")
        assert cli.main(["emit", path, "--format", "csv", "--out", out]) == cli.EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["c0", "c1"]
        assert list(frame["c0"]) == [0.5, -0.5]

    def test_needs_out(self, tmp_path):
        path = _construct(tmp_path, "omega", "--n", "2", "--d", "1")
        assert cli.main(["emit", path]) == cli.EXIT_USAGE


class TestProbe:
    def test_csv_header(self, tmp_path):
        path = _construct(tmp_path, "diameter", "--l", "2")
        out = str(tmp_path / "probe.csv")
        code = cli.main(["probe", path, "--capa", "0.5", "--r-max", "2", "--step", "1",
                         "--format", "csv", "--out", out])
        assert code == cli.EXIT_OK
        assert open(out).readline().strip() == "R,achieved,gap"


# == verify =================================================================

class TestVerify:
    def test_passing_run(self, tmp_path):
        out = str(tmp_path / "verify.json")
        code = cli.main(["verify", "--check", "kravtsov", "--param", "n=3..5", "--no-log", "--out", out])
        assert code == cli.EXIT_OK
        data = json.loads(open(out).read())
        assert data["summary"]["pass"] == 3

    def test_logged_run(self, report_db):
        code = cli.main(["verify", "--check", "kravtsov", "--param", "n=3", "--db", report_db])
        assert code == cli.EXIT_OK
        assert cli.main(["reports", "--db", report_db]) == cli.EXIT_OK

    def test_min_norm_tol_by_default(self, tmp_path):
        out = str(tmp_path / "verify.json")
        cli.main(["verify", "--check", "kravtsov", "--param", "n=3", "--no-log", "--out", out])
        assert json.loads(open(out).read())["config"]["tol"] == 1e-12

    def test_explicit_tol_wins(self, tmp_path):
        out = str(tmp_path / "verify.json")
        cli.main(["verify", "--check", "kravtsov", "--param", "n=3", "--no-log", "--tol", "1e-9", "--out", out])
        assert json.loads(open(out).read())["config"]["tol"] == 1e-9

    def test_unknown_check(self):
        assert cli.main(["verify", "--check", "nope", "--no-log"]) == cli.EXIT_USAGE

    def test_unknown_param(self):
        assert cli.main(["verify", "--check", "kravtsov", "--param", "m=3", "--no-log"]) == cli.EXIT_USAGE

    def test_param_needs_single_check(self):
        code = cli.main(["verify", "--check", "kravtsov", "--check", "margin-b", "--param", "n=3", "--no-log"])
        assert code == cli.EXIT_USAGE

    def test_report_roundtrip_through_emit(self, tmp_path):
        report = str(tmp_path / "verify.json")
        cli.main(["verify", "--check", "kravtsov", "--param", "n=3", "--no-log", "--out", report])
        out = str(tmp_path / "verify.csv")
        assert cli.main(["emit", report, "--format", "csv", "--out", out]) == cli.EXIT_OK
        assert list(pd.read_csv(out)["status"]) == ["pass"]


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
