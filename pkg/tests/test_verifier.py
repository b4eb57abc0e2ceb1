"""
Unit tests for the check catalog and its reports.

Core claims:
    - Catalog checks pass on small parameter grids
    - Out-of-range parameters are reported as skipped, never as failures
    - Unknown check ids and parameter names are rejected with the catalog listed
    - Reports export to JSON with rationals as "p/q" and to CSV one row per case
    - The same seed reproduces the same randomized measurements
"""

import json
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from verifier import TheoremVerifier, reports_to_frame, to_jsonable, CATALOG


# -- Helpers -----------------------------------------------------------------

def _verifier(seed=0):
    return TheoremVerifier(seed=seed, verbose=False)


def _statuses(reports):
    return [r["status"] for r in reports]


# == Catalog ================================================================

class TestCatalog:
    def test_every_method_exists(self):
        v = _verifier()
        for check_id, (method, grid) in CATALOG.items():
            assert callable(getattr(v, method)), check_id
            assert grid

    def test_unknown_check(self):
        with pytest.raises(KeyError) as err:
            _verifier().run("nope")
        assert "Catalog" in str(err.value)
        assert "kravtsov" in str(err.value)

    def test_unknown_parameter(self):
        with pytest.raises(KeyError) as err:
            _verifier().run("kravtsov", {"m": [3]})
        assert "no parameter 'm'" in str(err.value)

    def test_scalar_parameter_accepted(self):
        reports = _verifier().run("kravtsov", {"n": 3})
        assert len(reports) == 1
        assert reports[0]["params"] == {"n": 3}


# == Individual checks ======================================================

class TestChecks:
    def test_kravtsov(self):
        reports = _verifier().run("kravtsov", {"n": [3, 4, 5]})
        assert _statuses(reports) == ["pass"] * 3
        assert reports[0]["measured"]["lambda_111"] == Fraction(1, 4)
        assert reports[2]["measured"]["slice_equations"] == 15

    def test_margin_b(self):
        reports = _verifier().run("margin-b", {"n": [3, 4, 5]})
        assert _statuses(reports) == ["pass"] * 3
        for r in reports:
            assert not r["measured"]["affine_member"]
            assert r["measured"]["certified_lower"] > 0
            assert r["measured"]["distance"] <= r["bound"] * (1 + 1e-9)

    def test_margin_a(self):
        assert _statuses(_verifier().run("margin-a", {"d": [3, 4, 5]})) == ["pass"] * 3

    def test_qubit_free(self):
        assert _statuses(_verifier().run("qubit-free", {"r": [1, 2, 3]})) == ["pass"] * 3

    def test_qubit_free_single_block(self):
        report = _verifier().run("qubit-free", {"r": [1]})[0]
        assert report["status"] == "pass"
        assert report["measured"]["rows_free"] is None
        assert report["measured"]["odd_free"]

    def test_wn_free(self):
        assert _statuses(_verifier().run("wn-free", {"n": [3, 4]})) == ["pass"] * 2

    def test_quiver_small(self):
        reports = _verifier().run("quiver", {"n": [2, 3], "d": [2, 3]})
        assert _statuses(reports) == ["pass"] * 4
        assert all("gap_witness" in r["measured"] for r in reports)

    def test_oracle_margin(self):
        assert _statuses(_verifier().run("oracles", {"oracle": ["margin-omega22"]})) == ["pass"]

    def test_diameter_q(self):
        assert _statuses(_verifier().run("diameter-q", {"l": [2, 3]})) == ["pass"] * 2

    def test_pad_on_diameter_array(self):
        report = _verifier().run("pad", {"l": [2], "extra": [3]})[0]
        assert report["status"] == "pass"
        assert report["measured"]["n"] == report["measured"]["t"] + 3
        assert report["measured"]["profile_error"] <= 1e-12
        assert report["bound"] == pytest.approx(0.5 ** (report["measured"]["t"] / report["measured"]["n"]))


class TestSkips:
    @pytest.mark.parametrize("check_id,params", [
        ("margin-b", {"n": [2]}),
        ("margin-a", {"d": [2]}),
        ("kravtsov", {"n": [1]}),
        ("margin-c", {"n": [3], "r": [1]}),
        ("oracles", {"oracle": ["unknown"]}),
        ("pad", {"l": [2], "extra": [0]}),
    ])
    def test_out_of_range_skipped(self, check_id, params):
        reports = _verifier().run(check_id, params)
        assert _statuses(reports) == ["skipped"]
        assert reports[0]["reason"]
        assert reports[0]["counterexample"] is None

    def test_skips_do_not_fail_run(self):
        v = _verifier()
        v.run("margin-b", {"n": [2, 3]})
        assert v.all_passed()
        assert v.summarize()["skipped"] == 1


# == Summaries and export ===================================================

class TestReporting:
    def test_summarize_counts(self):
        v = _verifier()
        v.run("kravtsov", {"n": [2, 3, 4]})
        counts = v.summarize()
        assert counts["pass"] == 2
        assert counts["skipped"] == 1
        assert counts["fail"] == 0
        assert counts["total"] == 3
        assert counts["runtime"] >= 0

    def test_all_passed_false_on_failure(self):
        v = _verifier()
        report = {"check": "x", "params": {}, "status": "fail", "measured": {}, "bound": None,
                  "runtime": 0.0, "counterexample": None, "reason": "boom"}
        assert not v.all_passed([report])

    def test_run_all_in_catalog_order(self):
        v = _verifier()
        reports = v.run_all(["kravtsov", "margin-b"], {"kravtsov": {"n": [3]}, "margin-b": {"n": [3]}})
        assert [r["check"] for r in reports] == ["margin-b", "kravtsov"]

    def test_export_json(self, tmp_path):
        v = _verifier()
        v.run("kravtsov", {"n": [3]})
        path = v.export_results(str(tmp_path / "out.json"), fmt="json")
        data = json.loads(open(path).read())
        assert set(data) == {"config", "summary", "reports"}
        assert data["config"]["seed"] == 0
        assert data["reports"][0]["measured"]["lambda_111"] == "1/4"
        assert data["reports"][0]["measured"]["total"] == "3"

    def test_export_csv(self, tmp_path):
        v = _verifier()
        v.run("kravtsov", {"n": [3, 4]})
        path = v.export_results(str(tmp_path / "out.csv"), fmt="csv")
        frame = pd.read_csv(path)
        assert len(frame) == 2
        assert list(frame["status"]) == ["pass", "pass"]

    def test_export_bad_format(self, tmp_path):
        with pytest.raises(ValueError):
            _verifier().export_results(str(tmp_path / "out.xml"), fmt="xml")

    def test_frame_columns(self):
        v = _verifier()
        frame = reports_to_frame(v.run("margin-b", {"n": [3]}))
        assert list(frame.columns) == ["check", "params", "status", "bound", "runtime", "measured", "reason"]
        assert frame.loc[0, "bound"] > 0

    def test_print_results_empty(self, capsys):
        _verifier().print_results()
        assert "No checks were run" in capsys.readouterr().out


class TestJsonable:
    def test_fraction(self):
        assert to_jsonable(Fraction(3, 4)) == "3/4"

    def test_numpy_values(self):
        assert to_jsonable(np.int64(3)) == 3
        assert to_jsonable(np.float64(0.5)) == 0.5
        assert to_jsonable(np.bool_(True)) is True
        assert to_jsonable(np.array([1, 2])) == [1, 2]


class TestDeterminism:
    def test_same_seed_same_measurements(self):
        a = _verifier(seed=7).run("wn-free", {"n": [3]})[0]["measured"]
        b = _verifier(seed=7).run("wn-free", {"n": [3]})[0]["measured"]
        assert a == b
