"""
Unit tests for the SQLite report log.

Core claims:
    - A logged run gets an id and stores one row per report
    - Per-check statistics count pass / fail / skipped across runs
    - Exact rationals in measured values survive as "p/q" text
    - An empty database prints a summary without errors
"""

import json
from fractions import Fraction

import pandas as pd
from pytest import approx

from report_logger import ReportLogger


# -- Helpers -----------------------------------------------------------------

def _report(check, status, params=None, measured=None, bound=None, runtime=0.1, reason=None):
    return {
        "check": check,
        "params": params or {},
        "status": status,
        "measured": measured or {},
        "bound": bound,
        "runtime": runtime,
        "counterexample": {"params": params or {}} if status == "fail" else None,
        "reason": reason,
    }


def _sample_reports():
    return [
        _report("kravtsov", "pass", {"n": 3}, {"lambda_111": Fraction(1, 4)}, bound=3),
        _report("kravtsov", "pass", {"n": 4}, {"lambda_111": Fraction(1, 8)}, bound=4),
        _report("margin-b", "fail", {"n": 5}, {"distance": 0.5}, bound=0.25),
        _report("margin-b", "skipped", {"n": 2}, reason="needs n >= 3"),
    ]


# == Logging ================================================================

class TestLogRun:
    def test_first_run_id(self, report_db):
        assert ReportLogger(report_db).log_run(_sample_reports(), seed=0) == 1

    def test_run_ids_increase(self, report_db):
        logger = ReportLogger(report_db)
        first = logger.log_run(_sample_reports(), seed=0)
        second = logger.log_run(_sample_reports()[:1], seed=1)
        assert second == first + 1

    def test_rows_stored(self, report_db):
        logger = ReportLogger(report_db)
        run_id = logger.log_run(_sample_reports(), seed=0)
        rows = logger.get_run(run_id)
        assert len(rows) == 4
        assert list(rows["status"]) == ["pass", "pass", "fail", "skipped"]
        assert json.loads(rows.loc[0, "measured"]) == {"lambda_111": "1/4"}
        assert json.loads(rows.loc[0, "params"]) == {"n": 3}

    def test_missing_bound_is_null(self, report_db):
        logger = ReportLogger(report_db)
        rows = logger.get_run(logger.log_run(_sample_reports(), seed=0))
        assert pd.isna(rows.loc[3, "bound"])

    def test_run_summary(self, report_db):
        logger = ReportLogger(report_db)
        logger.log_run(_sample_reports(), seed=42)
        run = logger.get_recent_runs(1).iloc[0]
        assert run["seed"] == 42
        assert run["total_reports"] == 4
        assert (run["passed"], run["failed"], run["skipped"]) == (2, 1, 1)
        assert run["checks"] == "kravtsov,margin-b"
        assert run["runtime"] == approx(0.4)


# == Queries ================================================================

class TestStatistics:
    def test_pass_rate(self, report_db):
        logger = ReportLogger(report_db)
        logger.log_run(_sample_reports(), seed=0)
        stats = logger.get_check_statistics()
        assert stats.loc["kravtsov", "pass_rate"] == approx(100.0)
        assert stats.loc["margin-b", "pass_rate"] == approx(0.0)
        assert stats.loc["margin-b", "skipped"] == 1

    def test_accumulates_over_runs(self, report_db):
        logger = ReportLogger(report_db)
        logger.log_run(_sample_reports(), seed=0)
        logger.log_run(_sample_reports(), seed=1)
        assert logger.get_check_statistics().loc["kravtsov", "total"] == 4

    def test_recent_runs_newest_first(self, report_db):
        logger = ReportLogger(report_db)
        for seed in range(3):
            logger.log_run(_sample_reports(), seed=seed)
        assert list(logger.get_recent_runs(2)["seed"]) == [2, 1]


class TestExport:
    def test_export_csv(self, report_db, tmp_path):
        logger = ReportLogger(report_db)
        logger.log_run(_sample_reports(), seed=0)
        frame = pd.read_csv(logger.export_to_csv(str(tmp_path / "reports.csv")))
        assert len(frame) == 4
        assert {"run_id", "check_id", "status", "measured"} <= set(frame.columns)

    def test_empty_summary(self, report_db, capsys):
        ReportLogger(report_db).print_summary_report()
        assert "No verification runs logged yet" in capsys.readouterr().out

    def test_summary_lists_checks(self, report_db, capsys):
        logger = ReportLogger(report_db)
        logger.log_run(_sample_reports(), seed=0)
        logger.print_summary_report()
        out = capsys.readouterr().out
        assert "kravtsov" in out
        assert "margin-b" in out
