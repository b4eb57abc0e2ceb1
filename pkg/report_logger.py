import sqlite3
from datetime import datetime, timezone
import json
import pandas as pd

from config import REPORT_DB_PATH, CSV_EXPORT_PATH, CSV_SIGNIFICANT_DIGITS
from verifier import to_jsonable


class ReportLogger:
    """
    Logs verification runs and their reports to a SQLite database.

    One row per run in verification_runs, one row per (check, parameter set)
    in verification_reports.
    """

    def __init__(self, db_path=REPORT_DB_PATH):
        """
        Initialize Report Logger.

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = db_path
        self._create_tables()

    def _create_tables(self):
        """Create database tables if they don't exist."""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute('''
            CREATE TABLE IF NOT EXISTS verification_runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                seed INTEGER NOT NULL,
                checks TEXT NOT NULL,
                total_reports INTEGER DEFAULT 0,
                passed INTEGER DEFAULT 0,
                failed INTEGER DEFAULT 0,
                skipped INTEGER DEFAULT 0,
                runtime REAL DEFAULT 0,
                created_at TEXT NOT NULL
            )
        ''')

        cursor.execute('''
            CREATE TABLE IF NOT EXISTS verification_reports (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER NOT NULL,
                check_id TEXT NOT NULL,
                params TEXT NOT NULL,
                status TEXT NOT NULL, -- 'pass', 'fail', 'skipped'
                bound REAL,
                runtime REAL,
                measured TEXT,
                counterexample TEXT,
                reason TEXT,
                created_at TEXT NOT NULL,
                FOREIGN KEY (run_id) REFERENCES verification_runs (id)
            )
        ''')

        conn.commit()
        conn.close()

    def log_run(self, reports, seed):
        """
        Store one verification run.

        Args:
            reports: Report dicts from TheoremVerifier
            seed: Seed the run used

        Returns:
            The new run id, or None when the insert failed
        """
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()
        now = datetime.now(timezone.utc).isoformat()

        statuses = [r["status"] for r in reports]
        checks = sorted({r["check"] for r in reports})
        try:
            cursor.execute('''
                INSERT INTO verification_runs (
                    seed, checks, total_reports, passed, failed, skipped, runtime, created_at
                ) VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            ''', (
                int(seed), ",".join(checks), len(reports),
                statuses.count("pass"), statuses.count("fail"), statuses.count("skipped"),
                float(sum(r["runtime"] for r in reports)), now,
            ))
            run_id = cursor.lastrowid

            for r in reports:
                bound = r["bound"]
                try:
                    bound = float(bound) if bound is not None else None
                except (TypeError, ValueError):
                    bound = None
                cursor.execute('''
                    INSERT INTO verification_reports (
                        run_id, check_id, params, status, bound, runtime,
                        measured, counterexample, reason, created_at
                    ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                ''', (
                    run_id, r["check"], json.dumps(r["params"], default=to_jsonable), r["status"],
                    bound, float(r["runtime"]),
                    json.dumps(r["measured"], default=to_jsonable),
                    json.dumps(r["counterexample"], default=to_jsonable) if r["counterexample"] else None,
                    r["reason"], now,
                ))

            conn.commit()
            print(f"✅ Verification run #{run_id} logged ({len(reports)} reports)")
            return run_id

        except Exception as e:
            print(f"❌ Failed to log verification run: {e}")
            return None
        finally:
            conn.close()

    def get_run(self, run_id):
        """Reports of one run as a DataFrame, in insertion order."""
        conn = sqlite3.connect(self.db_path)
        df = pd.read_sql_query(
            "SELECT * FROM verification_reports WHERE run_id = ? ORDER BY id", conn, params=(run_id,))
        conn.close()
        return df

    def get_recent_runs(self, limit=10):
        conn = sqlite3.connect(self.db_path)
        df = pd.read_sql_query(
            "SELECT * FROM verification_runs ORDER BY id DESC LIMIT ?", conn, params=(limit,))
        conn.close()
        return df

    def get_check_statistics(self):
        """
        Pass / fail / skip counts per check over every logged run.

        Returns:
            DataFrame indexed by check id
        """
        conn = sqlite3.connect(self.db_path)
        query = '''
            SELECT
                check_id,
                COUNT(*) as total,
                SUM(CASE WHEN status = 'pass' THEN 1 ELSE 0 END) as passed,
                SUM(CASE WHEN status = 'fail' THEN 1 ELSE 0 END) as failed,
                SUM(CASE WHEN status = 'skipped' THEN 1 ELSE 0 END) as skipped,
                AVG(runtime) as avg_runtime,
                MAX(runtime) as max_runtime
            FROM verification_reports
            GROUP BY check_id
            ORDER BY check_id
        '''
        df = pd.read_sql_query(query, conn)
        conn.close()

        df = df.fillna(0)
        df["pass_rate"] = (df["passed"] / df["total"] * 100).where(df["total"] > 0, 0.0)
        return df.set_index("check_id")

    def export_to_csv(self, filename=CSV_EXPORT_PATH):
        """Export all logged reports to CSV."""
        conn = sqlite3.connect(self.db_path)
        df = pd.read_sql_query("SELECT * FROM verification_reports ORDER BY run_id, id", conn)
        conn.close()

        df.to_csv(filename, index=False, float_format=f"%.{CSV_SIGNIFICANT_DIGITS}g")
        print(f"✅ Reports exported to {filename}")
        return filename

    def print_summary_report(self, limit=5):
        """Print per-check statistics and the most recent runs."""
        stats = self.get_check_statistics()
        runs = self.get_recent_runs(limit)

        print(f"\n{'='*60}")
        print(f"📊 VERIFICATION REPORT SUMMARY ({len(runs)} recent runs)")
        print(f"{'='*60}")

        if stats.empty:
            print("ℹ️  No verification runs logged yet")
            print(f"{'='*60}\n")
            return

        for check_id, row in stats.iterrows():
            mark = "✅" if row["failed"] == 0 else "❌"
            print(f"{mark} {check_id:<16} pass {row['passed']:.0f}/{row['total']:.0f}"
                  f" | fail {row['failed']:.0f} | skip {row['skipped']:.0f}"
                  f" | avg {row['avg_runtime']:.2f}s")

        print(f"\nRecent Runs:")
        for _, run in runs.iterrows():
            print(f"   #{run['id']} seed={run['seed']} {run['passed']}/{run['total_reports']} passed"
                  f" ({run['runtime']:.1f}s) {run['created_at']}")
        print(f"{'='*60}\n")


# Example usage
if __name__ == "__main__":
    from verifier import TheoremVerifier

    verifier = TheoremVerifier()
    reports = verifier.run("kravtsov", {"n": [3, 4, 5]})

    logger = ReportLogger()
    logger.log_run(reports, verifier.seed)
    logger.print_summary_report()
