import sys

from config import DEFAULT_SEED, RESULTS_FILE, ENABLE_REPORT_LOGGING, validate_config
from verifier import TheoremVerifier
from report_logger import ReportLogger


def main():
    if not validate_config():
        return 2

    verifier = TheoremVerifier(seed=DEFAULT_SEED)

    print("\n🔬 Starting Verification...")
    print(f"Running {len(verifier.catalog())} checks with seed {verifier.seed}\n")

    verifier.run_all()

    # Print results
    verifier.print_results()

    # Export for analysis
    verifier.export_results(RESULTS_FILE)

    if ENABLE_REPORT_LOGGING:
        ReportLogger().log_run(verifier.reports, verifier.seed)

    return 0 if verifier.all_passed() else 1


if __name__ == "__main__":
    sys.exit(main())
