import os
from dotenv import load_dotenv

load_dotenv()

# -- Numeric Tolerances --
DEFAULT_TOL = 1e-10
MIN_NORM_TOL = 1e-12
ZERO_SINGULAR_TOL = 1e-9
HERMITIAN_TOL = 1e-12
DET_TOL = 1e-10

# -- Size Guards --
MAX_OMEGA_SIZE = 200_000  # n^d cap for omega_full
MARGIN_SUBSET_CAP = 20  # brute-force margin enumerates 2^|ws| subsets
MIN_NORM_MAX_ITER = 10_000

# ============================================================================
# CAPACITY SOLVER SETTINGS
# ============================================================================

# -- Descent --
CAPACITY_TOL = 1e-12
CAPACITY_MAX_ITER = 200_000
CAPACITY_FLOOR = 1e-14  # values below this flag capacity 0
ARMIJO_FACTOR = 0.5
ARMIJO_C = 1e-4
MIN_STEP = 1e-20
MAX_STEP = 1e10

# -- Stall Detection --
STALL_WINDOW = 50
STALL_RTOL = 1e-14
STALL_GAP_RTOL = 1e-7  # relative drop of f - capa over one window when capa is known

# -- Ball Solver --
BALL_TOL = 1e-12
BALL_MAX_ITER = 50_000

# -- Sinkhorn --
SINKHORN_TOL = 1e-12
SINKHORN_MAX_SWEEPS = 1000

# -- Gap Witness --
GAP_WITNESS_TOL = 1e-12
GAP_WITNESS_MAX_ITER = 20_000

# ============================================================================
# SAMPLING SETTINGS
# ============================================================================

DEFAULT_SEED = int(os.getenv("SCALING_SEED", "0"))
FREE_MOMENT_SAMPLES = 100
FREE_DIAMETER_SAMPLES = 200
FREE_DIAMETER_RADIUS = 5.0
ROUNDING_BITS = 64

# ============================================================================
# VERIFICATION SETTINGS
# ============================================================================

# -- Probe Grid --
PROBE_EPS = 1e-6
PROBE_R_MAX = 240.0
PROBE_R_STEP = 2.0

# -- Report Logging --
ENABLE_REPORT_LOGGING = True
REPORT_DB_PATH = os.getenv("SCALING_REPORT_DB", "reports.db")

# -- Export --
CSV_EXPORT_PATH = os.getenv("SCALING_CSV_EXPORT", "reports_export.csv")
RESULTS_FILE = "verification_results.json"
CSV_SIGNIFICANT_DIGITS = 17

# -- Console --
VERBOSE = os.getenv("SCALING_VERBOSE", "0") == "1"
PRINT_EVERY = 1000

# ============================================================================
# ENVIRONMENT VARIABLES (Optional, in .env file)
# ============================================================================

# SCALING_SEED
# SCALING_REPORT_DB
# SCALING_CSV_EXPORT
# SCALING_VERBOSE

# ============================================================================
# VALIDATION RULES
# ============================================================================

def validate_config():
    """Validate configuration settings."""
    errors = []

    if DEFAULT_TOL <= 0 or MIN_NORM_TOL <= 0 or CAPACITY_TOL <= 0:
        errors.append("Tolerances must be positive")

    if not 0 < ARMIJO_FACTOR < 1:
        errors.append("ARMIJO_FACTOR should be between 0 and 1")

    if not 0 < STALL_GAP_RTOL < 1:
        errors.append("STALL_GAP_RTOL should be between 0 and 1")

    if not 0 < ARMIJO_C < 0.5:
        errors.append("ARMIJO_C should be between 0 and 0.5")

    if MARGIN_SUBSET_CAP < 1 or MARGIN_SUBSET_CAP > 24:
        errors.append("MARGIN_SUBSET_CAP should be between 1 and 24")

    if DEFAULT_SEED < 0:
        errors.append("SCALING_SEED must be a nonnegative integer")

    if PROBE_R_STEP <= 0 or PROBE_R_MAX <= PROBE_R_STEP:
        errors.append("PROBE_R_MAX should exceed PROBE_R_STEP > 0")

    if ROUNDING_BITS < 8:
        errors.append("ROUNDING_BITS should be at least 8")

    if errors:
        print("⚠️  Configuration Validation Errors:")
        for error in errors:
            print(f"   - {error}")
        return False

    print("✅ Configuration validated successfully")
    return True

if __name__ == "__main__":
    validate_config()
