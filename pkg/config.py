"""
Orbit Certifier Configuration
All tolerances, solver defaults, file paths and logging settings.
Environment variables override defaults where noted.
"""
import os
from pathlib import Path

# ── Base Paths ────────────────────────────────────────────────
BASE_DIR = Path(__file__).resolve().parent
DATA_DIR = BASE_DIR / "data"
EXAMPLES_DIR = DATA_DIR / "examples"

# ── Reproducibility ──────────────────────────────────────────
DEFAULT_SEED = int(os.environ.get("ORBITCERT_SEED", 0))

# ── Dense Kernels ────────────────────────────────────────────
NULLSPACE_REL_TOL = 1e-9          # singular values <= tol * sigma_max span the kernel
PD_RATIO_TOL = 1e-12              # min/max eigenvalue ratio for log/sqrt/inv maps
TRACE_TOL = 1e-12                 # tracelessness of basis elements

# ── Lie Algebra Structure ────────────────────────────────────
INDEPENDENCE_TOL = 1e-10          # min/max eigenvalue of the basis Gram matrix
CLOSURE_TOL = 1e-9                # unexplained bracket norm
JACOBI_TOL = 1e-8
KILLING_CLOSURE_TOL = 1e-8        # killing_matrix refuses presentations above this
SEMISIMPLE_REL_TOL = 1e-8

# ── Cartan Splits & Compatibility ────────────────────────────
MEMBERSHIP_TOL = 1e-8             # least-squares residual for [k,k] in k etc.
KILLING_SIGN_REL_TOL = 1e-8
COMPAT_RESIDUAL_TOL = 1e-9        # certificate k/p residuals
CERT_EIG_RATIO_TOL = 1e-6         # certificate min/max eigenvalue ratio of S
TRIPLE_SYSTEM_TOL = 1e-8
SINGULAR_DET_TOL = 1e-12          # |det g0| below this is singular

# Positive-definite element search inside a subspace of sym(n)
PD_SEARCH_ITERATIONS = 500
PD_RANDOM_RESTARTS = 8
PD_ACCEPT_RATIO = 1e-6            # accept when lambda_min > ratio * lambda_max
CENTERING_MAX_ITER = 100
CENTERING_TOL = 1e-20             # Newton decrement^2 / 2

# ── Symmetric Space Geometry ─────────────────────────────────
TANGENT_TRACE_TOL = 1e-10
DET_TOL = 1e-10
ORBIT_DROP_TOL = 1e-10            # Gram-Schmidt drop tolerance for Killing fields
ORBIT_RANK_GAP = 1e-7             # residuals between drop tol and this are ambiguous
DEGENERATE_PLANE_TOL = 1e-14
FD_STEP = 1e-4                    # central difference step for f'(t)
NORMALITY_TOL = 1e-6
VARIATIONAL_IDENTITY_TOL = 1e-5
F_AT_FOOT_TOL = 1e-9              # |f(0)| at a totally geodesic foot
F_DOT_FLOOR = -1e-9               # f'(t) is non-negative up to this slack

# ── Orbit Minimization ───────────────────────────────────────
DEFAULT_MAX_ITER = int(os.environ.get("ORBITCERT_MAX_ITER", 200))
MEAN_CURVATURE_TOL = 1e-8         # descent stops below this
ARMIJO_INITIAL_STEP = 1.0
ARMIJO_SHRINK = 0.5
ARMIJO_SUFFICIENT_DECREASE = 1e-4
ARMIJO_MAX_BACKTRACKS = 50
ARMIJO_ROUNDOFF_SLACK = 1e-13     # absolute slack on F for round-off at convergence
DIVERGENCE_RADIUS = float(os.environ.get("ORBITCERT_DIVERGENCE_RADIUS", 50.0))
FIXED_SET_CONSTRAINT_TOL = 1e-9
PROPORTIONALITY_TOL = 1e-6
RANDOM_START_SCALE = 0.5          # geodesic radius of seeded starts in the fixed set

# ── Certification Thresholds ─────────────────────────────────
TG_RESIDUAL_TOL = 1e-6            # max |II| on an orthonormal orbit frame
MINIMAL_MEAN_CURVATURE_TOL = 1e-7
CROSS_PATH_COMPAT_TOL = 1e-6
CROSS_PATH_DISTANCE_TOL = 1e-5

# ── Verify Suite ─────────────────────────────────────────────
VARIATIONAL_GEODESICS = 10        # seeded normal geodesics per verify run
VARIATIONAL_SAMPLES = (0.0, 0.25, 0.5, 0.75, 1.0)
SLICE_SAMPLES = (-1.0, -0.5, 0.5, 1.0)
VERIFY_PARALLEL = True            # run kernel and descent paths concurrently

# ── Documents & Catalog ──────────────────────────────────────
SCHEMA_VERSION = 1
CATALOG_FUZZY_THRESHOLD = 70      # fuzzywuzzy score for name suggestions

# ── Logging ──────────────────────────────────────────────────
LOG_DIR = BASE_DIR / "logs"
LOG_FILE = LOG_DIR / "orbitcert.log"
LOG_TO_FILE = os.environ.get("ORBITCERT_LOG_TO_FILE", "0") == "1"
LOG_MAX_BYTES = 5 * 1024 * 1024  # 5 MB per log file
LOG_BACKUP_COUNT = 3
LOG_LEVEL = os.environ.get("ORBITCERT_LOG_LEVEL", "WARNING")
LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s [%(run_id)s]: %(message)s"
