import math

ARTIFACT_VERSION = "0.3.0"

# n = 3 throughout: (n - 1) * omega_{n-1} with omega_2 = |S^2| = 4 pi
DIMENSION = 3
OMEGA_2 = 4.0 * math.pi
MASS_NORMALIZATION = (DIMENSION - 1) * OMEGA_2

CATALOG_FLAT = "flat"
CATALOG_SCHWARZSCHILD = "schwarzschild_slice"
CATALOG_HYPERBOLOID = "cmc_hyperboloid"
CATALOG_PERTURBED_FLAT = "perturbed_flat"
CATALOG_NAMES = (
    CATALOG_FLAT,
    CATALOG_SCHWARZSCHILD,
    CATALOG_HYPERBOLOID,
    CATALOG_PERTURBED_FLAT,
)

DEFAULT_GRID = (32, 64)

# step of the centered stencils used on top of analytic first derivatives
CATALOG_FD_STEP = 1e-3
CUSTOM_FD_STEP = 1e-3
# stencil half-width in steps for the 4th-order centered difference
FD_HALF_WIDTH = 2

DET_FLOOR = 1e-14
MARGIN_TOL = 1e-10
EPS_MOTS = 1e-6

EMBED_TOL = 1e-7
EMBED_MAX_ITER = 50
EMBED_INITIAL_DAMPING = 1e-3
EMBED_MAX_DAMPING = 1e10

GAUGE_MAX_ITER = 60
GAUGE_TOL = 1e-12

FLOW_STEPS = 200
FLOW_RANGE_FACTOR = 100.0
FLOW_DEVIATION_TOL = 1e-6

TAIL_FRACTION = 0.75
TAIL_WARN_RATIO = 1e-6

EXPANSION_UNTRAPPED = "untrapped"
EXPANSION_WEAK_OUTER = "weakly-outer-trapped"
EXPANSION_WEAK_INNER = "weakly-inner-trapped"
EXPANSION_MOTS = "MOTS"
EXPANSION_MITS = "MITS"
EXPANSION_BOTH = "MOTS-and-MITS"

TASK_KINDS = (
    "constraints",
    "masses",
    "embed",
    "flow",
    "shield",
    "fillin",
    "adm",
    "expansions",
)
REPORT_FORMATS = ("csv", "json")

OUT_DIR_ENV = "QLLAB_OUT_DIR"
DEFAULT_OUT_DIRNAME = "_results"

GRID_FORMAT = "qllab-grid"
SURFACE_FORMAT = "qllab-surface"
BARTNIK_FORMAT = "qllab-bartnik"
