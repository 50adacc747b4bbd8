THREADS_VAR = "NOVAS_THREADS"
"Worker pool size for rolling evaluation; unset or 0 uses every CPU"

PATHS_VAR = "NOVAS_PATHS"
DEFAULT_PATHS = 5000
"Default number of simulated innovation paths (M)"

SEED_VAR = "NOVAS_SEED"
DEFAULT_SEED = 0
"Default master seed"

ALPHA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
"Candidate alpha values, each calibrated and forecast separately"

UNIT_GRID_STEP = 0.02
"Grid spacing for beta, a1 and b1 on (0, 1)"

C_GRID_SIZE = 60
C_GRID_BOUNDS = (0.01, 3.0)
"Log-spaced exponential decay rates c"

BETA_BOUND = 0.111
"Upper bound on c0 so that 1/sqrt(c0) >= 3"

TAIL_TOLERANCE = 1e-8
ORDER_FLOOR = 10
ORDER_CAP = 50
ESCALATION_FACTOR = 1.5
MAX_ESCALATIONS = 3
MIN_USABLE_POINTS = 10
"Order selection and Remark-style escalation when c0 exceeds BETA_BOUND"

BURN_IN = 500
"Simulator steps discarded before emitting values"

HORIZONS = (1, 5, 30)
DEFAULT_WIDTHS = {500: 250, 250: 100}
"Rolling window width by dataset size"

FAST_PATHS = 1000
FAST_ALPHA_GRID = (0.2, 0.5, 0.8)
FAST_GRID_STEP = 0.05
"Reduced budget used by --fast"

GARCH_MIN_LENGTH = 50
GARCH_MAX_PERSISTENCE = 0.999
GARCH_STARTS = ((0.05, 0.90), (0.10, 0.80), (0.15, 0.70), (0.05, 0.60), (0.20, 0.50))
"Deterministic (a1, b1) starting points for the likelihood search"
