"""
Configuration and numerical constants for the risk toolkit.
Centralized so tolerances and budgets can be tuned without touching the solvers.
"""

from pydantic_settings import BaseSettings, SettingsConfigDict

VERSION = "1.0.0"
CSV_SCHEMA_VERSION = "1"

# Root finding (tolerance on c; scaled down with c - 1 near c = 1)
ROOT_XTOL = 1e-12
ROOT_RESIDUAL_MAX = 1e-10
BRACKET_START = 2.0
BRACKET_CAP = 1e6
ROOT_MAX_ITER = 500
TRUNCATED_MIN_RATIO = 1e-6  # below this the truncated cut-off equation peaks under float resolution

# exp(-x) is reported as exactly 0 beyond this point
EXP_UNDERFLOW = 745.0

# Quadrature
QUAD_TOL = 1e-7
QUAD_STDDEVS = 8.0  # integration box half-width, in units of the widest scale
MIXTURE_TABLE_STEP = 0.25  # spacing in s = ||est - theta|| / sigma_y of the tabulated mixture loss

# Monte Carlo
DEFAULT_SEED = 20180608
CHUNK_SIZE = 65_536  # part of the determinism contract, never derived from worker count
MIN_SAMPLES = 100
N_ORACLE = 1_000_000
N_EPSILON = 100_000
N_MIXTURE = 4_000
STDERR_MULTIPLIER = 3.0

# Epsilon search
EPSILON_MAX_RADIUS = 6.0
EPSILON_GRID_POINTS = 25
EPSILON_TAIL_DOUBLINGS = 6
EPSILON_REFINE_LEVELS = 6
EPSILON_TOL = 1e-3
EPSILON_FLOOR = 1e-6

# Empirical cut-off search (in c^2)
EMPIRICAL_C2_CAP = 4.0
EMPIRICAL_SCAN_STEP = 0.05
EMPIRICAL_TOL = 1e-3
EMPIRICAL_UCB_Z = 3.0

# Grids
ALPHA_GRID_STEP = 0.05
THETA_GRID_DEFAULT = (0.0, 6.0, 25)

# Canonical parameters behind Figures 1-5 (approximations of the plotted ranges)
FIGURE_DEFAULTS = {
    "fig1": {
        "pairs": [(1, 1.0), (2, 1.0), (2, 9.6568), (3, 2.0), (5, 2.0)],
        "alpha_lo": -0.95,
        "alpha_hi": 0.95,
    },
    "fig2": {
        "d": 3,
        "sigma_x2": 1.0,
        "a": 0.75,
        "alpha": 0.0,
        "r_values": [0.5, 1.0, 2.0],
        "theta_grid": (0.0, 6.0, 61),
    },
    "fig3": {
        "sigma_x2": 1.0,
        "r_values": [0.5, 1.0, 2.0],
        "alphas": [-0.5, 0.0, 0.5],
        "theta_grid": (0.0, 5.0, 51),
    },
    "fig4": {
        "d": 3,
        "sigma_x2": 1.0,
        "sigma_y2_values": [1.0, 2.0, 4.0],
        "alpha_lo": -0.95,
        "alpha_hi": 0.95,
        "alpha_step": 0.05,
    },
    "fig5": {
        "dims": [3, 5, 7, 9],
        "sigma_x2": 1.0,
        "sigma_y2": 1.0,
        "alpha": 0.0,
        "theta_grid": (0.0, 8.0, 33),
    },
}


class Settings(BaseSettings):
    """Run-time knobs, overridable from the environment (ALPHARISK_*) or a .env file."""
    model_config = SettingsConfigDict(env_prefix="ALPHARISK_", env_file=".env", extra="ignore")

    seed: int = DEFAULT_SEED
    workers: int = 1
    n_samples: int = N_EPSILON
    log_level: str = "INFO"


# Process-wide defaults
settings = Settings()
