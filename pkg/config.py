import os

from dotenv import load_dotenv

load_dotenv()

# Newton configuration
NEWTON_TOL = float(os.getenv("CPG_NEWTON_TOL", "1e-12"))
NEWTON_MAX_ITER = int(os.getenv("CPG_NEWTON_MAX_ITER", "50"))

# Quadrature / basis
MAX_GAUSS_NODES = 64
ENDPOINT_TOL_EPS = 4  # machine epsilons times interval width

# Energy diagnostic floor: 1e3 * eps * (1 + max |H|)
ENERGY_FLOOR_FACTOR = 1e3

# Experiment defaults
T_END = 5.0
TAU_REF = float(os.getenv("CPG_TAU_REF", "1.25e-4"))
EOC_FLOOR = 1e-11
MAX_WORKERS = int(os.getenv("CPG_MAX_WORKERS", "4"))
CONFIG_VERSION = 1

# Storage
DB_PATH = os.getenv("CPG_DB_PATH", "cpg_runs.db")
OUTPUT_DIR = os.getenv("CPG_OUTPUT_DIR", "results")
LOG_DIR = os.getenv("CPG_LOG_DIR", "logs")
