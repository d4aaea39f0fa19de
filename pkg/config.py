import os
from dotenv import load_dotenv

# Load environment variables (only if .env file exists - for local development)
try:
    load_dotenv()
except Exception:
    pass

class Config:
    # Output Settings
    OUTPUT_DIR = os.getenv("FILAMENTLAB_OUT", "runs")
    OUTPUT_DIR_FROM_ENV = "FILAMENTLAB_OUT" in os.environ

    # Application Settings
    DEBUG = os.getenv("DEBUG", "False").lower() == "true"
    MAX_WORKERS = int(os.getenv("FILAMENTLAB_MAX_WORKERS", 4))

    # Numerical defaults
    EPS_STAR = float(os.getenv("FILAMENTLAB_EPS_STAR", 0.2))
    UNIT_TOL = float(os.getenv("FILAMENTLAB_UNIT_TOL", 1e-10))
    NEWTON_TOL = float(os.getenv("FILAMENTLAB_NEWTON_TOL", 1e-12))
    NEWTON_MAX_ITERS = 50
    M_MAX = int(os.getenv("FILAMENTLAB_M_MAX", 3))
    KAPPA_FLOOR = float(os.getenv("FILAMENTLAB_KAPPA_FLOOR", 1e-6))
    MIN_CELLS = 8

    # Supported run modes
    MODES = ("simulate", "sweep-eps", "check-compat", "correct-datum", "diagnose")

config = Config()
