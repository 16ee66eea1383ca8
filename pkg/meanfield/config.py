import os

# Lokale Pfade als Standard (für Entwicklung)
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.environ.get("DATA_DIR", os.path.join(BASE_DIR, "data"))
RESULTS_DIR = os.environ.get("RESULTS_DIR", os.path.join(DATA_DIR, "results"))
PRESETS_DIR = os.environ.get("PRESETS_DIR", os.path.join(BASE_DIR, "presets"))
LOG_FILE = os.path.join(DATA_DIR, "logs", "meanfield.log")

# Numerische Standardwerte
GRID_NODES = int(os.environ.get("MEANFIELD_GRID_NODES", "2001"))
DOMAIN_SCALES = float(os.environ.get("MEANFIELD_DOMAIN_SCALES", "8.0"))
GALERKIN_DEGREE = int(os.environ.get("MEANFIELD_GALERKIN_DEGREE", "30"))
DAMPING = 0.5
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 500
JACOBI_TOL = 1e-12
NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 100
TIME_STEP = 0.01
