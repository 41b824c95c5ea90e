import logging
import os
from pathlib import Path

from platformdirs import user_data_dir

APP_NAME = "OrbitSmith"
BASE_PATH = user_data_dir(appname=APP_NAME, appauthor=False)
LOG_PATH = os.path.join(BASE_PATH, "logs")

os.makedirs(LOG_PATH, exist_ok=True)

# region numerics
R_FLOOR = 1e-9
R_EVENT = 1e-6
GAUSS_POINTS = 2

INTEGRATOR_TOL = 1e-12
INTEGRATOR_METHOD = "RK45"
FD_REL_STEP = 1e-7

GRADIENT_TOL = 1e-7
ACTION_RTOL = 1e-13
STALL_WINDOW = 10
# a stall with the gradient above this restarts the memory
CONVERGED_GRADIENT = 1e-6
STALL_RESTARTS = 5
ENERGY_TOL = 1e-6
GRADING = 3.0
MAX_ITERATIONS = 50_000
LBFGS_MEMORY = 10
MAX_BACKTRACKS = 40

JUNCTION_TOL = 1e-6
AXIS_TOL = 1e-12
INDETERMINATE_BAND = 1e-9
# endregion

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


def get_logger(name: str = "orbits") -> logging.Logger:
    logger = logging.getLogger(f"{APP_NAME.lower()}-{name}")
    if getattr(logger, "_configured", False):
        return logger

    logger.setLevel(logging.INFO)
    logger.propagate = False
    logger.handlers.clear()

    log_path = Path(LOG_PATH) / f"{name}.log"
    log_path.parent.mkdir(parents=True, exist_ok=True)

    file_handler = logging.FileHandler(log_path, mode="a")
    file_handler.setLevel(logging.INFO)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))

    logger.addHandler(file_handler)
    logger._configured = True
    return logger


def log_file(name: str = "orbits") -> str:
    return os.path.join(LOG_PATH, f"{name}.log")
