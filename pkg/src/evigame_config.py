"""
Runtime configuration for the evigame solvers and entry points.
Values here are shared constants; the environment only tunes parallelism and logging.
"""

import logging
import os

# Configuration
THREADS_ENV = "EVIGAME_THREADS"
LOG_LEVEL_ENV = "EVIGAME_LOG_LEVEL"

DENOMINATOR_BOUND = 10**6  # continued-fraction rounding of float limits
RHO_TOLERANCE = 1e-6  # purification traces: sup-norm change between schedule points
HOMOTOPY_TOLERANCE = 1e-8  # perturbed continuation: change between successive selections
MONTE_CARLO_CHUNK = 65536  # samples per independently seeded chunk
DEFAULT_SAMPLES = 200_000

logger = logging.getLogger(__name__)


def worker_count() -> int:
    """Number of worker threads, capped by EVIGAME_THREADS when set"""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={raw!r}")
    return os.cpu_count() or 1


def log_level(default: str = "INFO") -> str:
    """Logging level name from EVIGAME_LOG_LEVEL"""
    level = os.environ.get(LOG_LEVEL_ENV, default).strip().upper()
    if level not in logging.getLevelNamesMapping():
        return default
    return level
