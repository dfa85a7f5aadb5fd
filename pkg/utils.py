import sys
from pathlib import Path
from typing import Optional

import numpy as np
from loguru import logger

from config import LOG_DIR


def setup_logging(debug: bool = False, log_dir: Optional[str] = LOG_DIR) -> None:
    """Configure loguru sinks: coloured stderr plus a rotating file in ``log_dir``."""
    level = "DEBUG" if debug else "INFO"
    logger.remove()
    logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
               "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
    )
    if log_dir:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        logger.add(
            str(Path(log_dir) / "cpg_{time}.log"),
            level=level,
            rotation="50 MB",
            retention="10 days",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
        )


def as_columns(v: np.ndarray) -> tuple[np.ndarray, bool]:
    """View a state vector (dim,) or a batch (dim, n) as a 2D column batch.

    Returns the 2D array and whether the input was a single vector.
    """
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 1:
        return arr[:, None], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError(f"expected a vector or a (dim, n) batch, got shape {arr.shape}")


def sup_norm(x: np.ndarray) -> float:
    x = np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0
