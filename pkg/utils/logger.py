import logging
import sys
from datetime import datetime
from logging import Logger
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional, TextIO

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_logger(
    service_name: str,
    log_level: str = "INFO",
    log_to_file: bool = True,
    log_dir: str = "logs",
    stream: Optional[TextIO] = None,
) -> Logger:
    """Configure the root logger with a console handler and an optional rotating file.

    Files land in ``<log_dir>/<YYYY-mm-dd-HH-MM>/<service_name>_<timestamp>.log``.
    """
    numeric_level = getattr(logging, log_level.upper(), logging.INFO)
    logger = logging.getLogger()
    logger.setLevel(numeric_level)
    if logger.hasHandlers():
        logger.handlers.clear()

    formatter = logging.Formatter(LOG_FORMAT)
    console_handler = logging.StreamHandler(stream or sys.stdout)
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_to_file:
        stamp = datetime.now().strftime("%Y-%m-%d-%H-%M")
        run_dir = Path(log_dir) / stamp
        run_dir.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            run_dir / f"{service_name}_{stamp}.log",
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def log_step_details(row: Dict[str, Any], verbose: bool, logger: Logger) -> None:
    """One progress line: largest node share, field residual, U and dissipation"""
    if not verbose:
        return

    try:
        t = float(row.get("t", 0.0))
        step = row.get("step")
        x = [float(v) for v in row.get("x", [])]
        utility = float(row.get("utility", 0.0))
        residual = float(row.get("residual", 0.0))
        rate = float(row.get("dissipation", 0.0))

        top = max(range(len(x)), key=lambda k: x[k]) if x else 0
        share = 100.0 * x[top] if x else 0.0
        head = f"Step {step:05d}" if isinstance(step, int) else "Step ?"
        logger.info(
            f"{head} | t={t:8.3f} | x{top + 1} {share:6.2f}% | F {residual:9.2e} "
            f"| U {utility:+.6f} | Vdot {rate:+.2e}"
        )
    except (TypeError, ValueError) as e:
        logger.warning(f"Error in verbose logging: {e}")
        logger.debug(f"Row: {row}")
