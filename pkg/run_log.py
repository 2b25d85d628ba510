"""
Photoacoustic Toolkit - Run Logging

Console logging plus one timestamped log file per run in logs/.
"""

import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

LOG_FORMAT = "[%(asctime)s] %(name)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

_installed = []


def run_log_path(log_dir: Path) -> Path:
    """Return logs/run_<timestamp>.log, creating the folder."""
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    ts = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    return log_dir / f"run_{ts}.log"


def configure_logging(log_dir: Optional[Path] = None, verbose: bool = False) -> Optional[Path]:
    """
    Install console and file handlers on the root logger

    Calling again replaces the handlers from the previous call.

    Args:
        log_dir: Folder for the per-run log file; None disables the file
        verbose: DEBUG instead of INFO in the file, INFO instead of WARNING on the console

    Returns:
        Path of the log file, or None
    """
    root = logging.getLogger()
    for handler in _installed:
        root.removeHandler(handler)
        handler.close()
    _installed.clear()

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.INFO if verbose else logging.WARNING)
    console.setFormatter(formatter)
    _installed.append(console)

    path = None
    if log_dir is not None:
        path = run_log_path(log_dir)
        file_handler = logging.FileHandler(path, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
        file_handler.setFormatter(formatter)
        _installed.append(file_handler)

    for handler in _installed:
        root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    logging.captureWarnings(True)
    return path
