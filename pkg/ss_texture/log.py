from __future__ import annotations

import logging
from pathlib import Path

ROOT_LOGGER = "ss_texture"
_FORMATTER = logging.Formatter(
    fmt="%(asctime)s [%(levelname)s] %(message)s",
    datefmt="%Y-%m-%dT%H:%M:%SZ",
)


def configure_logging(level: int | str = logging.INFO, log_file: Path | str | None = None) -> logging.Logger:
    """
    Attach console (and optionally file) handlers to the package logger.

    Calling it again only adjusts the level and adds a file handler for a
    log file that is not attached yet.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(level)
    if not logger.handlers:
        console = logging.StreamHandler()
        console.setFormatter(_FORMATTER)
        logger.addHandler(console)
    if log_file is not None:
        target = str(Path(log_file).resolve())
        attached = {
            getattr(h, "baseFilename", None) for h in logger.handlers
        }
        if target not in attached:
            file_handler = logging.FileHandler(target, encoding="utf-8")
            file_handler.setFormatter(_FORMATTER)
            logger.addHandler(file_handler)
    return logger
