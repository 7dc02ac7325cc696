import logging
from pathlib import Path

from ss_texture.log import ROOT_LOGGER, configure_logging


def test_handlers_are_not_duplicated(tmp_path: Path) -> None:
    logger = logging.getLogger(ROOT_LOGGER)
    saved = list(logger.handlers)
    for handler in saved:
        logger.removeHandler(handler)
    try:
        log_file = tmp_path / "run.log"
        configure_logging("INFO", log_file)
        configure_logging("DEBUG", log_file)
        assert logger.level == logging.DEBUG
        assert len(logger.handlers) == 2

        logging.getLogger("ss_texture.pipeline").info("size=%d", 20)
        for handler in logger.handlers:
            handler.flush()
        line = log_file.read_text(encoding="utf-8").strip()
        assert line.endswith("[INFO] size=20")
        assert line[4] == "-" and "T" in line.split(" ")[0]
    finally:
        for handler in list(logger.handlers):
            handler.close()
            logger.removeHandler(handler)
        for handler in saved:
            logger.addHandler(handler)
