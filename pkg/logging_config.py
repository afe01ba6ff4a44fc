import logging
import sys
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Mapping, Optional, Union

# Import directly from project root
from constants import LOG_DIR, LOG_MESSAGE_FORMAT, LOG_TIME_FORMAT

LOG_FILE_BYTES = 2_000_000
LOG_FILE_BACKUPS = 3


class _LevelColourFormatter(logging.Formatter):
    """Console formatter that colours the level name and leaves the record untouched."""

    COLOURS = {"DEBUG": 37, "INFO": 36, "WARNING": 33, "ERROR": 31, "CRITICAL": 41}
    RESET = "\033[0m"

    def format(self, record: logging.LogRecord) -> str:
        plain = record.levelname
        code = self.COLOURS.get(plain)
        if code:
            record.levelname = f"\033[{code}m{plain}{self.RESET}"
        try:
            return super().format(record=record)
        finally:
            record.levelname = plain


def default_logfile(prefix: str = "wifi_dt", directory: Union[str, Path] = LOG_DIR) -> Path:
    """Timestamped log file path, one per run."""
    timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    return Path(directory) / f"{prefix}_{timestamp}.log"


def _file_handler(logfile: Path) -> logging.Handler:
    logfile.parent.mkdir(parents=True, exist_ok=True)
    handler = RotatingFileHandler(
        filename=str(logfile),
        maxBytes=LOG_FILE_BYTES,
        backupCount=LOG_FILE_BACKUPS,
        encoding="utf-8",
    )
    handler.setFormatter(fmt=logging.Formatter(fmt=LOG_MESSAGE_FORMAT, datefmt=LOG_TIME_FORMAT))
    return handler


def configure_logging(
    *,
    level: str = "INFO",
    logfile_path: Optional[Union[str, Path]] = None,
    enable_console: bool = True,
    module_levels: Optional[Mapping[str, str]] = None,
) -> None:
    """Initialise the root logger once per process.

    Arguments
    ---------
    level         : Root log-level (e.g. "DEBUG", "INFO").
    logfile_path  : Run-wide log file. If None, 'logs/wifi_dt_<timestamp>.log'.
    enable_console: Attach a colourised stdout handler.
    module_levels : Per-logger levels, e.g. {"mac.markov": "DEBUG"} to trace solver iterations.
    """
    for name, module_level in (module_levels or {}).items():
        logging.getLogger(name).setLevel(module_level.upper())

    root_logger = logging.getLogger()
    if root_logger.handlers:
        return

    root_logger.setLevel(level.upper())
    if enable_console:
        console_handler = logging.StreamHandler(stream=sys.stdout)
        console_handler.setFormatter(fmt=_LevelColourFormatter(fmt=LOG_MESSAGE_FORMAT, datefmt=LOG_TIME_FORMAT))
        root_logger.addHandler(hdlr=console_handler)
    root_logger.addHandler(hdlr=_file_handler(Path(logfile_path) if logfile_path else default_logfile()))
    logging.captureWarnings(capture=True)
