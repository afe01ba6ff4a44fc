import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict

import pytest

# Import directly from project root
from bounds.frames import PhyProfile, load_edca, load_phy
from constants import LOG_DIR, OUTPUT_ROOT_ENV, AccessCategory
from logging_config import configure_logging
from mac.types import QosParams
from utils.data_loader import load_yaml


def pytest_addoption(parser) -> None:
    parser.addoption(
        "--seed",
        action="store",
        type=int,
        default=20240601,
        help="Base seed for Monte-Carlo and scenario-generation tests",
    )

    parser.addoption(
        "--tc1-weeks",
        action="store",
        type=int,
        default=2,
        help="Weeks of simulated traffic in the end-to-end household run (24 for the full experiment)",
    )


@pytest.fixture(scope="session")
def seed(request) -> int:
    return request.config.getoption("--seed")


@pytest.fixture(scope="session")
def tc1_weeks(request) -> int:
    return request.config.getoption("--tc1-weeks")


@pytest.fixture(scope="session")
def phy() -> PhyProfile:
    """PHY timing, frame format and MCS table shipped in data/."""
    return load_phy()


@pytest.fixture(scope="session")
def edca() -> Dict[AccessCategory, QosParams]:
    return load_edca()


@pytest.fixture(scope="session")
def curves_config() -> Dict[str, Any]:
    return load_yaml("curves.yaml")


@pytest.fixture(scope="session")
def tc1_config() -> Dict[str, Any]:
    return load_yaml("tc1.yaml")


@pytest.fixture
def output_root(tmp_path, monkeypatch) -> Path:
    """Temporary artifact root exported through the environment."""
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    return tmp_path


def pytest_configure(config):
    """Create logs/ dir and configure root logger once for the test session."""
    config.addinivalue_line("markers", "smoke: mark a test as a smoke test")
    config.addinivalue_line("markers", "regression: mark a test as a regression test")
    config.addinivalue_line("markers", "slow: Monte-Carlo or end-to-end test that takes more than a few seconds")

    console_level = config.option.log_level or "INFO"
    logs_dir = Path(LOG_DIR)
    logs_dir.mkdir(exist_ok=True)

    timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    session_log_file = logs_dir / f"test_{timestamp}.log"

    configure_logging(
        level=console_level,
        logfile_path=session_log_file,
        enable_console=True,
    )
    logging.getLogger(__name__).info("Logging to %s", session_log_file)
    os.environ["LOG_LEVEL"] = console_level


@pytest.fixture(autouse=True)
def logger():
    """Provides a logger instance for tests.

    This fixture is automatically used in all tests.
    """
    return logging.getLogger("test")
