from enum import Enum
from pathlib import Path
from typing import Dict, List

LOG_DIR: Path = Path("logs")  # Directory for log files
DATA_DIR: Path = Path(__file__).resolve().parent / "data"  # Declarative configs
OUTPUT_DIR: Path = Path("output")  # Default root for experiment artifacts
OUTPUT_ROOT_ENV = "WIFI_DT_OUTPUT"
LOG_MESSAGE_FORMAT = "%(asctime)s [%(levelname)8s] %(name)s: %(message)s"
LOG_TIME_FORMAT = "%H:%M:%S"

MINUTES_PER_DAY = 1440
MINUTES_PER_WEEK = 7 * MINUTES_PER_DAY

DEFAULT_MARGIN_THRESHOLD = 0.2  # fraction of the combined bound
NEGLIGIBLE_DELAY_S = 0.100
SOLVER_FAILURE_LIMIT = 0.2


class StrEnum(str, Enum):
    """Base class for string enums to ensure consistent string representation."""

    def __str__(self) -> str:
        return self.value

    @classmethod
    def values(cls) -> List[str]:
        return [element.value for element in cls]


class AccessCategory(StrEnum):
    """EDCA access categories."""

    VO = "VO"
    VI = "VI"
    BE = "BE"
    BK = "BK"


class Band(StrEnum):
    """Operating bands in GHz."""

    B2G4 = "2.4"
    B5G = "5"
    B6G = "6"

    @property
    def ghz(self) -> float:
        return float(self.value)


class BackhaulMedium(StrEnum):
    WIRED = "wired"
    WIRELESS = "wireless"


class FutureStrategy(StrEnum):
    """How the twin samples future scenarios."""

    UNIFORM = "uniform"
    LOAD_TILTED = "load-tilted"


class BandPolicy(StrEnum):
    """Band preference when choosing a savior AP."""

    INTERFERENCE = "interference"  # highest band with sufficient power
    COVERAGE = "coverage"  # 2.4 GHz when the savior serves it


class MitigationStatus(StrEnum):
    RESOLVED = "resolved"
    IMPROVED = "improved"
    INFEASIBLE = "infeasible-logged"


class Command(StrEnum):
    """CLI subcommands."""

    CURVES = "curves"
    SPATIAL = "spatial"
    TRAFFIC = "traffic"
    TC1 = "tc1"
    ORACLE = "oracle"


# Minimum per-STA service each AC must be able to sustain
SERVICE_RATE_BPS: Dict[AccessCategory, float] = {
    AccessCategory.VO: 100e3,
    AccessCategory.VI: 5e6,
    AccessCategory.BE: 25e6,
    AccessCategory.BK: 25e6,
}
