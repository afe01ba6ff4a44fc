import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from bounds.frames import EDCA_FILE, PHY_FILE
from constants import Command
from errors import ConfigError
from utils.data_loader import resolve_data_path
from utils.export import resolve_output_dir

DEFAULT_CONFIGS: Dict[Command, str] = {
    Command.CURVES: "curves.yaml",
    Command.SPATIAL: "tc1.yaml",
    Command.TRAFFIC: "tc1.yaml",
    Command.TC1: "tc1.yaml",
    Command.ORACLE: "curves.yaml",
}

# Pipeline keys a command-line override may replace.
OVERRIDE_KEYS = (
    "threshold",
    "prediction_period_minutes",
    "horizon_minutes",
    "futures",
    "tilt",
    "strategy",
    "weeks",
)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one experiment run needs: command, configs, output root, seed and overrides."""

    command: Command
    config: Path
    phy: Path
    edca: Path
    output_dir: Path
    seed: int = 0
    overrides: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for path in (self.config, self.phy, self.edca):
            if not Path(path).is_file():
                raise ConfigError(f"config file {path} does not exist")
        if not os.access(self.output_dir, os.W_OK):
            raise ConfigError(f"output directory {self.output_dir} is not writable")
        unknown = set(self.overrides) - set(OVERRIDE_KEYS)
        if unknown:
            raise ConfigError(f"unsupported overrides {sorted(unknown)}")

    @classmethod
    def build(
        cls,
        command: Command,
        *,
        config: Optional[str] = None,
        phy: Optional[str] = None,
        edca: Optional[str] = None,
        output: Optional[str] = None,
        seed: int = 0,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "ExperimentSpec":
        """Resolve config names against data/ and the output root against $WIFI_DT_OUTPUT."""
        command = Command(command)
        try:
            paths = [
                resolve_data_path(config or DEFAULT_CONFIGS[command]),
                resolve_data_path(phy or PHY_FILE),
                resolve_data_path(edca or EDCA_FILE),
            ]
        except FileNotFoundError as error:
            raise ConfigError(str(error)) from None
        output_dir = resolve_output_dir(output) / str(command)
        output_dir.mkdir(parents=True, exist_ok=True)
        return cls(
            command=command,
            config=paths[0],
            phy=paths[1],
            edca=paths[2],
            output_dir=output_dir,
            seed=seed,
            overrides={k: v for k, v in (overrides or {}).items() if v is not None},
        )

    def pipeline(self, base: Mapping[str, Any]) -> Dict[str, Any]:
        """Pipeline knobs with the overrides applied."""
        merged = dict(base)
        merged.update(self.overrides)
        return merged
