from pathlib import Path
from typing import Any, Dict, Union

import yaml

from constants import DATA_DIR

PathLike = Union[str, Path]


def resolve_data_path(filename: PathLike) -> Path:
    """Resolve a config name against DATA_DIR unless it already points at a file.

    Args:
        filename: Bare file name inside the data directory, or an explicit path

    Returns:
        Path of the existing file
    """
    candidate = Path(filename)
    filepath = candidate if candidate.exists() else DATA_DIR / candidate
    if not filepath.exists():
        raise FileNotFoundError(f"Config file not found: {filepath}")
    return filepath


def load_yaml(filename: PathLike) -> Dict[str, Any]:
    """Load a declarative config from a YAML file.

    Args:
        filename: Name of the YAML file in the data directory, or a path

    Returns:
        Loaded YAML mapping
    """
    filepath = resolve_data_path(filename)
    with open(file=filepath, mode="r", encoding="utf-8") as file:
        data = yaml.safe_load(stream=file)
    if not isinstance(data, dict):
        raise ValueError(f"Expected a mapping at the top of {filepath}, got {type(data).__name__}")
    return data
