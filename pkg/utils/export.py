import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

import pandas as pd
import yaml

from constants import OUTPUT_DIR, OUTPUT_ROOT_ENV

logger = logging.getLogger(name=__name__)

FLOAT_FORMAT = "%.10g"


def resolve_output_dir(explicit: Optional[Union[str, Path]] = None) -> Path:
    """Output root: explicit argument, then $WIFI_DT_OUTPUT, then OUTPUT_DIR."""
    root = Path(explicit) if explicit else Path(os.environ.get(OUTPUT_ROOT_ENV, str(OUTPUT_DIR)))
    root.mkdir(parents=True, exist_ok=True)
    return root


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write a table with a fixed float format so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path_or_buf=path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def append_csv(rows: Iterable[Mapping[str, Any]], path: Union[str, Path]) -> Path:
    """Append rows to a CSV log, writing the header only when the file is new."""
    path = Path(path)
    frame = pd.DataFrame(list(rows))
    if frame.empty:
        return path
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not path.exists()
    frame.to_csv(
        path_or_buf=path,
        mode="w" if new_file else "a",
        header=new_file,
        index=False,
        float_format=FLOAT_FORMAT,
        lineterminator="\n",
    )
    return path


def write_yaml(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(file=path, mode="w", encoding="utf-8") as file:
        yaml.safe_dump(data=data, stream=file, sort_keys=True)
    return path
