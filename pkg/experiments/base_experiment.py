import functools
import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping

import pandas as pd

from bounds.frames import PhyProfile, load_edca, load_phy
from constants import AccessCategory
from errors import WifiDtError
from experiments.spec import ExperimentSpec
from mac.types import QosParams
from utils.data_loader import load_yaml
from utils.export import append_csv, write_csv, write_yaml


class BaseExperiment:
    """Shared plumbing of the experiment runners: configs, output files and stage logging."""

    def __init__(self, spec: ExperimentSpec) -> None:
        """Load the configs a run needs and prepare its output directory.

        Args:
            spec: Validated experiment spec
        """
        if not isinstance(spec, ExperimentSpec):
            raise TypeError(f"Expected ExperimentSpec object but got {type(spec)}")

        self.spec = spec
        self.config: Dict[str, Any] = load_yaml(spec.config)
        self.phy: PhyProfile = load_phy(spec.phy)
        self.edca: Dict[AccessCategory, QosParams] = load_edca(spec.edca)
        self.output_dir = Path(spec.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: List[Path] = []
        self.solver_points = 0
        self.solver_failures = 0
        self.logger = logging.getLogger(name=__name__)

    @staticmethod
    def stage(name: str):
        """Log start, duration and failure of one experiment stage."""

        def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
            @functools.wraps(wrapped=func)
            def wrapper(self, *args, **kwargs) -> Any:
                self.logger.info(f"Stage '{name}' started")
                started = time.perf_counter()
                try:
                    result = func(self, *args, **kwargs)
                except WifiDtError as e:
                    self.logger.error(f"Stage '{name}' failed: {e}")
                    raise
                self.logger.info(f"Stage '{name}' finished in {time.perf_counter() - started:.1f} s")
                return result

            return wrapper

        return decorator

    @property
    def failure_rate(self) -> float:
        """Fraction of solver points that failed to converge during the run."""
        return self.solver_failures / self.solver_points if self.solver_points else 0.0

    def record_solver(self, points: int, converged_fraction: float) -> None:
        self.solver_points += points
        self.solver_failures += int(round(points * (1.0 - converged_fraction)))

    @property
    def pipeline(self) -> Dict[str, Any]:
        return self.spec.pipeline(self.config.get("pipeline", {}))

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def write_csv(self, frame: pd.DataFrame, name: str) -> Path:
        path = write_csv(frame, self.path(name))
        self.artifacts.append(path)
        return path

    def append_csv(self, rows: List[Mapping[str, Any]], name: str) -> Path:
        path = append_csv(rows, self.path(name))
        if rows and path not in self.artifacts:
            self.artifacts.append(path)
        return path

    def write_yaml(self, data: Dict[str, Any], name: str) -> Path:
        path = write_yaml(data, self.path(name))
        self.artifacts.append(path)
        return path

    def reset_log(self, name: str) -> None:
        """Remove an append-only log left by an earlier run into the same directory."""
        self.path(name).unlink(missing_ok=True)

    def run(self) -> List[Path]:
        raise NotImplementedError
