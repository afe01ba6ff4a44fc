"""Heatmaps, spatial signatures and their clustering for uniform and furniture placements."""

from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from constants import Band
from experiments.base_experiment import BaseExperiment
from experiments.household import Household
from spatial.clustering import ClusterModel, db_index, kmeans
from spatial.propagation import heatmap, signatures


class SpatialExperiment(BaseExperiment):
    def __init__(self, spec) -> None:
        super().__init__(spec)
        self.household = Household.from_config(self.config, self.phy, spec.phy)
        self.settings: Dict[str, Any] = self.pipeline.get("spatial", {})

    @BaseExperiment.stage("heatmaps")
    def heatmaps(self) -> int:
        resolution = float(self.settings.get("resolution_m", 1.0))
        written = 0
        for site in self.household.sites:
            for band in site.bands:
                grid = heatmap(site, band, resolution, self.household.floorplan, self.household.model)
                self.write_csv(grid.to_frame(), f"heatmap_{site.name}_{band}.csv")
                written += 1
        return written

    def placement(self, name: str) -> np.ndarray:
        count = int(self.settings.get("points", 400))
        if name == "uniform":
            return self.household.floorplan.uniform_points(count, seed=self.spec.seed)
        spread = self.settings.get("furniture_spread_m")
        return self.household.floorplan.furniture_points(count, seed=self.spec.seed, spread=spread)

    @BaseExperiment.stage("clustering")
    def cluster(self) -> Dict[str, Any]:
        k = int(self.settings.get("clusters", 4))
        maps, histories, summary = [], [], {}
        for name in ("uniform", "furniture"):
            signature_set = signatures(
                self.household.sites, list(Band), self.placement(name), self.household.floorplan, self.household.model
            )
            model: ClusterModel = kmeans(signature_set, k, seed=self.spec.seed)
            maps.append(
                pd.DataFrame(
                    {
                        "placement": name,
                        "x": signature_set.points[:, 0],
                        "y": signature_set.points[:, 1],
                        "cluster": model.labels,
                    }
                )
            )
            histories.append(
                pd.DataFrame(
                    {
                        "placement": name,
                        "iteration": np.arange(1, model.iterations + 1),
                        "db_index": model.db_history,
                        "volume_ratio": model.volume_ratio_history,
                        "inertia": model.inertia_history,
                    }
                )
            )
            summary[name] = {
                "db_index": float(db_index(model, signature_set)),
                "iterations": int(model.iterations),
                "converged": bool(model.converged),
                "dimension": signature_set.dimension,
            }
        summary["non_uniform_lower_db"] = bool(summary["furniture"]["db_index"] < summary["uniform"]["db_index"])
        self.write_csv(pd.concat(maps, ignore_index=True), "clusters.csv")
        self.write_csv(pd.concat(histories, ignore_index=True), "cluster_history.csv")
        return summary

    def run(self) -> List[Path]:
        self.heatmaps()
        summary = self.cluster()
        self.write_yaml({"k": int(self.settings.get("clusters", 4)), **summary}, "summary.yaml")
        self.logger.info(
            f"DB index uniform {summary['uniform']['db_index']:.3f}, furniture {summary['furniture']['db_index']:.3f}"
        )
        return self.artifacts
