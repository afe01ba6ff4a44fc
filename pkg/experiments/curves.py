"""Throughput, collision and delay curves against normalized offered load."""

from pathlib import Path
from typing import Dict, List, Mapping, Tuple

import numpy as np
import pandas as pd

from bounds.frames import PhyProfile
from bounds.saturation import DEFAULT_MAX_LOAD, DEFAULT_POINTS, find_saturation_bound, load_grid
from bounds.shannon import contender_load
from bounds.types import SaturationBound
from constants import AccessCategory
from errors import SweepError
from experiments.base_experiment import BaseExperiment
from experiments.oracle import oracle_comparison, sim_config
from mac.types import QosParams

CURVE_FILE_COLUMNS = ["ac", "backend", "load", "s", "p", "tau", "e_d", "s_deviation"]
LINEAR_FRACTION = 0.3


def ac_bounds(
    edca: Mapping[AccessCategory, QosParams],
    phy: PhyProfile,
    rate: float,
    *,
    n_sta: int = 10,
    max_load: float = DEFAULT_MAX_LOAD,
    points: int = DEFAULT_POINTS,
) -> Dict[AccessCategory, SaturationBound]:
    """Saturation bound of every AC for n_sta identical contenders at one link rate."""
    return {
        ac: find_saturation_bound(
            edca[ac], n_sta, contender_load(0.1, rate, edca[ac], phy.frame), phy.timing, max_load=max_load, points=points
        )
        for ac in AccessCategory
    }


def linear_slope(bound: SaturationBound, fraction: float = LINEAR_FRACTION) -> float:
    """Least-squares slope of S against load below fraction * load_star; nan with fewer than 2 points."""
    linear = bound.curve[bound.curve["load"] <= fraction * bound.load_star]
    if len(linear) < 2:
        return float("nan")
    return float(np.polyfit(linear["load"], linear["s"], deg=1)[0])


class CurvesExperiment(BaseExperiment):
    """One curve file per station count, analytic rows plus oracle rows where configured."""

    @property
    def rate(self) -> float:
        return float(self.config["link_rate_mbps"]) * 1e6

    @property
    def access_categories(self) -> List[AccessCategory]:
        return [AccessCategory(ac) for ac in self.config.get("access_categories", AccessCategory.values())]

    def sweep(self, ac: AccessCategory, n_sta: int) -> Tuple[pd.DataFrame, Dict[str, object]]:
        points = int(self.config.get("points", DEFAULT_POINTS))
        max_load = float(self.config.get("max_load", DEFAULT_MAX_LOAD))
        template = contender_load(0.1, self.rate, self.edca[ac], self.phy.frame)
        try:
            bound = find_saturation_bound(
                self.edca[ac], n_sta, template, self.phy.timing, max_load=max_load, points=points
            )
        except SweepError as e:
            self.record_solver(points, e.converged_fraction or 0.0)
            raise
        self.record_solver(points, bound.converged_fraction)
        rows = bound.curve.assign(ac=str(ac), backend="analytic", s_deviation=np.nan)
        summary = {
            "ac": str(ac),
            "n_sta": n_sta,
            "load_star": bound.load_star,
            "s_star": bound.s_star,
            "low_confidence": bound.low_confidence,
            "converged_fraction": bound.converged_fraction,
            "linear_slope": linear_slope(bound),
        }
        return rows[CURVE_FILE_COLUMNS], summary

    def oracle_rows(self, ac: AccessCategory, n_sta: int) -> pd.DataFrame:
        grid = self.config.get("oracle", {})
        template = contender_load(0.1, self.rate, self.edca[ac], self.phy.frame)
        loads = load_grid(float(grid.get("max_load", 0.3)), int(grid.get("points", 6)))
        table = oracle_comparison(template, n_sta, loads, self.phy.timing, sim_config(grid, self.spec.seed))
        return pd.DataFrame(
            {
                "ac": str(ac),
                "backend": "oracle",
                "load": table["load"],
                "s": table["s_oracle"],
                "p": table["p_oracle"],
                "tau": table["tau_oracle"],
                "e_d": table["e_d_oracle"],
                "s_deviation": table["s_deviation"],
            },
            columns=CURVE_FILE_COLUMNS,
        )

    @BaseExperiment.stage("curves")
    def build(self) -> Tuple[Dict[int, pd.DataFrame], pd.DataFrame]:
        oracle = self.config.get("oracle", {})
        oracle_counts = set(oracle.get("station_counts", [])) if oracle.get("enabled", False) else set()
        curves: Dict[int, pd.DataFrame] = {}
        summaries = []
        for n_sta in (int(n) for n in self.config["station_counts"]):
            frames = []
            for ac in self.access_categories:
                rows, summary = self.sweep(ac, n_sta)
                frames.append(rows)
                if n_sta in oracle_counts:
                    checked = self.oracle_rows(ac, n_sta)
                    frames.append(checked)
                    summary["max_s_deviation"] = float(checked["s_deviation"].max())
                summaries.append(summary)
            curves[n_sta] = pd.concat(frames, ignore_index=True)
        return curves, pd.DataFrame(summaries)

    def run(self) -> List[Path]:
        curves, summary = self.build()
        for n_sta, frame in curves.items():
            self.write_csv(frame, f"curves_n{n_sta}.csv")
        self.write_csv(summary, "bounds.csv")
        return self.artifacts
