"""Analytic model against the slot-level simulator at matching operating points."""

from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np
import pandas as pd

from bounds.saturation import symmetric_point
from bounds.shannon import contender_load
from constants import AccessCategory
from errors import NonConvergenceError
from experiments.base_experiment import BaseExperiment
from mac.oracle import SimConfig, simulate
from mac.types import ContenderLoad, SlotTiming

METRICS = ("s", "p", "tau", "e_d")
# simulator field per compared metric
_SIM_FIELDS = {"s": "s_norm", "p": "p", "tau": "tau", "e_d": "e_d"}


def sim_config(data: Mapping[str, Any], seed: int) -> SimConfig:
    return SimConfig(
        slots=int(data.get("slots", 20_000)),
        warmup=int(data.get("warmup_slots", 2_000)),
        replications=int(data.get("replications", 8)),
        batches=int(data.get("batches", 10)),
        seed=seed,
    )


def oracle_comparison(
    template: ContenderLoad,
    n_sta: int,
    loads: Sequence[float],
    timing: SlotTiming,
    config: SimConfig,
) -> pd.DataFrame:
    """One row per total load: analytic value, oracle mean and CI half width, relative deviation.

    Points where the fixed point does not converge keep nan analytic columns.
    """
    rows: List[Dict[str, Any]] = []
    for index, total in enumerate(loads):
        row: Dict[str, Any] = {"n_sta": n_sta, "load": float(total)}
        try:
            sol, metrics = symmetric_point(template, n_sta, timing, float(total))
            analytic = {
                "s": metrics.s_norm,
                "p": float(np.mean(sol.p)),
                "tau": float(np.mean(sol.tau)),
                "e_d": float(np.mean(metrics.e_d)),
            }
        except NonConvergenceError:
            analytic = {name: np.nan for name in METRICS}
        per_station = template.with_offered_load(float(total) / n_sta)
        stats = simulate([per_station] * n_sta, timing, replace(config, seed=config.seed + index))
        for name in METRICS:
            mean, half_width = stats.interval(_SIM_FIELDS[name])
            oracle, half = float(np.nanmean(mean)), float(np.nanmean(half_width))
            row[f"{name}_analytic"] = analytic[name]
            row[f"{name}_oracle"] = oracle
            row[f"{name}_half_width"] = half
            with np.errstate(divide="ignore", invalid="ignore"):
                row[f"{name}_deviation"] = abs(analytic[name] - oracle) / abs(oracle) if oracle else np.nan
        rows.append(row)
    return pd.DataFrame(rows)


class OracleExperiment(BaseExperiment):
    """Cross-check of the analytic model on the oracle grid of the curves config."""

    @BaseExperiment.stage("oracle comparison")
    def compare(self) -> pd.DataFrame:
        grid = self.config.get("oracle", {})
        rate = float(self.config["link_rate_mbps"]) * 1e6
        loads = np.linspace(
            float(grid.get("max_load", 0.3)) / int(grid.get("points", 6)),
            float(grid.get("max_load", 0.3)),
            int(grid.get("points", 6)),
        )
        frames = []
        for ac in (AccessCategory(a) for a in self.config.get("access_categories", AccessCategory.values())):
            template = contender_load(0.1, rate, self.edca[ac], self.phy.frame)
            for n_sta in grid.get("station_counts", [2, 4]):
                table = oracle_comparison(
                    template, int(n_sta), loads, self.phy.timing, sim_config(grid, self.spec.seed)
                )
                table.insert(0, "ac", str(ac))
                frames.append(table)
        return pd.concat(frames, ignore_index=True)

    def run(self) -> List[Path]:
        table = self.compare()
        self.write_csv(table, "oracle.csv")
        self.logger.info(f"Largest relative throughput deviation {table['s_deviation'].max():.3%}")
        return self.artifacts
