"""Long-run household traffic, its per-AC aggregate and autocorrelation."""

from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from constants import MINUTES_PER_DAY, MINUTES_PER_WEEK, AccessCategory
from experiments.base_experiment import BaseExperiment
from experiments.household import Household
from traffic.analysis import autocorrelation, bin_series, is_local_peak
from traffic.generator import Scenario, generate_scenario

DAY_HOURS = 24
WEEK_HOURS = 168


class TrafficExperiment(BaseExperiment):
    def __init__(self, spec) -> None:
        super().__init__(spec)
        self.household = Household.from_config(self.config, self.phy, spec.phy)
        self.settings: Dict[str, Any] = self.pipeline.get("traffic", {})

    @property
    def weeks(self) -> int:
        return int(self.spec.overrides.get("weeks", self.settings.get("weeks", 24)))

    @BaseExperiment.stage("traffic generation")
    def generate(self) -> Scenario:
        return generate_scenario(self.household.population, self.weeks * MINUTES_PER_WEEK, seed=self.spec.seed)

    @BaseExperiment.stage("autocorrelation")
    def correlate(self, scenario: Scenario) -> Dict[str, Any]:
        bin_minutes = int(self.settings.get("autocorrelation_bin_minutes", 60))
        aggregate = scenario.aggregate()
        hourly = bin_series(aggregate, bin_minutes) / bin_minutes / 1e6
        self.write_csv(
            pd.DataFrame({"bin": np.arange(hourly.shape[1]), **{str(ac): hourly[i] for i, ac in enumerate(AccessCategory)}}),
            "aggregate.csv",
        )
        total = hourly.sum(axis=0)
        max_lag = min((WEEK_HOURS + DAY_HOURS) * 60 // bin_minutes, total.size - 1)
        acf = autocorrelation(total, max_lag)
        self.write_csv(pd.DataFrame({"lag_hours": np.arange(max_lag + 1) * bin_minutes / 60, "acf": acf}), "autocorrelation.csv")
        day, week = DAY_HOURS * 60 // bin_minutes, WEEK_HOURS * 60 // bin_minutes
        return {
            "bin_minutes": bin_minutes,
            "daily_peak": bool(day < max_lag and is_local_peak(acf, day)),
            "weekly_peak": bool(week < max_lag and is_local_peak(acf, week)),
            "acf_day": float(acf[day]) if day <= max_lag else None,
            "acf_week": float(acf[week]) if week <= max_lag else None,
        }

    def run(self) -> List[Path]:
        scenario = self.generate()
        first_day = Scenario(
            start=0,
            horizon=MINUTES_PER_DAY,
            stations=scenario.stations,
            activity=scenario.activity[:, :, :MINUTES_PER_DAY],
            rates=scenario.rates,
            positions=scenario.positions[:, :MINUTES_PER_DAY],
        )
        self.write_csv(first_day.to_frame(), "scenario_day1.csv")
        summary = self.correlate(scenario)
        self.write_yaml({"weeks": self.weeks, **summary}, "summary.yaml")
        return self.artifacts
