"""Household pipeline: simulated physical twin, digital-twin predictions, monitoring and mitigation.

Every prediction_period the twin learns from the episodes the physical
twin finished so far, emits futures over the next horizon and monitors
them. When the weighted alarm probability reaches alarm_level the
mitigator searches a new configuration, which then holds for the window
until the next prediction.
"""

import functools
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from bounds.margins import ApBand, bound_vector, margin_values
from bounds.types import SaturationBound
from constants import (
    MINUTES_PER_DAY,
    MINUTES_PER_WEEK,
    AccessCategory,
    BackhaulMedium,
    FutureStrategy,
    MitigationStatus,
)
from errors import SweepError
from experiments.base_experiment import BaseExperiment
from experiments.curves import ac_bounds
from experiments.household import Household
from risk.backhaul import BackhaulChoice, shortlist
from risk.mitigator import MitigationKnobs, RiskMitigator
from risk.monitor import monitor
from risk.network import NetworkConfig, associate_strongest, build_config
from traffic.estimators import DurationEstimator, Episode, extract_episodes, update_estimators
from traffic.futures import emit_futures
from traffic.generator import Scenario, ScenarioSlice, generate_scenario

ALARM_LOG = "alarms.csv"
MITIGATION_LOG = "mitigation.csv"
MARGIN_COLUMNS = ["time", "ap", "band", "margin", "alarm"]
# position sets whose strongest-signal associations one run keeps
STRONGEST_CACHE_SIZE = 1024


@dataclass
class PredictionLog:
    """What the twin concluded at each prediction time."""

    alarm_times: List[int] = field(default_factory=list)
    probabilities: List[Tuple[int, float]] = field(default_factory=list)
    windows: Dict[int, Dict[str, ApBand]] = field(default_factory=dict)  # window start -> associations
    statuses: List[MitigationStatus] = field(default_factory=list)

    def window_at(self, minute: int, period: int) -> Optional[Dict[str, ApBand]]:
        starts = sorted(self.windows)
        index = bisect_right(starts, minute) - 1
        if index >= 0 and minute < starts[index] + period:
            return self.windows[starts[index]]
        return None


def degradation_starts(margins: pd.DataFrame) -> pd.DataFrame:
    """First slice of every run of negative margin per AP/band."""
    rows = []
    for (ap, band), group in margins.sort_values("time").groupby(["ap", "band"], sort=True):
        negative = group["margin"].to_numpy() < 0
        times = group["time"].to_numpy()
        onsets = np.flatnonzero(negative & ~np.concatenate([[False], negative[:-1]]))
        rows.extend({"time": int(times[i]), "ap": ap, "band": band} for i in onsets)
    return pd.DataFrame(rows, columns=["time", "ap", "band"])


def lead_times(onsets: pd.DataFrame, alarm_times: Sequence[int], period: int) -> pd.DataFrame:
    """Hours between each degradation onset and the earliest DT alarm at most one period before it."""
    alarms = np.asarray(sorted(alarm_times), dtype=float)
    rows = []
    for onset in onsets.itertuples(index=False):
        window = alarms[(alarms <= onset.time) & (alarms >= onset.time - period)]
        alarm = float(window[0]) if window.size else math.nan
        rows.append(
            {
                "degradation_start": onset.time,
                "ap": onset.ap,
                "band": onset.band,
                "alarm_time": alarm,
                "lead_hours": (onset.time - alarm) / 60.0,
            }
        )
    return pd.DataFrame(rows, columns=["degradation_start", "ap", "band", "alarm_time", "lead_hours"])


class Tc1Experiment(BaseExperiment):
    def __init__(self, spec) -> None:
        super().__init__(spec)
        self.household = Household.from_config(self.config, self.phy, spec.phy)
        self.area = self.household.area
        knobs = self.pipeline
        self.weeks = int(knobs.get("weeks", 24))
        self.slice_minutes = int(knobs.get("slice_minutes", 15))
        self.period = int(knobs.get("prediction_period_minutes", 180))
        self.horizon = int(knobs.get("horizon_minutes", 60))
        self.futures = int(knobs.get("futures", 20))
        self.strategy = FutureStrategy(knobs.get("strategy", FutureStrategy.UNIFORM))
        self.tilt = float(knobs.get("tilt", 1.5))
        self.alarm_level = float(knobs.get("alarm_level", 0.1))
        self.threshold = float(knobs.get("threshold", 0.2))
        self.warmup = int(knobs.get("warmup_weeks", 1)) * MINUTES_PER_WEEK
        self.forgetting = float(knobs.get("forgetting", 0.1))
        self.knobs = MitigationKnobs.from_dict(knobs.get("mitigation", {}))
        self._strongest = functools.lru_cache(maxsize=STRONGEST_CACHE_SIZE)(self._strongest_at)

    # -- setup ---------------------------------------------------------------

    @BaseExperiment.stage("saturation bounds")
    def compute_bounds(self) -> Dict[AccessCategory, SaturationBound]:
        settings = self.config.get("bounds", {})
        points = int(settings.get("points", 30))
        link = self.area.link
        try:
            bounds = ac_bounds(
                self.edca,
                self.phy,
                self.phy.top_rate(link.bandwidth_hz, link.spatial_streams),
                n_sta=int(settings.get("n_sta", 10)),
                max_load=float(settings.get("max_load", 1.0)),
                points=points,
            )
        except SweepError as e:
            self.record_solver(points, e.converged_fraction or 0.0)
            raise
        for bound in bounds.values():
            self.record_solver(points, bound.converged_fraction)
        self.write_csv(
            pd.DataFrame([{"ac": str(ac), **b.to_dict()} for ac, b in bounds.items()]),
            "bounds.csv",
        )
        return bounds

    def backhaul(self) -> Tuple[BackhaulChoice, List[BackhaulChoice]]:
        """Initial backhaul and the short-list the mitigator may switch between."""
        settings = self.config.get("backhaul", {})
        names = [site.name for site in self.household.sites]
        controller = names.index(str(settings.get("controller", names[0])))
        if BackhaulMedium(settings.get("medium", BackhaulMedium.WIRED)) is BackhaulMedium.WIRED:
            return BackhaulChoice.wired(len(names), controller), []
        choices = shortlist(
            self.household.sites,
            self.area.radio,
            controller=controller,
            min_rx_power=self.area.link.min_rx_power,
            link_rate=self.area.ap_link_rate,
            limit=int(settings.get("shortlist", 8)),
        )
        if not choices:
            return BackhaulChoice.wired(len(names), controller), []
        return choices[0], choices

    def _strongest_at(self, stations: Tuple[str, ...], packed: bytes, shape: Tuple[int, ...]) -> Dict[str, ApBand]:
        return associate_strongest(self.area, stations, np.frombuffer(packed, dtype=float).reshape(shape))

    def strongest(self, stations: Sequence[str], positions: np.ndarray) -> Dict[str, ApBand]:
        positions = np.ascontiguousarray(positions, dtype=float)
        return dict(self._strongest(tuple(stations), positions.tobytes(), positions.shape))

    # -- physical twin -------------------------------------------------------

    @BaseExperiment.stage("physical twin traffic")
    def physical_twin(self) -> Tuple[Scenario, List[ScenarioSlice]]:
        scenario = generate_scenario(self.household.population, self.weeks * MINUTES_PER_WEEK, seed=self.spec.seed)
        observed = scenario.realized_demand(self.phy.frame.payload_bits(), seed=self.spec.seed)
        return scenario, scenario.slices(self.slice_minutes, observed)

    def slice_margins(
        self,
        scenario: Scenario,
        piece: ScenarioSlice,
        associations: Dict[str, ApBand],
        backhaul: BackhaulChoice,
        s_by_ac: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray, NetworkConfig]:
        matrix = self.area.load_matrix(scenario.stations, piece.demand, piece.positions)
        config = build_config(self.area, associations, backhaul)
        assignment = matrix.assignment(config.associations)
        bound, _, value = margin_values(matrix, assignment, s_by_ac, config.backhaul_load(matrix, assignment))
        return bound, value, config

    def effective(self, piece: ScenarioSlice, stations: Sequence[str], override: Optional[Dict[str, ApBand]]) -> Dict[str, ApBand]:
        """Baseline associations with the mitigated ones laid over where still reachable."""
        baseline = self.strongest(stations, piece.positions)
        if not override:
            return baseline
        rates = self.area.rates(stations, piece.positions)
        for row, sta in enumerate(stations):
            target = override.get(sta)
            if target is not None and rates[row, self.area.ap_bands.index(target)] > 0:
                baseline[sta] = target
        return baseline

    @BaseExperiment.stage("physical twin margins")
    def pt_margins(
        self,
        scenario: Scenario,
        pieces: Sequence[ScenarioSlice],
        bounds: Dict[AccessCategory, SaturationBound],
        backhaul: BackhaulChoice,
        log: Optional[PredictionLog] = None,
    ) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """Margin timeline and mean station-to-AP distance per slice."""
        s_by_ac = bound_vector(bounds)
        positions = {site.name: np.asarray(site.position) for site in self.household.sites}
        margin_rows, distance_rows = [], []
        for piece in pieces:
            override = log.window_at(piece.start, self.period) if log else None
            associations = self.effective(piece, scenario.stations, override)
            bound, value, _ = self.slice_margins(scenario, piece, associations, backhaul, s_by_ac)
            for col, (ap, band) in enumerate(self.area.ap_bands):
                margin_rows.append(
                    {
                        "time": piece.start,
                        "ap": ap,
                        "band": str(band),
                        "margin": float(value[col]),
                        "alarm": bool(value[col] < self.threshold * bound[col]),
                    }
                )
            distances = [
                float(np.linalg.norm(piece.positions[row] - positions[associations[sta][0]]))
                for row, sta in enumerate(scenario.stations)
                if sta in associations
            ]
            distance_rows.append({"time": piece.start, "mean_distance_m": float(np.mean(distances)) if distances else math.nan})
        return pd.DataFrame(margin_rows, columns=MARGIN_COLUMNS), pd.DataFrame(distance_rows)

    # -- digital twin --------------------------------------------------------

    def prediction_times(self) -> List[int]:
        return list(range(self.warmup, self.weeks * MINUTES_PER_WEEK - self.horizon + 1, self.period))

    @BaseExperiment.stage("digital twin predictions")
    def predict(
        self,
        scenario: Scenario,
        bounds: Dict[AccessCategory, SaturationBound],
        backhaul: BackhaulChoice,
        choices: List[BackhaulChoice],
    ) -> PredictionLog:
        population = self.household.population
        episodes: List[Episode] = extract_episodes(scenario, population.clock)
        ends = [episode.end for episode in episodes]
        estimator = DurationEstimator(forgetting=self.forgetting)
        mitigator = RiskMitigator(self.area, bounds, self.knobs, threshold=self.threshold, shortlist=choices)
        log = PredictionLog()
        fed = 0
        for start in self.prediction_times():
            upto = bisect_right(ends, start)
            estimator = update_estimators(estimator, episodes[fed:upto])
            fed = upto
            futures = emit_futures(
                estimator,
                population,
                start,
                horizon=self.horizon,
                count=self.futures,
                strategy=self.strategy,
                tilt=self.tilt,
                seed=self.spec.seed,
            )
            config = build_config(self.area, self.strongest(scenario.stations, futures[0].positions[:, 0]), backhaul)
            report = monitor(
                futures, config, bounds, self.area, slice_minutes=self.slice_minutes, threshold=self.threshold
            )
            probability = report.alarm_probability
            log.probabilities.append((start, probability))
            self.append_csv([{"predicted_at": start, **row} for row in report.to_frame().to_dict("records")], ALARM_LOG)
            if probability < self.alarm_level:
                continue
            log.alarm_times.append(start)
            matrices = [m for f in futures for m in self.area.slice_matrices(f, f.slices(self.slice_minutes))]
            result = mitigator.run(config, matrices)
            log.statuses.append(result.status)
            log.windows[start] = result.config.associations
            self.write_yaml(config.snapshot(), f"snapshots/{start:06d}_before.yaml")
            self.write_yaml(result.config.snapshot(), f"snapshots/{start:06d}_after.yaml")
            if result.dump:
                self.write_yaml(result.dump, f"snapshots/{start:06d}_dump.yaml")
            self.append_csv(
                [{"predicted_at": start, "status": str(result.status), **move.to_row()} for move in result.moves],
                MITIGATION_LOG,
            )
        self.logger.info(
            f"{len(log.alarm_times)} of {len(log.probabilities)} predictions raised the alarm level, "
            f"{sum(s is MitigationStatus.RESOLVED for s in log.statuses)} mitigations resolved"
        )
        return log

    # -- report --------------------------------------------------------------

    def weekend_evenings(self, margins: pd.DataFrame) -> Dict[str, Dict[str, float]]:
        """Lowest margin per AP on the Saturday and Sunday evenings of the last simulated week."""
        clock = self.household.population.clock
        week = (self.weeks - 1) * MINUTES_PER_WEEK
        evening = clock.part_names.index("evening") if "evening" in clock.part_names else clock.n_parts - 1
        start_hour = clock.day_part_boundaries[evening]
        summary: Dict[str, Dict[str, float]] = {}
        for day in sorted(clock.weekend_days):
            begin = week + day * MINUTES_PER_DAY + int(start_hour * 60)
            window = margins[(margins["time"] >= begin) & (margins["time"] < week + (day + 1) * MINUTES_PER_DAY)]
            summary[f"day{day}"] = {
                str(ap): float(group["margin"].min()) for ap, group in window.groupby("ap", sort=True)
            }
        return summary

    def run(self) -> List[Path]:
        self.reset_log(ALARM_LOG)
        self.reset_log(MITIGATION_LOG)
        bounds = self.compute_bounds()
        backhaul, choices = self.backhaul()
        scenario, pieces = self.physical_twin()
        before, distance = self.pt_margins(scenario, pieces, bounds, backhaul)
        log = self.predict(scenario, bounds, backhaul, choices)
        after, _ = self.pt_margins(scenario, pieces, bounds, backhaul, log)
        self.write_csv(before, "margins_pre.csv")
        self.write_csv(after, "margins_post.csv")
        self.write_csv(distance, "distance.csv")
        self.write_csv(pd.DataFrame(log.probabilities, columns=["time", "alarm_probability"]), "predictions.csv")
        onsets = degradation_starts(before[before["time"] >= self.warmup])
        leads = lead_times(onsets, log.alarm_times, self.period)
        self.write_csv(leads, "lead_times.csv")
        self.write_yaml(
            {
                "weeks": self.weeks,
                "predictions": len(log.probabilities),
                "alarms": len(log.alarm_times),
                "mitigations": {str(s): sum(x is s for x in log.statuses) for s in MitigationStatus},
                "detected_degradations": int(leads["lead_hours"].notna().sum()),
                "missed_degradations": int(leads["lead_hours"].isna().sum()),
                "mean_lead_hours": float(leads["lead_hours"].mean()) if leads["lead_hours"].notna().any() else None,
                "weekend_evenings_pre": self.weekend_evenings(before),
                "weekend_evenings_post": self.weekend_evenings(after),
            },
            "summary.yaml",
        )
        return self.artifacts
