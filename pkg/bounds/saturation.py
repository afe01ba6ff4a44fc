"""Latency upper bounds from offered-load sweeps of the CSMA/CA model."""

import logging
import math
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from bounds.types import SaturationBound
from errors import DomainError, NonConvergenceError, SweepError
from mac.markov import derive_metrics, solve_fixed_point, solve_symmetric
from mac.types import ContenderLoad, FixedPointSolution, MacMetrics, QosParams, SlotTiming

logger = logging.getLogger(name=__name__)

PLATEAU_FRACTION = 0.995
MIN_CONVERGED_FRACTION = 0.8
DEFAULT_MAX_LOAD = 1.0
DEFAULT_POINTS = 40
CURVE_COLUMNS = ["load", "s", "p", "tau", "q", "e_n", "e_d"]

Evaluate = Callable[[float], Tuple[FixedPointSolution, MacMetrics]]


def _curve_row(load: float, sol: FixedPointSolution, metrics: MacMetrics) -> Dict[str, float]:
    return {
        "load": load,
        "s": metrics.s_norm,
        "p": float(np.mean(sol.p)),
        "tau": float(np.mean(sol.tau)),
        "q": float(np.mean(sol.q)),
        "e_n": float(np.mean(metrics.e_n)),
        "e_d": float(np.mean(metrics.e_d)),
    }


def _sweep(evaluate: Evaluate, grid: np.ndarray, label: str) -> Tuple[pd.DataFrame, float]:
    rows = []
    for load in grid:
        try:
            sol, metrics = evaluate(float(load))
        except NonConvergenceError as error:
            logger.warning(f"{label}: skipping load {load:.4f}, {error}")
            continue
        rows.append(_curve_row(float(load), sol, metrics))
    converged = len(rows) / len(grid)
    if converged < MIN_CONVERGED_FRACTION:
        raise SweepError(
            f"{label}: only {converged:.0%} of {len(grid)} sweep points converged",
            converged_fraction=converged,
        )
    return pd.DataFrame(rows, columns=CURVE_COLUMNS), converged


def _refine_peak(evaluate: Evaluate, curve: pd.DataFrame, peak: int) -> Tuple[float, float]:
    """Golden-section search for the throughput peak bracketed by grid neighbours."""
    loads = curve["load"].to_numpy()

    def negative_throughput(load: float) -> float:
        if not loads[peak - 1] <= load <= loads[peak + 1]:
            return 0.0
        try:
            return -evaluate(load)[1].s_norm
        except NonConvergenceError:
            return 0.0

    result = minimize_scalar(
        negative_throughput,
        bracket=(loads[peak - 1], loads[peak], loads[peak + 1]),
        method="golden",
        options={"xtol": 1e-4},
    )
    grid_best = float(curve["s"].iloc[peak])
    if -result.fun > grid_best:
        return float(result.x), float(-result.fun)
    return float(loads[peak]), grid_best


def _plateau_load(curve: pd.DataFrame, s_star: float) -> float:
    """Smallest load whose interpolated throughput reaches 99.5% of the peak."""
    loads = curve["load"].to_numpy()
    throughputs = curve["s"].to_numpy()
    target = PLATEAU_FRACTION * s_star
    index = int(np.argmax(throughputs >= target))
    if index == 0:
        return float(loads[0])
    lo, hi = throughputs[index - 1], throughputs[index]
    return float(loads[index - 1] + (target - lo) / (hi - lo) * (loads[index] - loads[index - 1]))


def _bound_from_sweep(
    evaluate: Evaluate,
    grid: np.ndarray,
    *,
    qos: Optional[QosParams],
    n_sta: int,
    label: str,
    refine: bool,
) -> SaturationBound:
    curve, converged = _sweep(evaluate, grid, label)
    peak = int(curve["s"].to_numpy().argmax())
    interior = 0 < peak < len(curve) - 1
    s_star = float(curve["s"].iloc[peak])
    if refine and interior:
        load_peak, s_star = _refine_peak(evaluate, curve, peak)
        if load_peak != float(curve["load"].iloc[peak]):
            sol, metrics = evaluate(load_peak)
            extra = pd.DataFrame([_curve_row(load_peak, sol, metrics)])
            curve = pd.concat([curve, extra], ignore_index=True)
            curve = curve.sort_values("load", ignore_index=True)
    load_star = _plateau_load(curve, s_star)
    low_confidence = n_sta <= 2 or not interior
    if low_confidence:
        logger.info(f"{label}: throughput peak is not well defined, bound flagged low-confidence")
    logger.info(f"{label}: S* = {s_star:.4f} at offered load {load_star:.4f}")
    return SaturationBound(
        qos=qos,
        n_sta=n_sta,
        load_star=load_star,
        s_star=s_star,
        curve=curve,
        low_confidence=low_confidence,
        converged_fraction=converged,
    )


def load_grid(max_load: float = DEFAULT_MAX_LOAD, points: int = DEFAULT_POINTS) -> np.ndarray:
    if not max_load > 0 or points < 3:
        raise DomainError(f"need max_load > 0 and at least 3 points, got {max_load}, {points}")
    return np.linspace(max_load / points, max_load, points)


def symmetric_point(
    template: ContenderLoad, n_sta: int, timing: SlotTiming, total_load: float
) -> Tuple[FixedPointSolution, MacMetrics]:
    """Solve n identical contenders sharing a total normalized offered load."""
    load = template.with_offered_load(total_load / n_sta)
    sol = solve_symmetric(load, n_sta, timing)
    return sol, derive_metrics(sol, [load] * n_sta, timing)


def find_saturation_bound(
    qos: QosParams,
    n_sta: int,
    template: ContenderLoad,
    timing: SlotTiming,
    *,
    max_load: float = DEFAULT_MAX_LOAD,
    points: int = DEFAULT_POINTS,
    refine: bool = True,
) -> SaturationBound:
    """Saturation point of n_sta identical contenders of one QoS set.

    template fixes the frame format; its arrival rate is replaced along the
    sweep of total offered load.
    """
    if n_sta < 2:
        raise DomainError(f"a saturation sweep needs at least 2 stations, got {n_sta}")
    template = replace(template, qos=qos)
    return _bound_from_sweep(
        lambda total: symmetric_point(template, n_sta, timing, total),
        load_grid(max_load, points),
        qos=qos,
        n_sta=n_sta,
        label=f"w0={qos.w0} m={qos.m} n={n_sta}",
        refine=refine,
    )


def find_mixed_saturation(
    groups: Sequence[Tuple[int, ContenderLoad]],
    timing: SlotTiming,
    *,
    max_load: float = DEFAULT_MAX_LOAD,
    points: int = DEFAULT_POINTS,
    refine: bool = True,
) -> SaturationBound:
    """Saturation point of a multi-QoS population solved with the full 3K system.

    The total offered load is split evenly over all contenders.
    """
    templates: List[ContenderLoad] = [load for count, load in groups for _ in range(count)]
    if len(templates) < 2:
        raise DomainError("a mixed sweep needs at least 2 contenders")

    def evaluate(total: float) -> Tuple[FixedPointSolution, MacMetrics]:
        loads = [load.with_offered_load(total / len(templates)) for load in templates]
        sol = solve_fixed_point(loads, timing)
        return sol, derive_metrics(sol, loads, timing)

    return _bound_from_sweep(
        evaluate,
        load_grid(max_load, points),
        qos=None,
        n_sta=len(templates),
        label=f"mixed population of {len(templates)}",
        refine=refine,
    )


def combine_multi_qos(groups: Sequence[Tuple[int, SaturationBound]]) -> float:
    """Station-count-weighted average of per-QoS saturation throughputs."""
    if not groups:
        raise DomainError("at least one QoS group is required")
    counts = np.array([count for count, _ in groups], dtype=float)
    if np.any(counts < 0) or counts.sum() <= 0:
        raise DomainError(f"station counts must be >= 0 with a positive total, got {counts.tolist()}")
    throughputs = np.array([bound.s_star for _, bound in groups])
    return float(counts @ throughputs / counts.sum())


def saturation_station_count(
    qos: QosParams,
    per_station: ContenderLoad,
    timing: SlotTiming,
    *,
    max_load: float = DEFAULT_MAX_LOAD,
    points: int = DEFAULT_POINTS,
    start: int = 100,
    max_rounds: int = 6,
) -> int:
    """Station count at which the summed per-station load reaches the saturation point."""
    share = per_station.offered_load
    if not share > 0:
        raise DomainError("per-station offered load must be > 0")
    count = start
    for _ in range(max_rounds):
        bound = find_saturation_bound(qos, count, per_station, timing, max_load=max_load, points=points)
        updated = max(2, int(math.floor(bound.load_star / share)))
        logger.debug(f"Head-room round: {count} stations -> {updated}")
        if updated == count:
            break
        count = updated
    return count
