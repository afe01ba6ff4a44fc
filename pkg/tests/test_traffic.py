import math

import numpy as np
import pytest

from constants import MINUTES_PER_DAY, MINUTES_PER_WEEK, AccessCategory, FutureStrategy
from errors import ConfigError, DomainError, ZeroVarianceError
from traffic.analysis import autocorrelation, bin_series, is_local_peak
from traffic.estimators import DurationEstimator, Episode, extract_episodes, update_estimators
from traffic.futures import emit_futures
from traffic.generator import Scenario, generate_scenario, generate_trace
from traffic.profiles import CauseRegime, OnOffCause, Population, RegimeClock, RoleProfile, StationSpec

BE = AccessCategory.BE
BE_COL = list(AccessCategory).index(BE)
SATURDAY = 5 * MINUTES_PER_DAY


@pytest.fixture(scope="module")
def clock() -> RegimeClock:
    return RegimeClock(day_part_boundaries=(0.0, 7.0, 9.0, 18.0), part_names=("night", "morning", "day", "evening"))


def _role(*causes: OnOffCause, rate: float = 1e6) -> RoleProfile:
    return RoleProfile(name="role", causes=causes, base_rate=rate, ac_mix={BE: 1.0})


def _population(clock: RegimeClock, *causes: OnOffCause) -> Population:
    return Population(
        clock=clock,
        roles={"role": _role(*causes)},
        stations=(StationSpec(name="sta", role="role", home=(1.0, 1.0)),),
    )


def test_regime_clock_validation_and_lookup(clock) -> None:
    """Test boundary checks, Saturday-evening lookup and the next regime change."""
    with pytest.raises(ConfigError):
        RegimeClock(day_part_boundaries=(0.0, 9.0, 7.0))
    with pytest.raises(ConfigError):
        RegimeClock(day_part_boundaries=(0.0, 25.0))
    assert clock.regime_at(SATURDAY + 19 * 60) == (3, True)
    assert clock.regime_at(2 * MINUTES_PER_DAY + 8 * 60) == (1, False)
    assert clock.next_change(8 * 60) == 9 * 60
    assert clock.next_change(20 * 60) == MINUTES_PER_DAY
    assert clock.parse_key("evening.weekend") == [(3, True)]
    with pytest.raises(ConfigError):
        clock.parse_key("brunch.weekend")


def test_always_on_cause_gives_all_active_trace(clock) -> None:
    """Test that an infinite off-duration pins the cause on."""
    trace = generate_trace(_role(OnOffCause("c", mean_on=1.0, mean_off=math.inf)), clock, 600, seed=1)
    assert trace.activity[0, BE_COL].all()
    assert not np.delete(trace.activity[0], BE_COL, axis=0).any()


def test_permanently_off_cause_annihilates_the_conjunction(clock) -> None:
    """Test that one cause pinned off keeps the station idle whatever the others do."""
    causes = (OnOffCause("on", mean_on=1.0, mean_off=math.inf), OnOffCause("off", 1.0, 1.0, pinned=False))
    trace = generate_trace(_role(*causes), clock, 600, seed=1)
    assert not trace.activity.any()


def test_activity_is_the_conjunction_of_cause_traces(clock, seed) -> None:
    """Test that the user/AC trace equals the AND of its causes' traces."""
    causes = (OnOffCause("a", 30.0, 20.0), OnOffCause("b", 60.0, 15.0))
    trace = generate_trace(_role(*causes), clock, 2 * MINUTES_PER_DAY, seed=seed)
    a, b = trace.causes[("role", BE, "a")], trace.causes[("role", BE, "b")]
    np.testing.assert_array_equal(trace.activity[0, BE_COL], a & b)
    assert trace.activity[0, BE_COL].mean() <= min(a.mean(), b.mean())


@pytest.mark.slow
def test_long_run_duty_cycle_follows_the_regime(clock, seed) -> None:
    """Test per-regime active fractions against mean_on / (mean_on + mean_off)."""
    evening = {(3, False): CauseRegime(90.0, 20.0), (3, True): CauseRegime(90.0, 20.0)}
    cause = OnOffCause("c", mean_on=30.0, mean_off=60.0, regime_table=evening)
    horizon = 12 * MINUTES_PER_WEEK
    trace = generate_trace(_role(cause), clock, horizon, seed=seed)
    active = trace.activity[0, BE_COL]
    in_evening = clock.codes(np.arange(horizon)) % clock.n_parts == 3
    assert active[in_evening].mean() == pytest.approx(90.0 / 110.0, abs=0.08)
    assert active[~in_evening].mean() == pytest.approx(1.0 / 3.0, abs=0.05)


def test_generation_is_seed_deterministic(tc1_config) -> None:
    """Test identical scenarios for identical seeds and different ones otherwise."""
    population = Population.from_dict(tc1_config)
    first = generate_scenario(population, MINUTES_PER_DAY, seed=11)
    again = generate_scenario(population, MINUTES_PER_DAY, seed=11)
    other = generate_scenario(population, MINUTES_PER_DAY, seed=12)
    np.testing.assert_array_equal(first.activity, again.activity)
    np.testing.assert_array_equal(first.positions, again.positions)
    assert not np.array_equal(first.activity, other.activity)


def test_visitors_gather_in_the_living_room_on_weekend_evenings(tc1_config) -> None:
    """Test the location rule and the pinned visit cause around Saturday 18:00."""
    population = Population.from_dict(tc1_config)
    start = SATURDAY + 17 * 60
    scenario = generate_scenario(population, 120, seed=3, start=start)
    row = scenario.station_index("sta07")
    vi = list(AccessCategory).index(AccessCategory.VI)
    np.testing.assert_allclose(scenario.positions[row, 0], (16.5, 9.5))
    np.testing.assert_allclose(scenario.positions[row, 60], (14.0, 8.0))
    assert not scenario.activity[row, vi, :60].any()
    assert scenario.activity[row, vi, 60:].all()
    assert scenario.rates[row, vi] == pytest.approx(10e6)


def test_scenario_slices_frame_and_realized_demand(tc1_config) -> None:
    """Test slice means, the columnar frame layout and Poisson demand realisation."""
    population = Population.from_dict(tc1_config)
    scenario = generate_scenario(population, 60, seed=5, start=SATURDAY + 18 * 60)
    pieces = scenario.slices(15)
    assert [p.start for p in pieces] == [scenario.start + 15 * i for i in range(4)]
    np.testing.assert_allclose(pieces[1].demand, scenario.demand()[:, :, 15:30].mean(axis=2))
    frame = scenario.to_frame()
    assert list(frame.columns) == ["minute", "sta", "ac", "active", "rate", "x", "y"]
    assert len(frame) == len(scenario.stations) * len(AccessCategory) * 60
    realized = scenario.realized_demand(12000, seed=1)
    assert np.all(realized[~scenario.activity] == 0)
    np.testing.assert_array_equal(realized, scenario.realized_demand(12000, seed=1))
    with pytest.raises(DomainError):
        scenario.slices(0)


def test_scenario_rejects_mismatched_shapes() -> None:
    """Test the shape invariants of the scenario container."""
    with pytest.raises(DomainError):
        Scenario(
            start=0,
            horizon=10,
            stations=("a",),
            activity=np.zeros((1, 4, 9), dtype=bool),
            rates=np.zeros((1, 4)),
            positions=np.zeros((1, 10, 2)),
        )


def test_extract_episodes_drops_cut_runs(clock) -> None:
    """Test run-length encoding with the first and last runs discarded."""
    trace = np.array([1, 1, 0, 0, 0, 1, 1, 1, 0], dtype=bool)
    scenario = Scenario(
        start=SATURDAY + 18 * 60,
        horizon=trace.size,
        stations=("a",),
        activity=np.zeros((1, 4, trace.size), dtype=bool),
        rates=np.zeros((1, 4)),
        positions=np.zeros((1, trace.size, 2)),
        causes={("a", BE, "c"): trace},
    )
    episodes = extract_episodes(scenario, clock)
    assert [(e.active, e.start - scenario.start, e.duration) for e in episodes] == [(False, 2, 3.0), (True, 5, 3.0)]
    assert all(e.regime == (3, True) for e in episodes)


def _episode(duration: float, active: bool = True) -> Episode:
    return Episode(sta="a", ac=BE, cause="c", regime=(3, True), active=active, start=0, duration=duration)


def test_update_estimators_edge_cases() -> None:
    """Test the no-observation, full-replacement and invalid-duration cases."""
    est = DurationEstimator(forgetting=1.0)
    assert update_estimators(est, []) is est
    updated = update_estimators(update_estimators(est, [_episode(10.0)]), [_episode(30.0)])
    assert updated.mean(_episode(1.0).key, True) == pytest.approx(30.0)
    assert updated.count(_episode(1.0).key, True) == 2
    with pytest.raises(DomainError):
        update_estimators(est, [_episode(0.0)])
    with pytest.raises(ConfigError):
        DurationEstimator(forgetting=0.0)


def test_estimator_tracks_exponential_durations(seed) -> None:
    """Test that forgetting-factor means of exponential(20) episodes settle around 20 min."""
    rng = np.random.default_rng(seed)
    finals = []
    for _ in range(100):
        est = update_estimators(DurationEstimator(forgetting=0.1), [_episode(d) for d in rng.exponential(20.0, 200)])
        finals.append(est.mean(_episode(1.0).key, True))
    assert np.mean(finals) == pytest.approx(20.0, abs=2.0)
    assert np.std(finals) < 8.0


def test_estimator_params_fall_back_to_prior_and_keep_pins() -> None:
    """Test prior fallback for unseen keys and pinned regimes left untouched."""
    cause = OnOffCause("c", 30.0, 60.0, regime_table={(0, False): CauseRegime(1.0, 1.0, pinned=False)})
    est = update_estimators(DurationEstimator(forgetting=1.0), [_episode(12.0)])
    assert est.params("a", BE, cause, (3, True)).mean_on == pytest.approx(12.0)
    assert est.params("a", BE, cause, (3, True)).mean_off == pytest.approx(60.0)
    assert est.params("a", BE, cause, (0, False)).fixed_state is False


def test_futures_of_an_idle_population_are_empty(clock) -> None:
    """Test one future with every cause pinned off."""
    population = _population(clock, OnOffCause("off", 1.0, 1.0, pinned=False))
    (future,) = emit_futures(DurationEstimator(), population, SATURDAY, horizon=60, count=1)
    assert future.demand().sum() == 0
    assert future.weight == 1.0
    with pytest.raises(DomainError):
        emit_futures(DurationEstimator(), population, SATURDAY, count=0)


def test_untilted_futures_weigh_one_and_are_reproducible(clock) -> None:
    """Test unit weights for beta = 1 and seed-determinism per start time."""
    population = _population(clock, OnOffCause("c", 30.0, 60.0))
    uniform = emit_futures(DurationEstimator(), population, SATURDAY, count=5, strategy=FutureStrategy.UNIFORM)
    neutral = emit_futures(
        DurationEstimator(), population, SATURDAY, count=5, strategy=FutureStrategy.LOAD_TILTED, tilt=1.0
    )
    assert all(f.weight == 1.0 for f in uniform + neutral)
    again = emit_futures(DurationEstimator(), population, SATURDAY, count=5)
    for a, b in zip(uniform, again):
        np.testing.assert_array_equal(a.activity, b.activity)


@pytest.mark.slow
def test_tilted_futures_are_unbiased_after_weighting(clock, seed) -> None:
    """Test that weighted tilted activity agrees with the plain mean within Monte-Carlo error."""
    population = _population(clock, OnOffCause("c", 30.0, 60.0))
    count = 3000
    plain = emit_futures(DurationEstimator(), population, SATURDAY, count=count, seed=seed)
    tilted = emit_futures(
        DurationEstimator(), population, SATURDAY, count=count, strategy=FutureStrategy.LOAD_TILTED, tilt=1.5, seed=seed
    )
    x = np.array([f.activity.mean() for f in plain])
    weights = np.array([f.weight for f in tilted])
    wx = weights * np.array([f.activity.mean() for f in tilted])
    error = math.sqrt(x.var() / count + wx.var() / count)
    assert np.all(weights > 0)
    assert wx.mean() == pytest.approx(x.mean(), abs=4 * error)
    assert weights.mean() == pytest.approx(1.0, abs=4 * weights.std() / math.sqrt(count))
    # tilting raises the unweighted activity
    assert np.mean([f.activity.mean() for f in tilted]) > x.mean()


def test_bin_series_and_autocorrelation_errors() -> None:
    """Test bin sums with a dropped tail, the zero-variance error and the too-short trace error."""
    np.testing.assert_array_equal(bin_series(np.arange(7), 3), [3.0, 12.0])
    with pytest.raises(ZeroVarianceError):
        autocorrelation(np.ones(100), 10)
    with pytest.raises(DomainError):
        autocorrelation(np.arange(10.0), 10)


def test_daily_square_wave_peaks_at_whole_days() -> None:
    """Test that a 24 h square wave correlates best at multiples of 1440 minutes."""
    minutes = np.arange(7 * MINUTES_PER_DAY)
    wave = ((minutes % MINUTES_PER_DAY) < 12 * 60).astype(float)
    acf = autocorrelation(wave, 3 * MINUTES_PER_DAY)
    assert acf[0] == pytest.approx(1.0)
    assert is_local_peak(acf, MINUTES_PER_DAY)
    assert is_local_peak(acf, 2 * MINUTES_PER_DAY)
    assert acf[MINUTES_PER_DAY // 2] < 0


@pytest.mark.slow
def test_household_traffic_repeats_daily_and_weekly(tc1_config, seed) -> None:
    """Test local autocorrelation maxima at the 24 h and 168 h lags of hourly household demand."""
    population = Population.from_dict(tc1_config)
    scenario = generate_scenario(population, 4 * MINUTES_PER_WEEK, seed=seed)
    hourly = bin_series(scenario.aggregate().sum(axis=0), 60)
    acf = autocorrelation(hourly, 192)
    assert is_local_peak(acf, 24)
    assert is_local_peak(acf, 168)
