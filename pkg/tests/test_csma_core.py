import itertools
import math

import numpy as np
import pytest

from errors import DomainError, NonConvergenceError
from mac.markov import (
    attempt_probability,
    derive_metrics,
    expected_slot_time,
    expected_states_per_success,
    fixed_point_residual,
    solve_fixed_point,
    solve_symmetric,
)
from mac.oracle import simulate_backoff_chain, simulate_states_per_success
from mac.types import ContenderLoad, QosParams, SlotTiming

SIGMA = 9e-6
TIMING = SlotTiming(sigma=SIGMA)
BE = QosParams(w0=16, m=6, aifsn=3)
PLAIN = QosParams(w0=16, m=6)
# PPDU of a 1500 B frame at 143.4 Mbps
PPDU = 129.508e-6


def _contender(offered_load: float, qos: QosParams = BE, payload: float = PPDU) -> ContenderLoad:
    return ContenderLoad(
        lam=offered_load / payload,
        t_success=payload + 60e-6,
        t_collision=payload + 60e-6,
        payload=payload,
        qos=qos,
    )


def test_slot_time_idle_network() -> None:
    """Test that silent contenders leave only the idle slot term."""
    loads = [_contender(0.1), _contender(0.2)]
    assert expected_slot_time([0.0, 0.0], loads, TIMING) == pytest.approx(SIGMA)


def test_slot_time_certain_lone_transmission() -> None:
    """Test that a certain lone attempt occupies its success time."""
    loads = [
        ContenderLoad(lam=10.0, t_success=1e-3, t_collision=1e-3, payload=0.5e-3, qos=PLAIN),
        ContenderLoad(lam=10.0, t_success=2e-3, t_collision=2e-3, payload=1e-3, qos=PLAIN),
    ]
    assert expected_slot_time([1.0, 0.0], loads, TIMING) == pytest.approx(1e-3)


def _brute_force_slot_time(tau, loads) -> float:
    total = 0.0
    for outcome in itertools.product([False, True], repeat=len(tau)):
        weight = math.prod(t if sent else 1.0 - t for t, sent in zip(tau, outcome))
        senders = [load for load, sent in zip(loads, outcome) if sent]
        if not senders:
            duration = SIGMA
        elif len(senders) == 1:
            duration = senders[0].t_success
        else:
            duration = max(load.t_collision for load in senders)
        total += weight * duration
    return total


def test_slot_time_matches_outcome_enumeration() -> None:
    """Test E_S against brute force over all transmit outcomes of 3 heterogeneous contenders."""
    loads = [
        ContenderLoad(lam=50.0, t_success=300e-6, t_collision=250e-6, payload=200e-6, qos=PLAIN),
        ContenderLoad(lam=80.0, t_success=500e-6, t_collision=420e-6, payload=400e-6, qos=PLAIN),
        ContenderLoad(lam=20.0, t_success=900e-6, t_collision=180e-6, payload=700e-6, qos=PLAIN),
    ]
    tau = [0.1, 0.1, 0.1]
    assert expected_slot_time(tau, loads, TIMING) == pytest.approx(_brute_force_slot_time(tau, loads), rel=1e-12)


def test_slot_time_truncated_for_large_networks() -> None:
    """Test that pair and triple truncation stays within the dropped collision mass."""
    rng = np.random.default_rng(7)
    loads = [
        ContenderLoad(
            lam=10.0,
            t_success=float(t) + 50e-6,
            t_collision=float(t),
            payload=float(t),
            qos=PLAIN,
        )
        for t in rng.uniform(100e-6, 900e-6, size=13)
    ]
    tau = rng.uniform(0.001, 0.02, size=13)
    exact = _brute_force_slot_time(list(tau), loads)
    approx = expected_slot_time(tau, loads, TIMING)
    assert approx <= exact * (1 + 1e-12)
    assert exact - approx < 1e-3 * exact


def test_slot_time_dimension_mismatch() -> None:
    """Test that a tau vector of the wrong length is rejected."""
    with pytest.raises(DomainError):
        expected_slot_time([0.1], [_contender(0.1), _contender(0.1)], TIMING)


def test_attempt_probability_edges() -> None:
    """Test the empty and the saturated windowless contender."""
    assert attempt_probability(0.0, 0.2, qos=BE) == 0.0
    assert attempt_probability(1.0, 0.0, qos=QosParams(w0=1, m=0)) == pytest.approx(1.0)


def test_attempt_probability_rejects_certain_collision() -> None:
    """Test that p = 1 is outside the formula's domain."""
    with pytest.raises(DomainError):
        attempt_probability(0.3, 1.0, qos=BE)


def test_attempt_probability_continuous_at_half() -> None:
    """Test that the 1 - 2p limit is used without a jump at p = 0.5."""
    at_half = attempt_probability(0.3, 0.5, qos=BE)
    nearby = attempt_probability(0.3, 0.5 + 1e-6, qos=BE)
    assert 0.0 < at_half < 1.0
    assert at_half == pytest.approx(nearby, rel=1e-4)


def test_attempt_probability_saturated_limit() -> None:
    """Test that q close to 1 approaches the saturated attempt rate."""
    saturated = attempt_probability(1.0, 0.2, qos=BE)
    assert attempt_probability(1.0 - 1e-7, 0.2, qos=BE) == pytest.approx(saturated, rel=1e-4)


@pytest.mark.slow
def test_attempt_probability_matches_backoff_chain() -> None:
    """Test the closed form against a Monte-Carlo walk of the backoff chain."""
    analytic = attempt_probability(0.3, 0.1, qos=PLAIN)
    simulated = simulate_backoff_chain(0.3, 0.1, PLAIN, steps=10_000, chains=2048, seed=11)
    assert simulated == pytest.approx(analytic, rel=0.02)


def test_states_per_success_without_collisions() -> None:
    """Test that E[N] collapses to (W0 + 1) / 2 at p = 0."""
    assert float(expected_states_per_success(0.0, 16, 6)) == 8.5


@pytest.mark.slow
def test_states_per_success_matches_backoff_oracle(seed) -> None:
    """Test E[N] against Monte-Carlo at p = 0.3 and at random parameter points."""
    analytic = float(expected_states_per_success(0.3, 16, 6))
    assert simulate_states_per_success(0.3, PLAIN, seed=seed) == pytest.approx(analytic, rel=0.02)

    rng = np.random.default_rng(seed)
    for _ in range(20):
        p = float(rng.uniform(0.05, 0.4))
        qos = QosParams(w0=int(rng.choice([4, 8, 16, 32])), m=int(rng.integers(0, 6)))
        expected = float(expected_states_per_success(p, qos.w0, qos.m))
        simulated = simulate_states_per_success(p, qos, seed=int(rng.integers(1 << 31)))
        assert simulated == pytest.approx(expected, rel=0.02)


def test_fixed_point_empty_network() -> None:
    """Test that a silent contender solves to all zeros."""
    sol = solve_fixed_point([_contender(0.0)], TIMING)
    assert sol.q[0] == 0.0
    assert sol.p[0] == 0.0
    assert sol.tau[0] == 0.0


def test_fixed_point_lone_contender_never_collides() -> None:
    """Test that one contender has p = 0 exactly at any load."""
    sol = solve_fixed_point([_contender(0.4)], TIMING)
    assert sol.p[0] == 0.0
    assert 0.0 < sol.tau[0] < 1.0
    assert 0.0 < sol.q[0] < 1.0


def test_fixed_point_rejects_bad_input() -> None:
    """Test the empty contender list and a non-positive tolerance."""
    with pytest.raises(DomainError):
        solve_fixed_point([], TIMING)
    with pytest.raises(DomainError):
        solve_fixed_point([_contender(0.1)], TIMING, tol=0.0)


def _mixed_contenders(scale: float):
    vo = QosParams(w0=4, m=1, aifsn=2, txop=1504.0)
    vi = QosParams(w0=8, m=1, aifsn=2, txop=3008.0)
    bk = QosParams(w0=16, m=6, aifsn=7)
    return [
        _contender(0.05 * scale, vo),
        _contender(0.15 * scale, vi),
        _contender(0.10 * scale, BE),
        _contender(0.08 * scale, bk, payload=300e-6),
        _contender(0.12 * scale, BE, payload=200e-6),
    ]


@pytest.mark.parametrize("scale", [0.2, 1.0, 2.0])
def test_fixed_point_residual_within_tolerance(scale) -> None:
    """Test that substituting the solution back leaves residual below 1e-8."""
    loads = _mixed_contenders(scale)
    sol = solve_fixed_point(loads, TIMING)
    assert sol.converged
    assert fixed_point_residual(sol, loads, TIMING) <= 1e-8
    for values in (sol.q, sol.p, sol.tau):
        assert np.all((values >= 0.0) & (values <= 1.0))


@pytest.mark.slow
def test_fixed_point_converges_on_random_heterogeneous_networks(seed) -> None:
    """Test that 1000 random mixed networks converge at least 99 % of the time with residual below 1e-8."""
    rng = np.random.default_rng(seed)
    categories = [
        QosParams(w0=4, m=1, aifsn=2, txop=1504.0),
        QosParams(w0=8, m=1, aifsn=2, txop=3008.0),
        BE,
        QosParams(w0=16, m=6, aifsn=7),
    ]
    instances, failures = 1000, 0
    for _ in range(instances):
        size = int(rng.integers(2, 9))
        total_load = rng.uniform(0.01, 1.5)
        shares = rng.dirichlet(np.ones(size))
        loads = [
            _contender(total_load * share, categories[int(rng.integers(len(categories)))], rng.uniform(100e-6, 1500e-6))
            for share in shares
        ]
        try:
            sol = solve_fixed_point(loads, TIMING)
        except NonConvergenceError:
            failures += 1
            continue
        assert fixed_point_residual(sol, loads, TIMING) <= 1e-8
        for values in (sol.q, sol.p, sol.tau):
            assert np.all((values >= 0.0) & (values <= 1.0))
    assert failures / instances < 0.01


def test_fixed_point_collisions_grow_with_load() -> None:
    """Test that raising every arrival rate never lowers any collision probability."""
    previous = np.zeros(5)
    for scale in [0.2, 0.5, 1.0, 1.5, 2.0]:
        sol = solve_fixed_point(_mixed_contenders(scale), TIMING)
        assert np.all(sol.p >= previous - 1e-9)
        previous = sol.p


def test_fixed_point_permutation_symmetry() -> None:
    """Test that permuting contenders permutes the solution identically."""
    loads = _mixed_contenders(1.0)
    order = [3, 0, 4, 1, 2]
    base = solve_fixed_point(loads, TIMING)
    permuted = solve_fixed_point([loads[i] for i in order], TIMING)
    np.testing.assert_allclose(permuted.tau, base.tau[order], rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(permuted.p, base.p[order], rtol=1e-6, atol=1e-9)


def test_symmetric_solver_agrees_with_full_system() -> None:
    """Test that the three-equation reduction matches the 3K system."""
    loads = [_contender(0.06) for _ in range(6)]
    full = solve_fixed_point(loads, TIMING)
    reduced = solve_symmetric(loads[0], 6, TIMING)
    np.testing.assert_allclose(reduced.tau, full.tau, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(reduced.q, full.q, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(reduced.p, full.p, rtol=1e-6, atol=1e-9)


def test_metrics_idle_channel() -> None:
    """Test that all-silent contenders give S = 0 and infinite delay."""
    loads = [_contender(0.0), _contender(0.0)]
    metrics = derive_metrics(solve_fixed_point(loads, TIMING), loads, TIMING)
    assert metrics.idle
    assert metrics.s_norm == 0.0
    assert math.isnan(metrics.p_s)
    assert np.all(np.isinf(metrics.e_d))


def test_metrics_delay_is_states_times_slot() -> None:
    """Test that E[D] = E[N] * E_S for every contender."""
    loads = _mixed_contenders(1.0)
    metrics = derive_metrics(solve_fixed_point(loads, TIMING), loads, TIMING)
    np.testing.assert_allclose(metrics.e_d, metrics.e_n * metrics.e_s)
    assert 0.0 < metrics.s_norm <= 1.0
    assert metrics.s_norm == pytest.approx(metrics.per_contender_s.sum())


def test_throughput_tracks_load_in_linear_regime() -> None:
    """Test that S follows total offered load with slope close to one at low load."""
    totals = np.linspace(0.02, 0.15, 8)
    throughputs = []
    for total in totals:
        load = _contender(total / 10)
        sol = solve_symmetric(load, 10, TIMING)
        throughputs.append(derive_metrics(sol, [load] * 10, TIMING).s_norm)
    slope = np.polyfit(totals, throughputs, deg=1)[0]
    assert 0.9 <= slope <= 1.0 + 1e-3
