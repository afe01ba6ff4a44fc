import functools
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from errors import DomainError, NonConvergenceError
from mac.types import ContenderLoad, FixedPointSolution, MacMetrics, QosParams, SlotTiming

logger = logging.getLogger(name=__name__)

EXACT_ENUMERATION_LIMIT = 12
P_CEILING = 1.0 - 1e-12
SATURATED_Q = 1.0 - 1e-12
HALF_P_WINDOW = 1e-9
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 5000
RELAXATION = 0.5
MIN_RELAXATION = 1.0 / 64
ANNEAL_BELOW = 1e-4
ANNEAL_STEP = 0.05
MIN_HOMOTOPY_STEP = 1e-3

Step = Callable[[np.ndarray], Tuple[np.ndarray, float]]


@dataclass(frozen=True, eq=False)
class EffectiveContenders:
    """Per-contender arrays with AIFSN and TXOP folded into the frame times.

    lam counts channel accesses, so a TXOP burst of k frames is one access
    carrying k payloads and the offered load lam * payload is unchanged.
    """

    lam: np.ndarray
    t_success: np.ndarray
    t_collision: np.ndarray
    payload: np.ndarray
    w0: np.ndarray
    m: np.ndarray

    @property
    def size(self) -> int:
        return int(self.lam.size)

    @property
    def uniform_collision(self) -> bool:
        return self.size == 0 or bool(np.all(self.t_collision == self.t_collision[0]))


@dataclass(frozen=True, eq=False)
class SlotTerms:
    p_idle: float
    p_success: np.ndarray
    p_collision: float
    collision_time: float
    truncated_mass: float
    e_s: float


def fold_contenders(loads: Sequence[ContenderLoad], timing: SlotTiming) -> EffectiveContenders:
    bursts = np.array([load.burst_frames for load in loads], dtype=float)
    aifs = np.array([load.qos.aifsn for load in loads], dtype=float) * timing.sigma
    return EffectiveContenders(
        lam=np.array([load.lam for load in loads], dtype=float) / np.maximum(bursts, 1.0),
        t_success=bursts * np.array([load.t_success for load in loads], dtype=float) + aifs,
        t_collision=np.array([load.t_collision for load in loads], dtype=float) + aifs,
        payload=bursts * np.array([load.payload for load in loads], dtype=float),
        w0=np.array([load.qos.w0 for load in loads], dtype=float),
        m=np.array([load.qos.m for load in loads], dtype=float),
    )


def _exclusive_products(values: np.ndarray) -> np.ndarray:
    """prod_{j != i} values_j for every i, without dividing."""
    if values.size == 0:
        return values.copy()
    prefix = np.concatenate(([1.0], np.cumprod(values[:-1])))
    suffix = np.concatenate((np.cumprod(values[::-1][:-1])[::-1], [1.0]))
    return prefix * suffix


@functools.lru_cache(maxsize=None)
def _collision_subsets(n: int) -> np.ndarray:
    """Boolean membership rows of every subset with two or more members."""
    masks = np.arange(1 << n)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    table = bits[bits.sum(axis=1) >= 2]
    table.flags.writeable = False
    return table


@functools.lru_cache(maxsize=None)
def _triples(n: int) -> np.ndarray:
    table = np.array(list(itertools.combinations(range(n), 3)), dtype=int).reshape(-1, 3)
    table.flags.writeable = False
    return table


def _truncated_collisions(tau: np.ndarray, t_collision: np.ndarray) -> Tuple[float, float]:
    """Collision time and mass of pairs and triples only."""
    tau = np.minimum(tau, P_CEILING)
    base = float(np.prod(1.0 - tau))
    ratio = tau / (1.0 - tau)
    i, j = np.triu_indices(tau.size, k=1)
    pair_mass = base * ratio[i] * ratio[j]
    pair_time = float(pair_mass @ np.maximum(t_collision[i], t_collision[j]))
    triples = _triples(tau.size)
    triple_mass = base * np.prod(ratio[triples], axis=1)
    triple_time = float(triple_mass @ np.max(t_collision[triples], axis=1))
    return pair_time + triple_time, float(pair_mass.sum() + triple_mass.sum())


def _slot_terms(tau: np.ndarray, eff: EffectiveContenders, sigma: float) -> SlotTerms:
    idle_each = 1.0 - tau
    p_idle = float(np.prod(idle_each))
    p_success = tau * _exclusive_products(idle_each)
    p_collision = max(0.0, 1.0 - p_idle - float(p_success.sum()))
    truncated = 0.0
    if tau.size < 2 or p_collision == 0.0:
        collision_time = 0.0
    elif eff.uniform_collision:
        collision_time = p_collision * float(eff.t_collision[0])
    elif tau.size <= EXACT_ENUMERATION_LIMIT:
        members = _collision_subsets(tau.size)
        probabilities = np.prod(np.where(members, tau, idle_each), axis=1)
        durations = np.max(np.where(members, eff.t_collision, 0.0), axis=1)
        collision_time = float(probabilities @ durations)
    else:
        collision_time, covered = _truncated_collisions(tau, eff.t_collision)
        truncated = max(0.0, p_collision - covered)
    e_s = p_idle * sigma + float(p_success @ eff.t_success) + collision_time
    return SlotTerms(
        p_idle=p_idle,
        p_success=p_success,
        p_collision=p_collision,
        collision_time=collision_time,
        truncated_mass=truncated,
        e_s=e_s,
    )


def _check_tau(tau: Sequence[float], size: int) -> np.ndarray:
    values = np.asarray(tau, dtype=float)
    if values.ndim != 1 or values.size != size:
        raise DomainError(f"expected {size} attempt probabilities, got shape {values.shape}")
    if np.any(values < 0) or np.any(values > 1):
        raise DomainError("attempt probabilities must lie in [0, 1]")
    return values


def expected_slot_time(
    tau: Sequence[float], loads: Sequence[ContenderLoad], timing: SlotTiming
) -> float:
    """Average duration of one state transition, E_S, in seconds."""
    values = _check_tau(tau, len(loads))
    terms = _slot_terms(values, fold_contenders(loads, timing), timing.sigma)
    if terms.truncated_mass > 0:
        logger.debug(f"Collision sum truncated to pairs and triples, dropped mass {terms.truncated_mass:.3e}")
    return terms.e_s


def _power_sum(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """(1 - x**k) / (1 - x), replaced by its limit k when x is within 1e-9 of 1."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    near_one = np.abs(1.0 - x) < HALF_P_WINDOW
    safe = np.where(near_one, 0.0, x)
    return np.where(near_one, k, (1.0 - safe**k) / (1.0 - safe))


def _attempt_probability(q, p, p_idle, w0, m) -> np.ndarray:
    q, p, p_idle, w0, m = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (q, p, p_idle, w0, m))
    )
    two_p = 2.0 * p
    saturated_tau = 2.0 / ((w0 + 1.0) + p * w0 * _power_sum(two_p, m))

    active = (q > 0) & (q < SATURATED_Q)
    qs = np.where(active, q, 0.5)
    rest = 1.0 - qs
    window_hit = -np.expm1(w0 * np.log1p(-qs))  # 1 - (1 - q)^W0
    tail = np.where(m == 0, 0.5, 1.0 + p * _power_sum(two_p, np.maximum(m - 1.0, 0.0)))

    inv_b = (
        rest
        + qs**2 * w0 * (w0 + 1.0) / (2.0 * window_hit)
        + qs * (w0 + 1.0) / (2.0 * rest)
        * (qs**2 * w0 / window_hit + (1.0 - p_idle) * rest - qs * p_idle * (1.0 - p))
        + p * qs**2 / (2.0 * rest * (1.0 - p))
        * (w0 / window_hit - (1.0 - p) * p_idle)
        * (2.0 * w0 * tail + 1.0)
    )
    tau = (qs**2 * w0 / ((1.0 - p) * rest * window_hit) - qs**2 * p_idle / rest) / inv_b
    tau = np.where(q <= 0, 0.0, np.where(q >= SATURATED_Q, saturated_tau, tau))
    return np.clip(tau, 0.0, 1.0)


def attempt_probability(
    q: float, p: float, p_idle: Optional[float] = None, *, qos: QosParams
) -> float:
    """Per-slot transmission attempt probability of a non-saturated contender.

    p_idle defaults to 1 - p. q = 0 gives 0; q at 1 uses the saturated limit.
    """
    if p_idle is None:
        p_idle = 1.0 - p
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q}")
    if not 0.0 <= p < 1.0:
        raise DomainError(f"p must lie in [0, 1), got {p}")
    if not 0.0 <= p_idle <= 1.0:
        raise DomainError(f"p_idle must lie in [0, 1], got {p_idle}")
    return float(_attempt_probability(q, p, p_idle, qos.w0, qos.m))


def expected_states_per_success(p, w0, m) -> np.ndarray:
    """E[N]: states visited from entering backoff to the next success."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p >= 1):
        raise DomainError("collision probability must lie in [0, 1)")
    w0 = np.asarray(w0, dtype=float)
    m = np.asarray(m, dtype=float)
    two_p = 2.0 * p
    return (
        w0 / 2.0 * _power_sum(two_p, m + 1.0)
        + w0 * p * two_p**m / (2.0 * (1.0 - p))
        + 1.0 / (2.0 * (1.0 - p))
    )


def _damped_iteration(
    step: Step, x0: np.ndarray, *, tol: float, max_iter: int
) -> Tuple[np.ndarray, float, int, bool]:
    x = x0.copy()
    relaxation = RELAXATION
    previous = math.inf
    best_x, best_residual = x.copy(), math.inf
    for iteration in range(1, max_iter + 1):
        target, residual = step(x)
        if residual < best_residual:
            best_x, best_residual = x.copy(), residual
        if residual <= tol:
            return x, residual, iteration, True
        if residual > previous:
            relaxation = max(relaxation / 2.0, MIN_RELAXATION)
        elif residual < ANNEAL_BELOW:
            relaxation = min(1.0, relaxation + ANNEAL_STEP)
        previous = residual
        x = x + relaxation * (target - x)
    return best_x, best_residual, max_iter, False


def _solve_with_fallback(
    step_for_scale: Callable[[float], Step],
    x0: np.ndarray,
    *,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, float, int]:
    """Damped iteration, then continuation on a load scale in [0, 1] with step bisection."""
    x, residual, iterations, converged = _damped_iteration(step_for_scale(1.0), x0, tol=tol, max_iter=max_iter)
    if converged:
        return x, residual, iterations

    logger.info(f"Direct iteration stalled at residual {residual:.2e}, continuing on the load scale")
    total = iterations
    x = np.zeros_like(x0)
    scale, increment = 0.0, 0.25
    while scale < 1.0:
        target_scale = min(1.0, scale + increment)
        x_try, residual, iterations, converged = _damped_iteration(
            step_for_scale(target_scale), x, tol=tol, max_iter=max_iter
        )
        total += iterations
        if converged:
            x, scale = x_try, target_scale
            increment = min(2.0 * increment, 0.5)
            continue
        increment /= 2.0
        if increment < MIN_HOMOTOPY_STEP:
            raise NonConvergenceError(
                f"fixed point not found beyond load scale {scale:.4f}",
                best_residual=residual,
                iterations=total,
            )
    return x, residual, total


def _initial_guess(lam: np.ndarray, w0: np.ndarray, sigma: float) -> np.ndarray:
    start = np.minimum(lam * sigma * w0, 0.5)
    return np.concatenate((start, np.zeros_like(start), start))


def _fixed_point_step(eff: EffectiveContenders, sigma: float, lam: np.ndarray) -> Step:
    k = eff.size

    def step(x: np.ndarray) -> Tuple[np.ndarray, float]:
        q, p, tau = x[:k], x[k : 2 * k], x[2 * k :]
        e_s = _slot_terms(tau, eff, sigma).e_s
        q_new = -np.expm1(-lam * e_s) + 0.0
        p_new = np.minimum(1.0 - _exclusive_products(1.0 - tau), P_CEILING)
        tau_new = _attempt_probability(q_new, p_new, 1.0 - p_new, eff.w0, eff.m)
        tau_eq = _attempt_probability(q, np.minimum(p, P_CEILING), 1.0 - p, eff.w0, eff.m)
        residual = max(
            float(np.max(np.abs(q - q_new))),
            float(np.max(np.abs(p - p_new))),
            float(np.max(np.abs(tau - tau_eq))),
        )
        return np.concatenate((q_new, p_new, tau_new)), residual

    return step


def solve_fixed_point(
    loads: Sequence[ContenderLoad],
    timing: SlotTiming,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedPointSolution:
    """Solve the 3K equations in (q, p, tau) for K heterogeneous contenders."""
    if len(loads) == 0:
        raise DomainError("at least one contender is required")
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    eff = fold_contenders(loads, timing)
    k = eff.size
    x, residual, iterations = _solve_with_fallback(
        lambda scale: _fixed_point_step(eff, timing.sigma, eff.lam * scale),
        _initial_guess(eff.lam, eff.w0, timing.sigma),
        tol=tol,
        max_iter=max_iter,
    )
    logger.debug(f"Fixed point for {k} contenders: residual {residual:.2e} after {iterations} iterations")
    return FixedPointSolution(
        q=x[:k].copy(), p=x[k : 2 * k].copy(), tau=x[2 * k :].copy(), residual=residual, iterations=iterations
    )


def _symmetric_step(eff: EffectiveContenders, n: int, sigma: float, lam: float) -> Step:
    t_success = float(eff.t_success[0])
    t_collision = float(eff.t_collision[0])

    def step(x: np.ndarray) -> Tuple[np.ndarray, float]:
        q, p, tau = (float(v) for v in x)
        idle = (1.0 - tau) ** n
        success = n * tau * (1.0 - tau) ** (n - 1)
        e_s = idle * sigma + success * t_success + max(0.0, 1.0 - idle - success) * t_collision
        q_new = -math.expm1(-lam * e_s) + 0.0
        p_new = min(1.0 - (1.0 - tau) ** (n - 1), P_CEILING)
        tau_new, tau_eq = _attempt_probability(
            [q_new, q], [p_new, min(p, P_CEILING)], [1.0 - p_new, 1.0 - p], eff.w0[0], eff.m[0]
        )
        residual = max(abs(q - q_new), abs(p - p_new), abs(tau - float(tau_eq)))
        return np.array([q_new, p_new, float(tau_new)]), residual

    return step


def solve_symmetric(
    load: ContenderLoad,
    n: int,
    timing: SlotTiming,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedPointSolution:
    """Three-equation reduction for n identical contenders."""
    if n < 1:
        raise DomainError(f"need at least one contender, got {n}")
    eff = fold_contenders([load], timing)
    lam = float(eff.lam[0])
    x, residual, iterations = _solve_with_fallback(
        lambda scale: _symmetric_step(eff, n, timing.sigma, lam * scale),
        _initial_guess(eff.lam, eff.w0, timing.sigma),
        tol=tol,
        max_iter=max_iter,
    )
    q, p, tau = (float(v) for v in x)
    return FixedPointSolution(
        q=np.full(n, q), p=np.full(n, p), tau=np.full(n, tau), residual=residual, iterations=iterations
    )


def fixed_point_residual(
    sol: FixedPointSolution, loads: Sequence[ContenderLoad], timing: SlotTiming
) -> float:
    """Max absolute residual of the 3K equations at a candidate solution."""
    eff = fold_contenders(loads, timing)
    tau = _check_tau(sol.tau, eff.size)
    e_s = _slot_terms(tau, eff, timing.sigma).e_s
    q_eq = -np.expm1(-eff.lam * e_s)
    p_eq = 1.0 - _exclusive_products(1.0 - tau)
    tau_eq = _attempt_probability(sol.q, np.minimum(sol.p, P_CEILING), 1.0 - sol.p, eff.w0, eff.m)
    return max(
        float(np.max(np.abs(sol.q - q_eq))),
        float(np.max(np.abs(sol.p - p_eq))),
        float(np.max(np.abs(tau - tau_eq))),
    )


def derive_metrics(
    sol: FixedPointSolution, loads: Sequence[ContenderLoad], timing: SlotTiming
) -> MacMetrics:
    """Normalized throughput, transmission/success probabilities and mean delays.

    E[P], T_S and T_C are weighted by each contender's success or collision
    share, so the denominator of S is exactly E_S.
    """
    eff = fold_contenders(loads, timing)
    tau = _check_tau(sol.tau, eff.size)
    terms = _slot_terms(tau, eff, timing.sigma)
    e_n = expected_states_per_success(np.minimum(sol.p, P_CEILING), eff.w0, eff.m)
    p_tr = 1.0 - terms.p_idle
    if p_tr <= 0.0:
        return MacMetrics(
            s_norm=0.0,
            p_tr=0.0,
            p_s=math.nan,
            e_s=terms.e_s,
            e_n=e_n,
            e_d=np.full(eff.size, math.inf),
            idle=True,
            per_contender_s=np.zeros(eff.size),
        )
    per_contender = terms.p_success * eff.payload / terms.e_s
    return MacMetrics(
        s_norm=float(min(1.0, max(0.0, per_contender.sum()))),
        p_tr=p_tr,
        p_s=float(terms.p_success.sum() / p_tr),
        e_s=terms.e_s,
        e_n=e_n,
        e_d=e_n * terms.e_s,
        truncated_mass=terms.truncated_mass,
        per_contender_s=per_contender,
    )
