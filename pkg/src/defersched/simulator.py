"""Seeded Monte Carlo simulation of the slotted system.

Under a stationary rule the pending service only depends on how many
consecutive arrivals preceded the current slot: after ``j`` of them it is
``y_j``, where ``y_0 = 0`` and ``y_{j+1} = pi(y_j)``. The simulator therefore
draws the arrival sequence, computes run lengths with numpy, and looks the
pending level up on the orbit instead of stepping a Python loop per slot.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .model import TOL, DomainError, ModelParams
from .nash_core import nash_policy
from .piecewise import PiecewisePolicy
from .policy_core import optimal_policy

MIN_HORIZON = 10_000
WARMUP = 1_000
CHARGES = ("deferral", "partial")

PolicyLike = Union[PiecewisePolicy, Callable[[float], float]]


@dataclass(frozen=True)
class SimulationReport:
    avg_cost: float
    agent_avg_cost: float
    renewal_mean: Optional[float]
    renewal_stderr: Optional[float]
    pending_histogram: tuple[tuple[float, float], ...]
    fixed_point_hit: Optional[float]
    horizon: int
    seed: int

    def as_dict(self) -> dict:
        out = asdict(self)
        out["pending_histogram"] = [list(row) for row in self.pending_histogram]
        return out


def _apply(policy: PolicyLike, x: float, psi: float) -> float:
    if isinstance(policy, PiecewisePolicy):
        u = policy(x)
    else:
        u = float(policy(x))
    if not (-TOL <= u <= psi + TOL) or math.isnan(u):
        raise DomainError(f"policy returned deferral {u!r} at pending level {x!r}; must lie in [0, {psi}]")
    return min(max(u, 0.0), psi)


def orbit(policy: PolicyLike, psi: float, length: int) -> tuple[np.ndarray, bool]:
    """``y_0 .. y_n`` with ``n <= length``, truncated once a fixed point is reached.

    Returns the orbit and whether it ended on a fixed point.
    """
    ys = [0.0]
    for _ in range(length):
        nxt = _apply(policy, ys[-1], psi)
        if abs(nxt - ys[-1]) <= 1e-14:
            return np.array(ys), True
        ys.append(nxt)
    return np.array(ys), False


def _draw(params: ModelParams, slots: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random(slots) < params.p


def _run_lengths(arrivals: np.ndarray) -> np.ndarray:
    """Consecutive arrivals immediately before each slot (zero before slot 0)."""
    n = len(arrivals)
    idx = np.arange(n)
    last_idle = np.maximum.accumulate(np.where(arrivals, -1, idx))
    runs = np.empty(n, dtype=np.int64)
    runs[0] = 0
    runs[1:] = idx[:-1] - last_idle[:-1]
    return runs


def _trajectory(policy: PolicyLike, params: ModelParams, arrivals: np.ndarray):
    runs = _run_lengths(arrivals)
    longest = int(runs.max(initial=0)) + 1
    ys, settled = orbit(policy, params.psi, longest)
    last = len(ys) - 1
    pending = ys[np.minimum(runs, last)]
    deferred = np.where(arrivals, ys[np.minimum(runs + 1, last)], 0.0)
    hit = float(ys[-1]) if settled and longest - 1 >= last else None
    return pending, deferred, hit


def pending_path(policy: PolicyLike, params: ModelParams, horizon: int, seed: int) -> np.ndarray:
    """Pending service at the start of every slot, from an empty system."""
    arrivals = _draw(params, horizon, seed)
    return _trajectory(policy, params, arrivals)[0]


def simulate(policy: PolicyLike, params: ModelParams, horizon: int, seed: int,
             warmup: int = WARMUP, charge: str = "deferral") -> SimulationReport:
    """Run ``warmup + horizon`` slots and report statistics over the last ``horizon``.

    ``charge`` selects when the waiting cost applies: ``"deferral"`` charges it
    whenever anything is deferred, ``"partial"`` only when the deferral is strictly
    between zero and the whole request.
    """
    if horizon < MIN_HORIZON:
        raise DomainError(f"horizon must be at least {MIN_HORIZON}, got {horizon}")
    if charge not in CHARGES:
        raise DomainError(f"charge must be one of {CHARGES}, got {charge!r}")
    psi, d = params.psi, params.d
    arrivals = _draw(params, warmup + horizon, seed)
    pending, deferred, hit = _trajectory(policy, params, arrivals)
    if charge == "deferral":
        charged = deferred > 0
    else:
        charged = (deferred > 0) & (deferred < psi)
    load = pending + np.where(arrivals, psi - deferred, 0.0)
    slot_cost = load ** 2 + d * charged
    window = slice(warmup, None)
    avg_cost = float(np.mean(slot_cost[window]))

    # An agent's own bill: its share of this slot plus its deferred part at next slot's price.
    next_load = np.append(load[1:], np.nan)
    agent = (psi - deferred) * load + deferred * next_load + d * charged
    mask = arrivals.copy()
    mask[:warmup] = False
    mask[-1] = False
    agent_avg = float(np.mean(agent[mask])) if mask.any() else float("nan")

    renewal_mean = renewal_stderr = None
    if not params.is_edge:
        starts = np.nonzero(arrivals[1:] & ~arrivals[:-1])[0] + 1
        starts = starts[starts >= warmup]
        if len(starts) > 2:
            cycles = np.diff(starts)
            renewal_mean = float(np.mean(cycles))
            renewal_stderr = float(np.std(cycles, ddof=1) / math.sqrt(len(cycles)))

    seen = pending[window][arrivals[window]]
    hist: tuple[tuple[float, float], ...] = ()
    if len(seen):
        support, counts = np.unique(seen, return_counts=True)
        masses = counts / counts.sum()
        hist = tuple(zip(support.tolist(), masses.tolist()))
    return SimulationReport(avg_cost, agent_avg, renewal_mean, renewal_stderr, hist, hit, horizon, seed)


def pending_distribution(policy: PolicyLike, params: ModelParams, k_max: int) -> list[tuple[float, float]]:
    """Stationary law of the pending level seen by arriving agents.

    A fraction ``(1 - p) p**k`` of agents see ``y_k``; the mass of every
    ``k >= k_max`` is lumped at ``y_{k_max}``. Atoms with equal support merge.
    """
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    p = params.p
    ys = [0.0]
    for _ in range(k_max):
        ys.append(_apply(policy, ys[-1], params.psi))
    masses = [(1.0 - p) * p ** k for k in range(k_max)]
    masses.append(1.0 - math.fsum(masses))
    merged: dict[float, float] = {}
    for y, m in zip(ys, masses):
        merged[y] = merged.get(y, 0.0) + m
    return sorted(merged.items())


def total_variation(empirical: Sequence[tuple[float, float]], analytic: Sequence[tuple[float, float]]) -> float:
    """TV distance after snapping each empirical atom to the nearest analytic support point."""
    support = np.array([s for s, _ in analytic])
    target = np.array([m for _, m in analytic])
    got = np.zeros_like(target)
    for s, m in empirical:
        got[int(np.argmin(np.abs(support - s)))] += m
    return 0.5 * float(np.sum(np.abs(got - target)))


# -- sweeps -------------------------------------------------------------


def _workers(n: int) -> int:
    cap = os.environ.get("DEFERSCHED_THREADS")
    limit = int(cap) if cap and cap.isdigit() and int(cap) > 0 else (os.cpu_count() or 1)
    return max(1, min(n, limit))


def _map(fn, items):
    items = list(items)
    workers = _workers(len(items))
    if workers == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def policy_for(mode: str, params: ModelParams) -> PiecewisePolicy:
    if mode == "optimal":
        return optimal_policy(params)
    if mode == "nash":
        return nash_policy(params)
    raise DomainError(f"mode must be 'optimal' or 'nash', got {mode!r}")


def _stderr(values: Sequence[float]) -> float:
    if len(values) < 2:
        return float("nan")
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


@dataclass(frozen=True)
class SweepRow:
    p: float
    avg_cost: float
    stderr: float


def average_cost_sweep(p_values: Sequence[float], psi: float, d: float, mode: str,
                       horizon: int, seeds: Sequence[int]) -> list[SweepRow]:
    """Time-average cost per ``p``, averaged over ``seeds``."""
    rows = []
    for p in p_values:
        params = ModelParams(p, psi, d, allow_edge=True)
        policy = policy_for(mode, params)
        costs = _map(lambda s: simulate(policy, params, horizon, s).avg_cost, seeds)
        rows.append(SweepRow(p, float(np.mean(costs)), _stderr(costs)))
    return rows


@dataclass(frozen=True)
class PoAEstimate:
    ratio: float
    stderr: float
    nash_cost: float
    optimal_cost: float
    nash_stderr: float
    optimal_stderr: float
    # True when the optimal cost is too close to zero for a meaningful ratio.
    degenerate: bool


def price_of_anarchy(params: ModelParams, horizon: int, seeds: Sequence[int]) -> PoAEstimate:
    """Equilibrium over optimal time-average cost, both simulated on the same arrivals."""
    nash, opt = nash_policy(params), optimal_policy(params)

    def pair(seed: int) -> tuple[float, float]:
        return (simulate(nash, params, horizon, seed).avg_cost,
                simulate(opt, params, horizon, seed).avg_cost)

    runs = _map(pair, seeds)
    nash_costs = np.array([n for n, _ in runs])
    opt_costs = np.array([o for _, o in runs])
    nash_mean, opt_mean = float(np.mean(nash_costs)), float(np.mean(opt_costs))
    spread = (_stderr(nash_costs.tolist()), _stderr(opt_costs.tolist()))
    if opt_mean <= 1e-12:
        return PoAEstimate(1.0, 0.0, nash_mean, opt_mean, *spread, True)
    ratios = nash_costs / np.where(opt_costs > 0, opt_costs, np.nan)
    return PoAEstimate(nash_mean / opt_mean, _stderr(ratios.tolist()), nash_mean, opt_mean, *spread, False)
