"""Symmetric Nash equilibrium of the selfish-agent game.

Every agent picks its own deferral to minimise its own expected cost,

    c(x, u) = (psi - u)(psi - u + x) + u (u + p (psi - pi(u))) + d 1{u > 0},

where ``pi`` is the strategy the next agent plays. The first term is what
the agent pays for its share of this slot's load; the second is the price of
the deferred part, which shares the next slot with a possible newcomer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import TOL, DomainError, ModelParams, SequencePair
from .piecewise import PiecewisePolicy, Segment, SegmentKind, Source, build
from .vi_oracle import Grid, TabularSolution

# Relative slack for calling two candidate costs equal when breaking ties.
_TIE = 1e-14


def tilde_sequence(params: ModelParams, k: int) -> SequencePair:
    """``(a_k, b_k)`` of the equilibrium recursion, starting from zero at ``k = -1``."""
    if k < -1:
        raise DomainError(f"k must be >= -1, got {k}")
    p, psi = params.p, params.psi
    a = b = 0.0
    for _ in range(k + 1):
        den = 2.0 * (2.0 - p * a)
        a, b = 1.0 / den, ((2.0 - p) * psi + p * b) / den
    return SequencePair(k, a, b)


@dataclass(frozen=True)
class NashLimits:
    a_inf: float
    b_inf: float
    # Pending level up to which the equilibrium defers nothing; may be negative.
    x_inf: float
    # Solution of a x + b = x, when it lies in [0, psi].
    fixed_point: Optional[float]


def nash_limits(params: ModelParams) -> NashLimits:
    p, psi, d = params.p, params.psi, params.d
    # Root of p a^2 - 2 a + 1/2 = 0 in (1/4, 1/3), written without cancellation.
    a = 1.0 / (2.0 + math.sqrt(4.0 - 2.0 * p))
    b = a * (2.0 - p) * psi / (1.0 - a * p)
    x_inf = (math.sqrt(2.0 * a * d) - b) / a
    fp = b / (1.0 - a)
    return NashLimits(a, b, x_inf, fp if -TOL <= fp <= psi + TOL else None)


def nash_policy(params: ModelParams) -> PiecewisePolicy:
    """The symmetric equilibrium strategy.

    With ``x_inf < 0`` the strategy is ``a_inf x + b_inf`` everywhere. Otherwise
    it defers nothing on ``[0, x_inf]``; the affine piece above is marked
    partial unless ``b_inf / (1 - a_inf) >= x_inf``, the condition under which
    it is known to be an equilibrium.
    """
    psi = params.psi
    lim = nash_limits(params)
    if lim.x_inf < 0:
        return PiecewisePolicy.affine(psi, lim.a_inf, lim.b_inf, label="nash")
    cut = min(lim.x_inf, psi)
    proven = lim.b_inf / (1.0 - lim.a_inf) >= lim.x_inf
    tail = Segment(cut, psi, SegmentKind.AFFINE, lim.a_inf, lim.b_inf,
                   Source.ANALYTIC if proven else Source.PARTIAL)
    if cut >= psi - TOL:
        return PiecewisePolicy.zero(psi, label="nash")
    return build(psi, [Segment(0.0, cut, SegmentKind.ZERO), tail], "nash")


def _check_state(x, psi: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -TOL) or np.any(x > psi + TOL):
        raise DomainError(f"state outside [0, {psi}]")
    return x


def deviation_cost(x, u, opponent: PiecewisePolicy, params: ModelParams):
    """Expected cost of deferring ``u`` at pending level ``x`` when others play ``opponent``."""
    p, psi, d = params.p, params.psi, params.d
    x = _check_state(x, psi)
    u = _check_state(u, psi)
    cost = (psi - u) * (psi - u + x) + u * (u + p * (psi - opponent.evaluate(u))) + d * (u > 0)
    return float(cost) if cost.ndim == 0 else cost


def agent_cost(x, policy: PiecewisePolicy, params: ModelParams):
    """Expected cost of an agent arriving to pending level ``x`` when everyone plays ``policy``."""
    x = _check_state(x, params.psi)
    return deviation_cost(x, policy.evaluate(x), policy, params)


def _stationary_points(opponent: PiecewisePolicy, x: np.ndarray, params: ModelParams) -> np.ndarray:
    """Interior minimisers of the deviation cost on each closed-form opponent piece.

    On a piece where the opponent plays ``s u + c`` the cost is a convex
    quadratic in ``u`` minimised at ``(x + (2 - p) psi + p c) / (2 (2 - p s))``;
    the point is clipped into the piece.
    """
    p, psi = params.p, params.psi
    cols = []
    for seg in opponent.segments:
        if seg.kind is SegmentKind.ZERO:
            s, c = 0.0, 0.0
        elif seg.kind is SegmentKind.AFFINE:
            s, c = seg.slope, seg.intercept
        elif seg.kind is SegmentKind.SATURATED:
            s, c = 0.0, psi
        else:
            continue
        den = 2.0 * (2.0 - p * s)
        if den <= 0:
            continue
        cols.append(np.clip((x + (2.0 - p) * psi + p * c) / den, seg.x_lo, seg.x_hi))
    if not cols:
        return np.empty((len(x), 0))
    return np.stack(cols, axis=1)


def best_response(opponent: PiecewisePolicy, params: ModelParams, grid_step: float) -> TabularSolution:
    """The tagged agent's optimal deferral at each grid state against a fixed opponent.

    Candidates are the action grid plus the exact stationary point of every
    closed-form opponent piece. Serving everything now (``u = 0``, no waiting
    cost) wins ties, and among deferrals the smallest minimiser wins. Against a
    fixed opponent the stage recursion is stationary, so a single pass is
    already its fixed point.
    """
    psi = params.psi
    if abs(opponent.psi - psi) > TOL:
        raise DomainError("opponent policy is defined on a different domain")
    if not 0 < grid_step <= psi / 10.0:
        raise DomainError(f"grid_step must lie in (0, psi/10], got {grid_step}")
    grid = Grid.from_step(psi, min(grid_step, psi / 100.0))
    x, u = grid.states, grid.actions
    extra = _stationary_points(opponent, x, params)
    cand = np.concatenate([np.broadcast_to(u, (len(x), len(u))), extra], axis=1)
    cand = np.where(cand > 0, cand, u[1])
    cost = deviation_cost(np.broadcast_to(x[:, None], cand.shape), cand, opponent, params)
    best = cost.min(axis=1)
    tie = cost <= best[:, None] + _TIE * np.maximum(1.0, np.abs(best[:, None]))
    defer_u = np.where(tie, cand, np.inf).min(axis=1)
    serve = psi * (psi + x)
    keep = serve <= best + _TIE * np.maximum(1.0, np.abs(best))
    values = np.where(keep, serve, best)
    actions = np.where(keep, 0.0, defer_u)
    return TabularSolution(grid, params, values, actions, 0.0, 1)
