"""Closed-form machinery for the socially optimal scheduler.

The cost-to-go of the truncated problems is quadratic on each piece,
``p J(u) + (1 - p) u**2 = a u**2 + b u + c``. Everything here is driven by
the coefficient pair ``(a, b)`` and the threshold ``theta(a, b)`` below which
deferring any service does not pay for the waiting cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .model import TOL, DomainError, GeneralDemandTable, ModelParams, SequencePair
from .piecewise import PiecewisePolicy, Segment, SegmentKind, Source, build


def theta(a: float, b: float, params: ModelParams) -> float:
    """Pending service up to which nothing is deferred; may be negative."""
    if a < 0 or b < 0:
        raise DomainError(f"theta needs a, b >= 0, got a={a}, b={b}")
    return math.sqrt(params.d * (1.0 + a)) + b / 2.0 - params.psi


def bar_sequence(params: ModelParams, k: int) -> SequencePair:
    """``(a_k, b_k)`` of the optimal-scheduling recursion, by exact iteration."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    p, psi = params.p, params.psi
    a, b = 1.0, 2.0 * p * psi
    for _ in range(k):
        a, b = 1.0 - p / (1.0 + a), p * (2.0 * a * psi + b) / (1.0 + a)
    return SequencePair(k, a, b)


def bar_limits(params: ModelParams) -> SequencePair:
    root = math.sqrt(1.0 - params.p)
    return SequencePair(None, root, 2.0 * params.p * params.psi / (1.0 + root))


def constrained_argmin(a: float, b: float, x: float, params: ModelParams,
                       penalty: Optional[float] = None) -> float:
    """Deferral minimising ``(psi + x - u)**2 + penalty + a u**2 + b u``.

    The candidate is taken only if it beats serving everything now, whose cost
    is ``(psi + x)**2``; any constant common to both branches cancels. The
    penalty defaults to the waiting cost ``d``.
    """
    psi = params.psi
    if a < 0 or b < 0:
        raise DomainError(f"constrained_argmin needs a, b >= 0, got a={a}, b={b}")
    if not -TOL <= x <= psi + TOL:
        raise DomainError(f"x={x} outside [0, {psi}]")
    pen = params.d if penalty is None else penalty
    thr = math.sqrt(pen * (1.0 + a)) + b / 2.0 - psi
    if a * psi + b / 2.0 >= min(psi, thr):
        if x <= thr + TOL:
            return 0.0
        return min(max((x + psi - b / 2.0) / (1.0 + a), 0.0), psi)
    switch = ((a - 1.0) * psi + b) / 2.0 + pen / (2.0 * psi)
    return 0.0 if x <= switch + TOL else psi


@dataclass(frozen=True)
class Regime:
    """Which half of the optimal-policy dichotomy a parameter set falls in."""

    a_inf: float
    b_inf: float
    theta: float
    # sqrt(d (1 + a_inf)) / a_inf; deferral happens iff psi exceeds it.
    boundary: float
    defers: bool
    # psi < sqrt(2 d) / (2 - p): the optimal rule is identically zero.
    all_zero: bool

    @property
    def name(self) -> str:
        return "defer" if self.defers else "no-defer"


def regime(params: ModelParams) -> Regime:
    lim = bar_limits(params)
    boundary = math.inf if lim.a == 0 else math.sqrt(params.d * (1.0 + lim.a)) / lim.a
    return Regime(
        a_inf=lim.a,
        b_inf=lim.b,
        theta=theta(lim.a, lim.b, params),
        boundary=boundary,
        defers=params.psi > boundary + TOL,
        all_zero=params.psi < math.sqrt(2.0 * params.d) / (2.0 - params.p) - TOL,
    )


def _limit_affine(params: ModelParams, lim: SequencePair) -> tuple[float, float]:
    """Slope and intercept of ``(x + psi - b/2) / (1 + a)``."""
    return 1.0 / (1.0 + lim.a), (params.psi - lim.b / 2.0) / (1.0 + lim.a)


def _threshold_policy(params: ModelParams, reg: Regime, tail: Segment, label: str) -> PiecewisePolicy:
    psi = params.psi
    # theta >= 0 in the no-defer regime; at theta = 0 keep a sliver so x = 0 still defers nothing.
    cut = min(max(reg.theta, 2.0 * TOL), psi)
    zero = Segment(0.0, cut, SegmentKind.ZERO)
    return build(psi, [zero, Segment(cut, psi, tail.kind, tail.slope, tail.intercept, tail.source)], label)


def optimal_policy(params: ModelParams, oracle=None) -> PiecewisePolicy:
    """The optimal deferral rule, as far as it is known in closed form.

    When deferral pays even at ``x = 0`` the rule is affine everywhere.
    Otherwise nothing is deferred on ``[0, theta]``, which covers every state
    the system visits; the off-path tail is a numeric segment, filled from
    ``oracle`` (a :class:`~defersched.vi_oracle.TabularSolution`) if given.
    """
    psi = params.psi
    reg = regime(params)
    lim = SequencePair(None, reg.a_inf, reg.b_inf)
    if reg.defers:
        slope, icpt = _limit_affine(params, lim)
        return PiecewisePolicy.affine(psi, slope, icpt, label="optimal")
    if reg.all_zero or reg.theta >= psi - TOL:
        return PiecewisePolicy.zero(psi, label="optimal")
    tail = Segment(0.0, psi, SegmentKind.NUMERIC, source=Source.NUMERIC)
    policy = _threshold_policy(params, reg, tail, "optimal")
    if oracle is not None:
        policy = policy.fill_numeric(oracle.grid.states, oracle.actions)
    return policy


def approximate_policy(params: ModelParams) -> PiecewisePolicy:
    """Upper bound on the optimal rule that is available in closed form."""
    psi = params.psi
    reg = regime(params)
    lim = SequencePair(None, reg.a_inf, reg.b_inf)
    slope, icpt = _limit_affine(params, lim)
    if reg.all_zero:
        return PiecewisePolicy.zero(psi, label="approximate")
    if reg.defers:
        return PiecewisePolicy.affine(psi, slope, icpt, label="approximate")
    if reg.theta >= psi - TOL:
        return PiecewisePolicy.zero(psi, label="approximate")
    tail = Segment(0.0, psi, SegmentKind.AFFINE, slope, icpt)
    return _threshold_policy(params, reg, tail, "approximate")


def general_demand_policy(table: GeneralDemandTable, d: float) -> dict[float, PiecewisePolicy]:
    """Heuristic rules for demands of several sizes, one per size.

    The demand mix is replaced by a Bernoulli model with the same arrival
    probability and mean demand, and its limiting affine rule is applied to
    each size with the deferral capped at that size.
    """
    if d <= 0:
        raise DomainError(f"d must be positive, got {d}")
    p_bar = table.total_probability
    fictitious = ModelParams(p_bar, table.mean_demand, d, allow_edge=True)
    reg = regime(fictitious)
    out = {}
    for size, _ in table.entries:
        label = f"general psi={size:g}"
        if not reg.defers:
            out[size] = PiecewisePolicy.zero(size, source=Source.ON_PATH, label=label)
            continue
        slope = 1.0 / (1.0 + reg.a_inf)
        icpt = (size - reg.b_inf / 2.0) / (1.0 + reg.a_inf)
        out[size] = _capped_affine(size, slope, icpt, label)
    return out


def _capped_affine(cap: float, slope: float, icpt: float, label: str) -> PiecewisePolicy:
    """``clip(slope x + icpt, 0, cap)`` on ``[0, cap]`` as explicit segments."""
    lo = min(max(-icpt / slope, 0.0), cap)
    hi = min(max((cap - icpt) / slope, 0.0), cap)
    return build(cap, [
        Segment(0.0, lo, SegmentKind.ZERO),
        Segment(lo, hi, SegmentKind.AFFINE, slope, icpt),
        Segment(hi, cap, SegmentKind.SATURATED),
    ], label)
