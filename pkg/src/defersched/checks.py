"""Self-checks run by ``defersched validate``.

Each check returns a :class:`CheckResult` with the expected and observed
values, so a failure says exactly how far off it was.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional

import numpy as np

from .model import ModelParams
from .nash_core import best_response, nash_limits, nash_policy, tilde_sequence
from .policy_core import approximate_policy, bar_limits, bar_sequence, optimal_policy, regime
from .vi_oracle import Grid, value_iteration


@dataclass(frozen=True)
class CheckResult:
    check: str
    passed: bool
    expected: Any
    actual: Any
    tolerance: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)


def _close(name: str, expected: float, actual: float, tol: float) -> CheckResult:
    return CheckResult(name, bool(abs(expected - actual) <= tol), expected, actual, tol)


def check_bar_limits(params: ModelParams, k: int = 200) -> CheckResult:
    lim, seq = bar_limits(params), bar_sequence(params, k)
    gap = max(abs(seq.a - lim.a), abs(seq.b - lim.b))
    return _close("bar_sequence_limit", 0.0, gap, 1e-10)


def check_tilde_limits(params: ModelParams, k: int = 200) -> CheckResult:
    lim, seq = nash_limits(params), tilde_sequence(params, k)
    gap = max(abs(seq.a - lim.a_inf), abs(seq.b - lim.b_inf))
    in_range = 0.25 < lim.a_inf < 1.0 / 3.0
    return CheckResult("tilde_sequence_limit", bool(gap <= 1e-10 and in_range),
                       "gap 0 and a_inf in (1/4, 1/3)", {"gap": gap, "a_inf": lim.a_inf}, 1e-10)


def check_identity(params: ModelParams) -> CheckResult:
    lim = bar_limits(params)
    return _close("limit_identity", params.psi, lim.a * params.psi + lim.b / 2.0, 1e-12)


def check_regime_iff(params: ModelParams) -> CheckResult:
    """theta(a_inf, b_inf) >= 0 exactly when psi sits at or below the regime boundary."""
    reg = regime(params)
    bad = []
    for scale in (0.5, 0.9, 0.999, 1.001, 1.1, 2.0):
        psi = reg.boundary * scale if math.isfinite(reg.boundary) else params.psi * scale
        trial = ModelParams(params.p, psi, params.d)
        r = regime(trial)
        if (r.theta >= 0) != (psi <= r.boundary):
            bad.append(psi)
    return CheckResult("regime_iff", not bad, [], bad, None)


def check_oracle_agreement(params: ModelParams, grid: Grid, tol: float) -> CheckResult:
    sol = value_iteration(params, grid, tol=tol)
    reg = regime(params)
    if reg.defers:
        gap = float(np.max(np.abs(sol.actions - optimal_policy(params).evaluate(grid.states))))
        return CheckResult("oracle_agreement", bool(gap <= grid.step), 0.0, gap, grid.step)
    return CheckResult("oracle_agreement", bool(sol.actions[0] == 0.0), 0.0, float(sol.actions[0]), 0.0)


def check_dominance(params: ModelParams, grid: Grid, tol: float) -> CheckResult:
    sol = value_iteration(params, grid, tol=tol)
    slack = float(np.min(approximate_policy(params).evaluate(grid.states) - sol.actions))
    return CheckResult("dominance", bool(slack >= -grid.step), ">= -step", slack, grid.step)


def check_equilibrium(params: ModelParams, step: float = 1e-3) -> CheckResult:
    policy = nash_policy(params)
    br = best_response(policy, params, step)
    gap = float(np.max(np.abs(br.actions - policy.evaluate(br.grid.states))))
    return CheckResult("equilibrium_certificate", bool(gap <= br.grid.step), 0.0, gap, br.grid.step)


def check_fixed_point(params: ModelParams) -> CheckResult:
    lim = nash_limits(params)
    if lim.fixed_point is None:
        return CheckResult("nash_fixed_point", True, None, None, None)
    policy = nash_policy(params)
    return _close("nash_fixed_point", lim.fixed_point, policy(lim.fixed_point), 1e-9)


def run_all(params: ModelParams, grid: Grid, tol: float) -> list[CheckResult]:
    suite: list[Callable[[], CheckResult]] = [
        lambda: check_bar_limits(params),
        lambda: check_tilde_limits(params),
        lambda: check_identity(params),
        lambda: check_regime_iff(params),
        lambda: check_oracle_agreement(params, grid, tol),
        lambda: check_dominance(params, grid, tol),
        lambda: check_equilibrium(params),
        lambda: check_fixed_point(params),
    ]
    return [run() for run in suite]
