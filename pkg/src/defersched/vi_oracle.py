"""Brute-force value iteration on a uniform grid.

This is the independent check on every closed form: it knows nothing about
the coefficient recursions and minimises over the action grid exhaustively.
The Bellman operator is

    T J(x) = min{ (psi + x)**2 + p J(0),
                  min_u (psi + x - u)**2 + d + p J(u) + (1 - p) u**2 }

with the first branch (no deferral, no waiting cost) winning ties.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ConvergenceError, DomainError, ModelParams
from .piecewise import PiecewisePolicy

log = logging.getLogger(__name__)

DEFAULT_STATES = 2001
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
MIN_STATES = 101


@dataclass(frozen=True)
class Grid:
    psi: float
    n_states: int = DEFAULT_STATES
    n_actions: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_states < MIN_STATES:
            raise DomainError(f"need at least {MIN_STATES} grid states, got {self.n_states}")
        if self.n_actions is None:
            object.__setattr__(self, "n_actions", self.n_states)
        elif self.n_actions < 2:
            raise DomainError("need at least two actions")

    @classmethod
    def from_step(cls, psi: float, step: float) -> "Grid":
        if step <= 0:
            raise DomainError(f"grid step must be positive, got {step}")
        return cls(psi, int(round(psi / step)) + 1)

    @property
    def step(self) -> float:
        return self.psi / (self.n_states - 1)

    @property
    def states(self) -> np.ndarray:
        return np.linspace(0.0, self.psi, self.n_states)

    @property
    def actions(self) -> np.ndarray:
        return np.linspace(0.0, self.psi, self.n_actions)


@dataclass
class TabularSolution:
    grid: Grid
    params: ModelParams
    values: np.ndarray
    actions: np.ndarray
    residual: float
    iterations: int
    residuals: tuple[float, ...] = field(default=(), repr=False)

    def policy(self, label: str = "oracle") -> PiecewisePolicy:
        return PiecewisePolicy.from_table(self.grid.states, self.actions, label)

    def jumps(self, factor: float = 5.0) -> list[float]:
        """States right after the greedy action moves by more than ``factor`` steps."""
        gaps = np.abs(np.diff(self.actions))
        idx = np.nonzero(gaps > factor * self.grid.step)[0]
        return [float(self.grid.states[i + 1]) for i in idx]


def _at_actions(values: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.n_actions == grid.n_states:
        return values
    return np.interp(grid.actions, grid.states, values)


def _service_matrix(grid: Grid) -> np.ndarray:
    x, u = grid.states, grid.actions
    return (grid.psi + x[:, None] - u[None, :]) ** 2


def _refine(q: np.ndarray, j: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Snap each grid argmin to the vertex of the parabola through its neighbours.

    The move is capped at half a grid step, so the result stays inside the
    argmin's grid cell; edge points and non-convex triples are left alone.
    """
    rows = np.arange(q.shape[0])
    inner = (j > 0) & (j < q.shape[1] - 1)
    jj = np.clip(j, 1, q.shape[1] - 2)
    lo, mid, hi = q[rows, jj - 1], q[rows, jj], q[rows, jj + 1]
    curv = lo - 2.0 * mid + hi
    ok = inner & (curv > 0)
    shift = np.where(ok, 0.5 * (lo - hi) / np.where(ok, curv, 1.0), 0.0)
    shift = np.clip(shift, -0.5, 0.5)
    return np.clip(u[j] + shift * (u[1] - u[0]), u[0], u[-1])


def bellman_operator(values: np.ndarray, params: ModelParams, grid: Grid,
                     service: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """One application of the Bellman operator; returns ``(T J, greedy action)``.

    Values use the exact grid minimum; the reported greedy action is refined
    within the argmin's grid cell.
    """
    if service is None:
        service = _service_matrix(grid)
    x, u = grid.states, grid.actions
    p, psi = params.p, params.psi
    tail = params.d + p * _at_actions(values, grid) + (1.0 - p) * u ** 2
    q = service + tail[None, :]
    # argmin returns the first minimiser, i.e. the smallest deferral.
    j = np.argmin(q, axis=1)
    defer = q[np.arange(grid.n_states), j]
    serve = (psi + x) ** 2 + p * values[0]
    new = np.minimum(serve, defer)
    greedy = np.where(serve <= defer, 0.0, _refine(q, j, u))
    return new, greedy


def _iterate(params: ModelParams, grid: Grid, values: np.ndarray, tol: float, max_iter: int,
             what: str) -> TabularSolution:
    service = _service_matrix(grid)
    history = []
    for it in range(1, max_iter + 1):
        new, greedy = bellman_operator(values, params, grid, service)
        residual = float(np.max(np.abs(new - values)))
        history.append(residual)
        values = new
        if residual < tol:
            log.debug("%s converged after %d iterations", what, it)
            return TabularSolution(grid, params, values, greedy, residual, it, tuple(history))
    last = TabularSolution(grid, params, values, greedy, residual, max_iter, tuple(history))
    raise ConvergenceError(f"{what} did not converge", residual, max_iter, last=last)


def value_iteration(params: ModelParams, grid: Optional[Grid] = None, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER,
                    initial: Optional[np.ndarray] = None) -> TabularSolution:
    """Iterate the Bellman operator from ``J(x) = x**2`` (or ``initial``) to a fixed point.

    Starting from ``x**2`` the iterates are the truncated-horizon costs and
    increase monotonically. Raises :class:`ConvergenceError` after ``max_iter``.
    """
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")
    grid = grid or Grid(params.psi)
    _check_grid(grid, params)
    values = grid.states ** 2 if initial is None else np.asarray(initial, dtype=float).copy()
    return _iterate(params, grid, values, tol, max_iter, "value iteration")


def k_stage(params: ModelParams, grid: Grid, k: int) -> TabularSolution:
    """Optimal cost when at most ``k + 1`` requests arrive before termination."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    _check_grid(grid, params)
    service = _service_matrix(grid)
    values = grid.states ** 2
    history = []
    for _ in range(k + 1):
        new, greedy = bellman_operator(values, params, grid, service)
        history.append(float(np.max(np.abs(new - values))))
        values = new
    return TabularSolution(grid, params, values, greedy, history[-1], k + 1, tuple(history))


def bellman_residual(solution: TabularSolution, params: ModelParams) -> float:
    """Sup-norm distance between ``J`` and ``T J`` on the solution's grid."""
    if solution.params != params:
        raise DomainError("solution was computed for different parameters")
    _check_grid(solution.grid, params)
    if len(solution.values) != solution.grid.n_states:
        raise DomainError("value table does not match the grid")
    new, _ = bellman_operator(np.asarray(solution.values, dtype=float), params, solution.grid)
    return float(np.max(np.abs(new - solution.values)))


def policy_evaluation(policy: PiecewisePolicy, params: ModelParams, grid: Optional[Grid] = None,
                      tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> TabularSolution:
    """Cost-to-go of a fixed rule, with off-grid states linearly interpolated."""
    grid = grid or Grid(params.psi)
    _check_grid(grid, params)
    x = grid.states
    p, psi, d = params.p, params.psi, params.d
    u = policy.evaluate(x)
    stage = (psi + x - u) ** 2 + d * (u > 0) + (1.0 - p) * u ** 2
    values = x ** 2
    history = []
    for it in range(1, max_iter + 1):
        new = stage + p * np.interp(u, x, values)
        residual = float(np.max(np.abs(new - values)))
        history.append(residual)
        values = new
        if residual < tol:
            return TabularSolution(grid, params, values, u, residual, it, tuple(history))
    raise ConvergenceError("policy evaluation did not converge", residual, max_iter)


def nash_value_iteration(params: ModelParams, grid: Optional[Grid] = None, tol: float = DEFAULT_TOL,
                         max_iter: int = 10_000) -> tuple[TabularSolution, PiecewisePolicy]:
    """Iterate best responses against the previous round's strategy.

    Round ``k`` solves a tagged agent's problem when everybody after it plays
    the strategy of round ``k - 1``; round ``-1`` defers everything. Actions are
    refined off the grid, since a staircase opponent table makes the
    deviation cost bumpy enough for the argmin to wander. Stops when
    the strategy table moves by less than one grid step or the agent's cost
    by less than ``tol``. Iterating further does not help: the best response
    reacts to the slope of the opponent's table, so interpolation noise far
    below the grid step is amplified on later rounds. A strategy that
    cycles with period two raises :class:`ConvergenceError` carrying both
    iterates.
    """
    grid = grid or Grid(params.psi)
    _check_grid(grid, params)
    x, u = grid.states, grid.actions
    p, psi, d = params.p, params.psi, params.d
    own = (psi - u[None, :]) * (psi - u[None, :] + x[:, None]) + d
    serve = (psi + x) * psi
    strategy = np.full(grid.n_states, psi)
    cost = np.full(grid.n_states, np.inf)
    older = None
    history = []
    for it in range(1, max_iter + 1):
        opp = _at_actions(strategy, grid)
        q = own + (u * (u + p * (psi - opp)))[None, :]
        j = np.argmin(q, axis=1)
        defer = q[np.arange(grid.n_states), j]
        new_cost = np.minimum(serve, defer)
        new = np.where(serve <= defer, 0.0, _refine(q, j, u))
        move = float(np.max(np.abs(new - strategy)))
        change = float(np.max(np.abs(new_cost - cost)))
        history.append(change)
        if move < grid.step or change < tol:
            sol = TabularSolution(grid, params, new_cost, new, change, it, tuple(history))
            return sol, sol.policy("nash oracle")
        if older is not None and np.array_equal(new, older) and move >= grid.step:
            raise ConvergenceError("best-response iteration oscillates with period two",
                                   move, it, last=new, previous=strategy)
        older, strategy, cost = strategy, new, new_cost
    raise ConvergenceError("best-response iteration did not converge", move, max_iter,
                           last=strategy, previous=older)


def _check_grid(grid: Grid, params: ModelParams) -> None:
    if abs(grid.psi - params.psi) > 1e-12:
        raise DomainError(f"grid covers [0, {grid.psi}] but psi={params.psi}")
