"""Command-line front end.

Every command writes one table, CSV by default, with scalar diagnostics as
``# key: value`` lines above the header; ``--format json`` writes the same
content as a single JSON document.

Exit codes: 0 success, 1 a validation check failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from typing import Iterator, Optional, Sequence, TextIO

import numpy as np

from . import checks
from .model import ConvergenceError, DomainError, GeneralDemandTable, ModelParams
from .nash_core import best_response, nash_limits, nash_policy
from .piecewise import PiecewisePolicy
from .policy_core import (approximate_policy, bar_limits, general_demand_policy,
                          optimal_policy, regime)
from .simulator import policy_for, price_of_anarchy, simulate
from .tables import Table, to_json, write_csv
from .vi_oracle import Grid, value_iteration

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
SEGMENT_COLUMNS = ("policy", "x_lo", "x_hi", "kind", "slope", "intercept", "source")

log = logging.getLogger("defersched")


class ConfigError(Exception):
    """Bad command-line configuration; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


def _params(args) -> ModelParams:
    if args.p is None:
        raise ConfigError("--p is required")
    return ModelParams(args.p, args.psi, args.d)


def _grid(args, psi: float) -> Grid:
    return Grid(psi, args.grid)


def _segments(policy: PiecewisePolicy, name: str) -> list[tuple]:
    return [(name, r["x_lo"], r["x_hi"], r["kind"], r["slope"], r["intercept"], r["source"])
            for r in policy.rows()]


# -- commands -----------------------------------------------------------


def cmd_solve(args) -> Table:
    if args.table:
        return _solve_general(args)
    params = _params(args)
    reg = regime(params)
    lim = bar_limits(params)
    meta = {
        **params.as_dict(),
        "regime": reg.name,
        "a_inf": lim.a,
        "b_inf": lim.b,
        "theta": reg.theta,
        "regime_boundary": reg.boundary,
        "all_zero": reg.all_zero,
    }
    oracle = None
    if args.overlay or args.curve:
        oracle = value_iteration(params, _grid(args, params.psi), tol=args.tol)
        meta["oracle_residual"] = oracle.residual
        meta["oracle_iterations"] = oracle.iterations
    opt = optimal_policy(params, oracle)
    approx = approximate_policy(params)
    meta["pi_opt_0"] = opt(0.0)
    if args.curve:
        xs = oracle.grid.states
        rows = list(zip(xs.tolist(), opt.evaluate(xs).tolist(), approx.evaluate(xs).tolist(),
                        oracle.actions.tolist(), oracle.values.tolist()))
        return Table(("x", "optimal", "approximate", "oracle", "oracle_cost"), rows, meta)
    rows = _segments(opt, "optimal")
    if args.approximate:
        rows += _segments(approx, "approximate")
    if oracle is not None:
        meta["oracle_jumps"] = ";".join(f"{x:.6g}" for x in oracle.jumps()) or None
    return Table(SEGMENT_COLUMNS, rows, meta)


def _solve_general(args) -> Table:
    table = GeneralDemandTable.parse(args.table)
    policies = general_demand_policy(table, args.d)
    fictitious = ModelParams(table.total_probability, table.mean_demand, args.d, allow_edge=True)
    reg = regime(fictitious)
    meta = {
        "p_bar": table.total_probability,
        "psi_bar": table.mean_demand,
        "d": args.d,
        "regime": reg.name,
        "a_inf": reg.a_inf,
        "b_inf": reg.b_inf,
        "regime_boundary": reg.boundary,
    }
    rows = []
    for size, policy in policies.items():
        rows += _segments(policy, f"psi={size:g}")
    return Table(SEGMENT_COLUMNS, rows, meta)


def cmd_nash(args) -> Table:
    params = _params(args)
    lim = nash_limits(params)
    policy = nash_policy(params)
    meta = {
        **params.as_dict(),
        "a_inf": lim.a_inf,
        "b_inf": lim.b_inf,
        "x_inf": lim.x_inf,
        "fixed_point": lim.fixed_point,
        "pi_nash_0": policy(0.0),
    }
    if args.certify:
        step = params.psi / (args.grid - 1)
        br = best_response(policy, params, step)
        gap = float(np.max(np.abs(br.actions - policy.evaluate(br.grid.states))))
        meta["certificate_gap"] = gap
        meta["certificate_step"] = br.grid.step
    return Table(SEGMENT_COLUMNS, _segments(policy, "nash"), meta)


def _policy(mode: str, params: ModelParams) -> PiecewisePolicy:
    if mode == "approximate":
        return approximate_policy(params)
    return policy_for(mode, params)


def cmd_simulate(args) -> Table:
    params = ModelParams(args.p, args.psi, args.d, allow_edge=True) if args.p is not None else _params(args)
    report = simulate(_policy(args.mode, params), params, args.horizon, args.seed, charge=args.charge)
    meta = {
        **params.as_dict(),
        "mode": args.mode,
        "avg_cost": report.avg_cost,
        "agent_avg_cost": report.agent_avg_cost,
        "renewal_mean": report.renewal_mean,
        "renewal_stderr": report.renewal_stderr,
        "fixed_point_hit": report.fixed_point_hit,
        "horizon": report.horizon,
        "seed": report.seed,
    }
    return Table(("support", "mass"), list(report.pending_histogram), meta)


def _p_values(text: str) -> list[float]:
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            return np.linspace(float(lo), float(hi), int(n)).tolist()
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --p-values {text!r}; use a,b,c or lo:hi:n") from exc


def cmd_sweep(args) -> Table:
    seeds = list(range(args.seed, args.seed + args.seeds))
    rows = []
    for p in _p_values(args.p_values):
        params = ModelParams(p, args.psi, args.d, allow_edge=True)
        est = price_of_anarchy(params, args.horizon, seeds)
        rows.append((p, est.optimal_cost, est.optimal_stderr, est.nash_cost, est.nash_stderr,
                     est.ratio, est.stderr, est.degenerate))
        log.info("p=%.4g poa=%.5g", p, est.ratio)
    meta = {"psi": args.psi, "d": args.d, "horizon": args.horizon, "seeds": args.seeds,
            "poa_limit": 1.0 + args.d / args.psi ** 2}
    columns = ("p", "optimal_cost", "optimal_stderr", "nash_cost", "nash_stderr",
               "poa", "poa_stderr", "degenerate")
    return Table(columns, rows, meta)


def cmd_validate(args, out: TextIO) -> int:
    params = _params(args)
    results = checks.run_all(params, _grid(args, params.psi), args.tol)
    for res in results:
        out.write(json.dumps(res.as_dict(), default=str) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


# -- plumbing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=float, default=None, help="arrival probability per slot")
    common.add_argument("--psi", type=float, default=2.0, help="demand per request")
    common.add_argument("--d", type=float, default=1.0, help="fixed waiting cost")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--grid", type=int, default=2001, help="grid points on [0, psi]")
    common.add_argument("--tol", type=float, default=1e-9, help="value-iteration tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="defersched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    solve = sub.add_parser("solve", parents=[common], help="optimal deferral rule")
    solve.add_argument("--table", default=None, help='general demand mix, e.g. "1:0.25,3:0.25"')
    solve.add_argument("--approximate", action="store_true", help="also emit the approximate rule")
    solve.add_argument("--overlay", action="store_true", help="fill numeric pieces from value iteration")
    solve.add_argument("--curve", action="store_true",
                       help="emit sampled optimal/approximate/oracle curves instead of segments")

    nash = sub.add_parser("nash", parents=[common], help="symmetric equilibrium strategy")
    nash.add_argument("--certify", action="store_true", help="check it against a best response")

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo run of one policy")
    sim.add_argument("--mode", choices=("optimal", "approximate", "nash"), default="optimal")
    sim.add_argument("--horizon", type=int, default=1_000_000)
    sim.add_argument("--charge", choices=("deferral", "partial"), default="deferral",
                     help="when the waiting cost applies")

    sweep = sub.add_parser("sweep", parents=[common], help="average cost and price of anarchy over p")
    sweep.add_argument("--p-values", default="0.05:0.95:19", help="a,b,c or lo:hi:n")
    sweep.add_argument("--horizon", type=int, default=200_000)
    sweep.add_argument("--seeds", type=int, default=4)
    sweep.add_argument("--mode", choices=("optimal", "nash"), default=None,
                       help="accepted for symmetry; both modes are always reported")

    sub.add_parser("validate", parents=[common], help="run the self-checks")
    return parser


@contextmanager
def _sink(path: Optional[str]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    try:
        fh = open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from exc
    with fh:
        yield fh


def _emit(table: Table, args, out: TextIO) -> None:
    if args.format == "json":
        out.write(to_json({"rows": table}) + "\n")
    else:
        write_csv(table, out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("a command is required: solve, nash, simulate, sweep or validate")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        with _sink(args.out) as out:
            if args.command == "validate":
                return cmd_validate(args, out)
            command = {"solve": cmd_solve, "nash": cmd_nash, "simulate": cmd_simulate,
                       "sweep": cmd_sweep}[args.command]
            _emit(command(args), args, out)
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        print(f"defersched: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"defersched: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
