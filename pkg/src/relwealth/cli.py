"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 numerical failure (including
a failed ``verify``), 3 I/O, schema or usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .errors import ConditioningError, ParameterError, SchemaError, StructuralError, ValidationError
from .estimation import estimate_from_returns, read_returns_csv
from .model import MarketModel, assemble_capm_investable, assemble_capm_noninvestable, validate_capm, validate_market
from .objective import ObjectiveContext
from .optimizer import (
    MATCH_TOL,
    UNCONSTRAINED,
    ConstraintSpec,
    Solution,
    capm_constrained_investable,
    capm_constrained_noninvestable,
    check_perturbations,
    merton_with_oracle,
)
from .problem import ProblemSpec, load_problem
from .report import (
    atomic_write_text,
    diagnostic_block,
    dumps_report,
    optimality_block,
    simulation_block,
    solution_block,
)
from .simulator import estimate_expected_utility, simulate_terminal, verify_optimality

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

CONSTRAINT_TOL = 1e-10
MC_Z_LIMIT = 4.0
PERTURBATION_SAMPLES = 1000
OPTIMALITY_PERTURBATIONS = 200
OPTIMALITY_RADIUS = 0.1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relwealth", description="Optimal portfolios under absolute and relative power utility.")
    parser.add_argument("--version", action="version", version=f"relwealth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, spec: bool = True) -> None:
        if spec:
            p.add_argument("--spec", required=True, help="problem file (YAML)")
        p.add_argument("--out", help="write the report here instead of stdout")

    def sim_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--scheme", choices=["exact", "euler"])
        p.add_argument("--workers", type=int, default=1, help="threads for path simulation")

    p = sub.add_parser("validate", help="check the market model only")
    common(p)
    p = sub.add_parser("optimize", help="closed-form optimum (merton mode)")
    common(p)
    p.add_argument("--tolerance", type=float, default=MATCH_TOL)
    p = sub.add_parser("capm", help="beta-constrained optimum with formula diagnostics")
    common(p)
    p.add_argument("--tolerance", type=float, default=MATCH_TOL)
    p = sub.add_parser("simulate", help="Monte Carlo E[U] for given weights")
    common(p)
    sim_flags(p)
    p.add_argument("--tolerance", type=float, default=MATCH_TOL)
    p = sub.add_parser("verify", help="closed form vs oracle vs Monte Carlo")
    common(p)
    sim_flags(p)
    p.add_argument("--tolerance", type=float, default=MATCH_TOL)
    p = sub.add_parser("estimate", help="estimate a market section from a returns CSV")
    common(p, spec=False)
    p.add_argument("--returns", required=True, help="CSV of simple returns with a header row")
    p.add_argument("--dt", type=float, required=True, help="period length in years (1/12 for monthly)")
    p.add_argument("--risk-free", type=float, required=True)
    return parser


@dataclass
class Solved:
    model: MarketModel
    ctx: ObjectiveContext
    solution: Solution
    constraint: ConstraintSpec


def solve_spec(spec: ProblemSpec, tol: float = MATCH_TOL) -> Solved:
    params, bench = spec.params(), spec.benchmark_set()
    if spec.mode == "merton":
        ctx = ObjectiveContext(spec.market_model(), params, bench)
        return Solved(ctx.model, ctx, merton_with_oracle(ctx, tol), UNCONSTRAINED)
    capm = spec.capm_model()
    if spec.mode == "capm_investable":
        sol = capm_constrained_investable(capm, params, bench, spec.beta0, tol)
        model = assemble_capm_investable(capm)
        constraint = ConstraintSpec("investable_beta", spec.beta0, capm.betas)
    else:
        sol = capm_constrained_noninvestable(capm, params, bench, spec.beta0, tol)
        model = assemble_capm_noninvestable(capm)
        constraint = ConstraintSpec("vector_beta", spec.beta0, capm.betas)
    return Solved(model, ObjectiveContext(model, params, bench), sol, constraint)


def _header(command: str, spec: Optional[ProblemSpec]) -> dict[str, Any]:
    seed = spec.simulation["seed"] if spec is not None and spec.simulation else None
    head: dict[str, Any] = {"tool": "relwealth", "version": __version__, "command": command, "seed": seed}
    if spec is not None:
        head["spec"] = spec.to_dict()
    return head


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _with_sim_overrides(spec: ProblemSpec, args) -> ProblemSpec:
    scheme = {"exact": "exact_log", "euler": "euler_log", None: None}[args.scheme]
    return spec.with_simulation(seed=args.seed, paths=args.paths, steps=args.steps, scheme=scheme)


def cmd_validate(args) -> int:
    spec = load_problem(args.spec)
    reports = {}
    if spec.mode == "merton":
        reports["market"] = validate_market(spec.market_model())
    else:
        capm = spec.capm_model()
        reports["capm"] = validate_capm(capm)
        if reports["capm"].ok:
            assemble = assemble_capm_investable if spec.mode == "capm_investable" else assemble_capm_noninvestable
            reports["assembled"] = validate_market(assemble(capm))
    ok = all(r.ok for r in reports.values())
    report = _header("validate", spec)
    report["ok"] = ok
    report["checks"] = {
        name: {
            "ok": r.ok,
            "min_pivot": r.min_pivot,
            "findings": [{"severity": f.severity, "code": f.code, "message": f.message} for f in r.findings],
        }
        for name, r in reports.items()
    }
    _emit(dumps_report(report), args.out)
    return EXIT_OK if ok else EXIT_INVALID


def _solution_report(command: str, spec: ProblemSpec, solved: Solved) -> dict[str, Any]:
    report = _header(command, spec)
    report["solution"] = solution_block(solved.solution)
    report["diagnostics"] = [diagnostic_block(d) for d in solved.solution.diagnostics]
    return report


def cmd_optimize(args) -> int:
    spec = load_problem(args.spec)
    if spec.mode != "merton":
        raise UsageError(f"optimize needs mode 'merton', found {spec.mode!r}; use 'capm'")
    solved = solve_spec(spec, args.tolerance)
    _emit(dumps_report(_solution_report("optimize", spec, solved)), args.out)
    return EXIT_OK


def cmd_capm(args) -> int:
    spec = load_problem(args.spec)
    if spec.mode == "merton":
        raise UsageError("capm needs mode 'capm_investable' or 'capm_noninvestable'")
    solved = solve_spec(spec, args.tolerance)
    _emit(dumps_report(_solution_report("capm", spec, solved)), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _with_sim_overrides(load_problem(args.spec), args)
    solved = solve_spec(spec, args.tolerance)
    weights = np.asarray(spec.portfolio) if spec.portfolio is not None else solved.solution.weights
    samples = simulate_terminal(solved.model, weights, solved.ctx.benchmarks, spec.sim_config(), args.workers)
    res = estimate_expected_utility(samples, solved.ctx.params)
    report = _header("simulate", spec)
    report["simulation"] = simulation_block(res, weights)
    _emit(dumps_report(report), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = _with_sim_overrides(load_problem(args.spec), args)
    cfg = spec.sim_config()
    solved = solve_spec(spec, args.tolerance)
    sol, ctx = solved.solution, solved.ctx
    checks: list[dict[str, Any]] = []
    warnings: list[str] = []

    def check(name: str, passed: bool, value) -> None:
        checks.append({"name": name, "passed": bool(passed), "value": value})

    for d in sol.diagnostics:
        if d.severity == "warning":
            warnings.append(f"closed form '{d.name}' deviates from the oracle by {d.deviation:.3g} (documented)")
        else:
            check(f"formula:{d.name}", d.matches, d.deviation)
    check("stationarity", sol.gradient_norm <= args.tolerance, sol.gradient_norm)
    if sol.constraint_residual is not None:
        check("constraint", abs(sol.constraint_residual) <= CONSTRAINT_TOL, sol.constraint_residual)
    pert = check_perturbations(ctx, sol.weights, solved.constraint, PERTURBATION_SAMPLES, seed=cfg.seed)
    check("perturbation", pert.violations == 0, pert.violations)

    samples = simulate_terminal(solved.model, sol.weights, ctx.benchmarks, cfg, args.workers)
    res = estimate_expected_utility(samples, ctx.params)
    check("girsanov", abs(res.z_score) <= MC_Z_LIMIT, res.z_score)

    report = _header("verify", spec)
    report["solution"] = solution_block(sol)
    report["diagnostics"] = [diagnostic_block(d) for d in sol.diagnostics]
    report["simulation"] = simulation_block(res, sol.weights)
    if solved.constraint.kind == "none":
        opt = verify_optimality(
            solved.model, ctx.params, ctx.benchmarks, sol.weights, cfg,
            OPTIMALITY_PERTURBATIONS, OPTIMALITY_RADIUS, args.workers,
        )
        check("optimality_analytic", opt.analytic_violations == 0, opt.analytic_violations)
        check("optimality_mc", opt.mc_violations == 0, opt.mc_violations)
        report["optimality"] = optimality_block(opt)
    passed = all(c["passed"] for c in checks)
    report["checks"] = checks
    report["warnings"] = warnings
    report["passed"] = passed
    _emit(dumps_report(report), args.out)
    return EXIT_OK if passed else EXIT_NUMERIC


def cmd_estimate(args) -> int:
    table = read_returns_csv(args.returns, args.dt)
    model = estimate_from_returns(table, args.risk_free)
    fragment = {
        "mode": "merton",
        "market": {
            "drift": [float(x) for x in model.drift],
            "covariance": [[float(x) for x in row] for row in model.covariance],
            "risk_free": model.risk_free,
        },
    }
    header = f"# estimated from {table.n_obs} rows of {', '.join(table.names)} (dt = {table.dt!r})\n"
    _emit(header + yaml.safe_dump(fragment, sort_keys=False, default_flow_style=None, width=1000), args.out)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "optimize": cmd_optimize,
    "capm": cmd_capm,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "estimate": cmd_estimate,
}


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConditioningError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, StructuralError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
