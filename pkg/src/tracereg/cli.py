"""Command-line front end and benchmark harness.

Subcommands: ``gen`` (seeded instance files), ``solve`` (either
formulation, report JSON plus optional trajectory CSV), ``sweep``
(penalized lambda grid emitting the lambda -> budget correspondence),
``export-cone`` (cone-program text files), ``bench`` (timing/memory grid
over generated instances).

Exit codes: 0 success, 1 invalid flags, 2 solver non-convergence or a
violated output contract, 3 I/O errors.  Error messages name the failing
contract.  All emitted tables are comma-separated with a header row, '.'
decimal separator, and LF line endings; report JSON carries the full
:class:`~tracereg.solver.SolveReport` content.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from .cone import export_constrained, export_penalized, write_cone_file
from .linalg import trace_norm
from .problem import (
    ConstrainedSpec,
    PenalizedSpec,
    RawInstance,
    ReducedProblem,
    generate_instance,
    load_problem,
    reduce_instance,
    save_problem,
)
from .solver import SolveReport, SolverConfig, solve_constrained, solve_penalized

__all__ = [
    "main",
    "build_parser",
    "sweep_penalized",
    "bench_rows",
    "bench_summary",
    "BenchRow",
    "SweepRow",
    "UsageError",
    "ContractError",
]

BENCH_HEADER = (
    "p,q,formulation,lambda_or_m,iterations,primal_obj,dual_obj,gap,"
    "wall_time_seconds,peak_memory_bytes"
)
SWEEP_HEADER = "lambda,budget,objective"
TRAJECTORY_HEADER = "k,f,g,gap"
DEFAULT_BENCH_QS = (10, 20, 30)
MAX_BENCH_Q = 30


class UsageError(Exception):
    """Invalid command-line flags; mapped to exit code 1."""


class ContractError(Exception):
    """A promised property of emitted output failed; mapped to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); remap to our code 1
        raise UsageError(message)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    budget: float
    objective: float


@dataclass(frozen=True)
class BenchRow:
    p: int
    q: int
    formulation: str
    lambda_or_m: float
    iterations: int
    primal_obj: float
    dual_obj: float
    gap: float
    wall_time_seconds: float
    peak_memory_bytes: int

    def csv(self) -> str:
        return ",".join(
            [
                str(self.p),
                str(self.q),
                self.formulation,
                repr(self.lambda_or_m),
                str(self.iterations),
                repr(self.primal_obj),
                repr(self.dual_obj),
                repr(self.gap),
                repr(self.wall_time_seconds),
                str(self.peak_memory_bytes),
            ]
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tracereg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    p_gen = sub.add_parser("gen", help="generate a seeded random instance file")
    p_gen.add_argument("--q", type=int, required=True, help="response dimension; l=10q, p=2q")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True)

    p_solve = sub.add_parser("solve", help="solve one formulation on an instance file")
    _add_problem_flag(p_solve)
    _add_formulation_flags(p_solve)
    _add_solver_flags(p_solve)
    p_solve.add_argument("--trajectory", help="also write k,f,g,gap CSV of gap checks")
    p_solve.add_argument("--out", help="report JSON path (stdout when omitted)")

    p_sweep = sub.add_parser("sweep", help="penalized lambda grid with Everett budgets")
    _add_problem_flag(p_sweep)
    p_sweep.add_argument(
        "--lambdas", required=True, help="comma-separated distinct positive weights"
    )
    _add_solver_flags(p_sweep)
    p_sweep.add_argument("--out", help="CSV path (stdout when omitted)")

    p_cone = sub.add_parser("export-cone", help="write the cone-program text form")
    _add_problem_flag(p_cone)
    _add_formulation_flags(p_cone)
    p_cone.add_argument("--out", required=True)

    p_bench = sub.add_parser("bench", help="timing grid over generated instances")
    p_bench.add_argument("--qs", default=",".join(str(v) for v in DEFAULT_BENCH_QS))
    p_bench.add_argument("--seeds", default="0")
    p_bench.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_bench.add_argument(
        "--formulation", choices=("penalized", "constrained"), default="penalized"
    )
    p_bench.add_argument(
        "--budget-frac",
        type=float,
        default=0.5,
        help="constrained budget as a fraction of the reduced target's trace norm",
    )
    p_bench.add_argument("--epsilon", type=float, default=1e-8)
    p_bench.add_argument("--max-iters", type=int, default=1_000_000)
    p_bench.add_argument("--gap-check-interval", type=int, default=10)
    p_bench.add_argument(
        "--allow-large", action="store_true", help=f"permit q above {MAX_BENCH_Q}"
    )
    p_bench.add_argument("--out", help="CSV path (stdout when omitted)")

    return parser


def _add_problem_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--problem", required=True, help="instance JSON (raw or reduced)")


def _add_formulation_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--lambda", dest="lam", type=float, help="penalized weight")
    sub.add_argument("--budget", type=float, help="constrained trace-norm budget")
    sub.add_argument(
        "--gamma", type=float, help="exact-penalty weight override (with --budget)"
    )


def _add_solver_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--epsilon", type=float, default=1e-8)
    sub.add_argument("--max-iters", type=int, default=1_000_000)
    sub.add_argument("--gap-check-interval", type=int, default=1)


def _solver_config(args, record_trajectory: bool = False) -> SolverConfig:
    try:
        return SolverConfig(
            epsilon=args.epsilon,
            max_iters=args.max_iters,
            gap_check_interval=args.gap_check_interval,
            record_trajectory=record_trajectory,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_reduced(path) -> ReducedProblem:
    problem = load_problem(path)
    if isinstance(problem, RawInstance):
        problem = reduce_instance(problem)
    return problem


def _build_spec(args, problem: ReducedProblem):
    if (args.lam is None) == (args.budget is None):
        raise UsageError("exactly one of --lambda and --budget is required")
    if args.gamma is not None and args.budget is None:
        raise UsageError("--gamma requires --budget")
    try:
        if args.lam is not None:
            return PenalizedSpec(problem=problem, lam=args.lam)
        if args.gamma is not None:
            return ConstrainedSpec(problem=problem, budget=args.budget, gamma=args.gamma)
        return ConstrainedSpec(problem=problem, budget=args.budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write_text(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _report_json(report: SolveReport) -> str:
    return json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"


def _trajectory_csv(report: SolveReport) -> str:
    lines = [TRAJECTORY_HEADER]
    for k, f, g, gap in report.trajectory:
        lines.append(f"{k},{f!r},{g!r},{gap!r}")
    return "\n".join(lines) + "\n"


def _cmd_gen(args) -> int:
    if args.q < 1:
        raise UsageError("--q must be a positive integer")
    if args.seed < 0:
        raise UsageError("--seed must be a nonnegative integer")
    instance = generate_instance(args.q, args.seed)
    save_problem(args.out, instance)
    l, p, q = instance.a.shape[0], instance.a.shape[1], instance.b.shape[1]
    print(f"wrote instance l={l} p={p} q={q} seed={args.seed} to {args.out}")
    return 0


def _cmd_solve(args) -> int:
    problem = _load_reduced(args.problem)
    spec = _build_spec(args, problem)
    config = _solver_config(args, record_trajectory=args.trajectory is not None)
    if isinstance(spec, PenalizedSpec):
        report = solve_penalized(spec, config)
    else:
        report = solve_constrained(spec, config)
    _write_text(args.out, _report_json(report))
    if args.trajectory is not None:
        _write_text(args.trajectory, _trajectory_csv(report))
    print(
        f"{report.formulation}: iterations={report.iterations} "
        f"gap={report.gap:.3e} converged={report.converged}"
    )
    if not report.converged:
        print(
            "contract failure: duality gap "
            f"{report.gap:.3e} > epsilon {report.epsilon:.3e} "
            f"after max_iters={args.max_iters}",
            file=sys.stderr,
        )
        return 2
    return 0


def sweep_penalized(
    problem: ReducedProblem, lams, config: SolverConfig | None = None
) -> list[SweepRow]:
    """Penalized solves over a lambda grid with their Everett budgets.

    Each row carries ``(lambda, trace_norm(x_lambda), objective)``; the
    budget column realizes the lambda -> budget correspondence, so a
    constrained solve at that budget reproduces the row's residual term.
    Raises :class:`ContractError` if any solve fails to converge or the
    budgets are not strictly decreasing in lambda.
    """
    lams = sorted(float(l) for l in lams)
    if len(lams) != len(set(lams)):
        raise UsageError("sweep lambdas must be distinct")
    if lams and lams[0] <= 0.0:
        raise UsageError("sweep lambdas must be positive")
    config = config or SolverConfig()
    rows = []
    for lam in lams:
        report = solve_penalized(PenalizedSpec(problem=problem, lam=lam), config)
        if not report.converged:
            raise ContractError(
                f"sweep solve at lambda={lam} stopped at gap {report.gap:.3e} "
                f"above epsilon {config.epsilon:.3e}"
            )
        rows.append(
            SweepRow(lam=lam, budget=trace_norm(report.x), objective=report.primal_obj)
        )
    for prev, cur in zip(rows, rows[1:]):
        if not cur.budget < prev.budget:
            raise ContractError(
                "sweep budgets must decrease strictly in lambda, got "
                f"{prev.budget!r} at lambda={prev.lam} then {cur.budget!r} "
                f"at lambda={cur.lam}"
            )
    return rows


def _cmd_sweep(args) -> int:
    problem = _load_reduced(args.problem)
    try:
        lams = [float(tok) for tok in args.lambdas.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"--lambdas must be comma-separated floats: {exc}") from exc
    if not lams:
        raise UsageError("--lambdas must name at least one weight")
    rows = sweep_penalized(problem, lams, _solver_config(args))
    lines = [SWEEP_HEADER]
    lines.extend(f"{row.lam!r},{row.budget!r},{row.objective!r}" for row in rows)
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.out is not None:
        print(f"wrote {len(rows)} sweep rows to {args.out}")
    return 0


def _cmd_export_cone(args) -> int:
    problem = _load_reduced(args.problem)
    spec = _build_spec(args, problem)
    if isinstance(spec, PenalizedSpec):
        program = export_penalized(spec)
    else:
        program = export_constrained(spec)
    write_cone_file(args.out, program)
    print(
        f"wrote {program.kind} cone program "
        f"(vars={program.num_vars}, soc={program.soc_dim}, psd=2x{program.psd_dim}) "
        f"to {args.out}"
    )
    return 0


def _peak_memory_bytes() -> int:
    try:
        import resource
    except ImportError:
        print("warning: peak memory unavailable on this platform", file=sys.stderr)
        return 0
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # ru_maxrss is kilobytes on Linux, bytes on macOS
    return int(rss) if sys.platform == "darwin" else int(rss) * 1024


def bench_rows(qs, seeds, formulation: str, lam: float, budget_frac: float,
               config: SolverConfig) -> list[BenchRow]:
    """Run the benchmark grid sequentially in sorted (q, seed) order."""
    rows = []
    for q in sorted(qs):
        for seed in sorted(seeds):
            problem = reduce_instance(generate_instance(q, seed))
            if formulation == "penalized":
                spec = PenalizedSpec(problem=problem, lam=lam)
                report = solve_penalized(spec, config)
                knob = lam
            else:
                budget = budget_frac * trace_norm(problem.h / problem.lambda_diag[:, None])
                spec = ConstrainedSpec(problem=problem, budget=budget)
                report = solve_constrained(spec, config)
                knob = budget
            rows.append(
                BenchRow(
                    p=problem.p,
                    q=problem.q,
                    formulation=formulation,
                    lambda_or_m=float(knob),
                    iterations=report.iterations,
                    primal_obj=report.primal_obj,
                    dual_obj=report.dual_obj,
                    gap=report.gap,
                    wall_time_seconds=report.wall_time,
                    peak_memory_bytes=_peak_memory_bytes(),
                )
            )
            if not report.converged:
                raise ContractError(
                    f"bench cell q={q} seed={seed} stopped at gap {report.gap:.3e} "
                    f"above epsilon {config.epsilon:.3e}"
                )
    return rows


def bench_summary(rows) -> str:
    """Fixed-width table of the grid results, objectives to 9 decimals."""
    header = (
        f"{'p':>4} {'q':>4} {'formulation':>12} {'lambda_or_m':>12} {'iters':>8} "
        f"{'primal_obj':>16} {'dual_obj':>16} {'gap':>10} {'time_s':>8} {'peak_mb':>8}"
    )
    lines = [header]
    for row in rows:
        lines.append(
            f"{row.p:>4d} {row.q:>4d} {row.formulation:>12} {row.lambda_or_m:>12.4g} "
            f"{row.iterations:>8d} {row.primal_obj:>16.9f} {row.dual_obj:>16.9f} "
            f"{row.gap:>10.2e} {row.wall_time_seconds:>8.3f} "
            f"{row.peak_memory_bytes / 1048576.0:>8.1f}"
        )
    return "\n".join(lines) + "\n"


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag} must be comma-separated integers: {exc}") from exc
    if not values:
        raise UsageError(f"{flag} must name at least one value")
    return values


def _cmd_bench(args) -> int:
    qs = _parse_int_list(args.qs, "--qs")
    seeds = _parse_int_list(args.seeds, "--seeds")
    if min(qs) < 1:
        raise UsageError("--qs entries must be positive")
    if min(seeds) < 0:
        raise UsageError("--seeds entries must be nonnegative")
    if max(qs) > MAX_BENCH_Q and not args.allow_large:
        raise UsageError(
            f"--qs above {MAX_BENCH_Q} requires --allow-large (desk-scale cap)"
        )
    if args.lam <= 0.0:
        raise UsageError("--lambda must be positive")
    if not 0.0 < args.budget_frac < 1.0:
        raise UsageError("--budget-frac must lie strictly between 0 and 1")
    config = _solver_config(args)
    rows = bench_rows(qs, seeds, args.formulation, args.lam, args.budget_frac, config)
    lines = [BENCH_HEADER]
    lines.extend(row.csv() for row in rows)
    _write_text(args.out, "\n".join(lines) + "\n")
    print(bench_summary(rows), end="")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "export-cone": _cmd_export_cone,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (gen, solve, sweep, export-cone, bench)")
        handler = _COMMANDS[args.command]
    except UsageError as exc:
        print(f"invalid flags: {exc}", file=sys.stderr)
        return 1
    try:
        return handler(args)
    except UsageError as exc:
        print(f"invalid flags: {exc}", file=sys.stderr)
        return 1
    except ContractError as exc:
        print(f"contract failure: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"I/O error: malformed input file: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
