"""Command-line front end.

    fracvar solve --example 1 --n 40 --out ex1.csv
    fracvar solve --lagrangian "d^2 + t*x" --alpha 0.3 --interval 0,1 --boundary 0,1 --n 50
    fracvar study --example 3 --n-list 16,32,64

Exit codes: 0 converged, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr
from .problem import IsoperimetricConstraint, VariationalProblem, builtin_example
from .solver import SingularJacobianError, Solution, SolverOptions, solve, solve_isoperimetric

__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_NUMERIC",
    "ProblemSpec",
    "RunReport",
    "StudyRow",
    "error_max",
    "run",
    "run_example",
    "convergence_study",
    "write_solution_csv",
    "read_solution_csv",
    "main",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2

CSV_HEADER = ("index", "t", "x_numeric", "x_exact", "abs_error")


@dataclass(frozen=True)
class ProblemSpec:
    """A problem as the CLI sees it: what to solve and what to compare against."""

    descriptor: str
    problem: VariationalProblem
    constraint: Optional[IsoperimetricConstraint] = None
    exact: Optional[Callable] = None

    @classmethod
    def from_example(cls, example_id: int) -> "ProblemSpec":
        problem, constraint, exact = builtin_example(example_id)
        return cls(f"example {example_id}", problem, constraint, exact)


@dataclass
class RunReport:
    descriptor: str
    n: int
    alpha: float
    interval: tuple[float, float]
    boundary: tuple[float, float]
    converged: bool
    iterations: int
    residual_norm: float
    lam: Optional[float]
    constraint_residual: Optional[float]
    error: Optional[float]
    wall_time: float

    def to_text(self) -> str:
        lines = [
            f"problem: {self.descriptor}",
            f"n = {self.n}, alpha = {self.alpha:g}, interval = [{self.interval[0]:g}, {self.interval[1]:g}], "
            f"boundary = ({self.boundary[0]!r}, {self.boundary[1]!r})",
            f"converged: {'yes' if self.converged else 'NO'} after {self.iterations} iteration(s), "
            f"residual max-norm {self.residual_norm:.3e}",
        ]
        if self.lam is not None:
            lines.append(f"lambda = {self.lam!r}, |constraint residual| = {abs(self.constraint_residual):.3e}")
        if self.error is not None:
            lines.append(f"E = max|x(t_i) - x_i| = {self.error:.6e}")
        lines.append(f"wall time: {self.wall_time:.3f} s")
        return "\n".join(lines)


def error_max(solution: Solution, exact: Callable) -> float:
    """``max_i |x(t_i) - x_i|`` over all mesh points."""
    ref = np.asarray(exact(solution.mesh.t), dtype=float)
    return float(np.max(np.abs(ref - solution.values)))


def run(case: ProblemSpec, n: int, options: SolverOptions) -> tuple[Solution, RunReport]:
    start = time.perf_counter()
    if case.constraint is None:
        sol = solve(case.problem, n, options)
    else:
        sol = solve_isoperimetric(case.problem, case.constraint, n, options)
    elapsed = time.perf_counter() - start
    p = case.problem
    report = RunReport(
        descriptor=case.descriptor,
        n=n,
        alpha=p.alpha.alpha,
        interval=p.interval,
        boundary=p.boundary,
        converged=sol.converged,
        iterations=sol.iterations,
        residual_norm=sol.final_residual_norm,
        lam=sol.lam,
        constraint_residual=sol.constraint_residual,
        error=None if case.exact is None else error_max(sol, case.exact),
        wall_time=elapsed,
    )
    return sol, report


def run_example(example_id: int, n: int, options: Optional[SolverOptions] = None):
    """Solve a built-in example; returns ``(solution, report, csv_text)``."""
    case = ProblemSpec.from_example(example_id)
    sol, report = run(case, n, options or SolverOptions())
    buf = io.StringIO()
    write_solution_csv(buf, sol, case.exact)
    return sol, report, buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_solution_csv(stream, solution: Solution, exact: Optional[Callable] = None) -> None:
    """Rows ``index, t, x_numeric, x_exact, abs_error``; exact columns blank when unknown."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    t = solution.mesh.t
    ref = None if exact is None else np.asarray(exact(t), dtype=float)
    for i, (ti, xi) in enumerate(zip(t, solution.values)):
        if ref is None:
            writer.writerow((i, _fmt(ti), _fmt(xi), "", ""))
        else:
            writer.writerow((i, _fmt(ti), _fmt(xi), _fmt(ref[i]), _fmt(abs(ref[i] - xi))))


def read_solution_csv(stream) -> dict[str, np.ndarray]:
    """Inverse of :func:`write_solution_csv`; blank cells become NaN."""
    reader = csv.DictReader(stream)
    cols: dict[str, list[float]] = {k: [] for k in CSV_HEADER}
    for row in reader:
        for k in CSV_HEADER:
            cell = row[k]
            cols[k].append(float(cell) if cell != "" else math.nan)
    out = {k: np.array(v) for k, v in cols.items()}
    out["index"] = out["index"].astype(int)
    return out


@dataclass
class StudyRow:
    n: int
    h: float
    error: Optional[float]
    order: Optional[float]
    residual_norm: float
    iterations: int
    converged: bool
    lam: Optional[float]
    runtime: float
    failure: str = ""


def convergence_study(
    case: ProblemSpec,
    n_list: Sequence[int],
    options: Optional[SolverOptions] = None,
    jobs: int = 1,
) -> list[StudyRow]:
    """Solve at every ``n``; observed order ``log(E_prev/E) / log(n/n_prev)`` on each finer row.

    A row whose solve raises is kept with the failure recorded.
    """
    if not n_list:
        raise ValueError("n_list must not be empty")
    if any(n < 2 for n in n_list):
        raise ValueError("every n must be at least 2")
    options = options or SolverOptions()

    def one(n: int) -> StudyRow:
        h = (case.problem.interval[1] - case.problem.interval[0]) / n
        try:
            _, rep = run(case, n, options)
        except (SingularJacobianError, expr.EvalError, np.linalg.LinAlgError) as exc:
            return StudyRow(n, h, None, None, math.nan, 0, False, None, 0.0, str(exc))
        return StudyRow(n, h, rep.error, None, rep.residual_norm, rep.iterations, rep.converged, rep.lam, rep.wall_time)

    ordered = sorted(n_list)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, ordered))
    else:
        rows = [one(n) for n in ordered]
    for prev, row in zip(rows, rows[1:]):
        if prev.error and row.error and row.n > prev.n:
            row.order = math.log(prev.error / row.error) / math.log(row.n / prev.n)
    return rows


def write_study_csv(stream, rows: list[StudyRow], with_error: bool) -> None:
    header = ["n", "h"]
    if with_error:
        header.append("E")
        if len(rows) > 1:
            header.append("order")
    header += ["residual", "iterations", "converged", "lambda", "runtime_s", "failure"]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        cells = [r.n, _fmt(r.h)]
        if with_error:
            cells.append(_fmt(r.error))
            if len(rows) > 1:
                cells.append(_fmt(r.order))
        cells += [_fmt(r.residual_norm), r.iterations, int(r.converged), _fmt(r.lam), f"{r.runtime:.4f}", r.failure]
        writer.writerow(cells)


# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty n list")
    return values


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("problem")
    g.add_argument("--example", type=int, help="built-in example 1, 2 or 3")
    g.add_argument("--lagrangian", metavar="EXPR", help="L(t, x, d) with d the fractional derivative")
    g.add_argument("--alpha", type=float, help="order in (0, 1)")
    g.add_argument("--interval", type=_pair, metavar="A,B")
    g.add_argument("--boundary", type=_pair, metavar="XA,XB")
    g.add_argument("--constraint", metavar="EXPR", help="isoperimetric integrand g(t, x, d)")
    g.add_argument("--target", type=float, metavar="K", help="value of the constraint integral")
    g.add_argument("--exact", metavar="EXPR", help="exact solution x(t), for error reporting")
    s = p.add_argument_group("solver")
    s.add_argument("--tol", type=float, default=SolverOptions.tol_residual)
    s.add_argument("--max-iter", type=int, default=SolverOptions.max_iterations)
    p.add_argument("--out", metavar="PATH", help="CSV destination (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracvar", description="Direct-method solver for fractional variational problems.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    ps = sub.add_parser("solve", help="solve one problem and write the mesh solution as CSV")
    _add_problem_args(ps)
    ps.add_argument("--n", type=int, required=True, help="number of subintervals")
    pt = sub.add_parser("study", help="convergence table over several meshes")
    _add_problem_args(pt)
    pt.add_argument("--n-list", type=_int_list, required=True, metavar="N1,N2,...")
    pt.add_argument("--jobs", type=int, default=1)
    return parser


def spec_from_args(args) -> ProblemSpec:
    custom = [args.lagrangian, args.alpha, args.interval, args.boundary]
    if args.example is not None:
        if any(v is not None for v in custom + [args.constraint, args.target, args.exact]):
            raise UsageError("--example cannot be combined with problem definition flags")
        if args.example not in (1, 2, 3):
            raise UsageError(f"--example must be 1, 2 or 3, got {args.example}")
        return ProblemSpec.from_example(args.example)
    if any(v is None for v in custom):
        raise UsageError("give --example, or all of --lagrangian, --alpha, --interval, --boundary")
    if (args.constraint is None) != (args.target is None):
        raise UsageError("--constraint and --target go together")
    if not 0.0 < args.alpha < 1.0:
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    a, b = args.interval
    if not b > a:
        raise UsageError("--interval needs A < B")
    try:
        problem = expr.to_problem(args.lagrangian, args.alpha, a, b, *args.boundary)
        constraint = None if args.constraint is None else expr.to_constraint(args.constraint, args.target)
        exact = None if args.exact is None else expr.to_exact(args.exact)
    except expr.ExprError as exc:
        raise UsageError(str(exc)) from None
    descriptor = args.lagrangian if constraint is None else f"{args.lagrangian} s.t. int {args.constraint} = {args.target!r}"
    return ProblemSpec(descriptor, problem, constraint, exact)


def _open_out(path: Optional[str]):
    if path is None:
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR, format="%(name)s: %(message)s")
    try:
        case = spec_from_args(args)
        if args.tol <= 0 or args.max_iter < 1:
            raise UsageError("--tol must be positive and --max-iter at least 1")
        options = SolverOptions(tol_residual=args.tol, max_iterations=args.max_iter)
        if args.command == "solve" and args.n < 2:
            raise UsageError("--n must be at least 2")
        if args.command == "study" and (min(args.n_list) < 2 or args.jobs < 1):
            raise UsageError("every n must be at least 2 and --jobs at least 1")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fracvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "solve":
            sol, report = run(case, args.n, options)
            stream, close = _open_out(args.out)
            try:
                write_solution_csv(stream, sol, case.exact)
            finally:
                if close:
                    stream.close()
            print(report.to_text(), file=sys.stderr)
            return EXIT_OK if sol.converged else EXIT_NUMERIC
        rows = convergence_study(case, args.n_list, options, jobs=args.jobs)
        stream, close = _open_out(args.out)
        try:
            write_study_csv(stream, rows, with_error=case.exact is not None)
        finally:
            if close:
                stream.close()
        return EXIT_OK if all(r.converged for r in rows) else EXIT_NUMERIC
    except (SingularJacobianError, np.linalg.LinAlgError, expr.EvalError) as exc:
        print(f"fracvar: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"fracvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
