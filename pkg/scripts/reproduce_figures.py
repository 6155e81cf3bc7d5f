"""Write plot-ready CSVs for the three built-in examples at several step sizes.

    python scripts/reproduce_figures.py --out results/

Produces ``example{k}_n{n}.csv`` (mesh solution against the exact one) and
``example{k}_study.csv`` (error, observed order, residual per mesh).
"""

import argparse
import pathlib
import sys

from fracvar.cli import ProblemSpec, convergence_study, run, write_solution_csv, write_study_csv
from fracvar.solver import SolverOptions

MESHES = {1: [10, 20, 40, 80, 160], 2: [25, 50, 100, 200], 3: [25, 50, 100, 200]}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    options = SolverOptions()
    ok = True
    for k, n_list in MESHES.items():
        case = ProblemSpec.from_example(k)
        for n in n_list:
            sol, rep = run(case, n, options)
            ok &= sol.converged
            with open(args.out / f"example{k}_n{n}.csv", "w", encoding="utf-8", newline="") as fh:
                write_solution_csv(fh, sol, case.exact)
        rows = convergence_study(case, n_list, options, jobs=args.jobs)
        with open(args.out / f"example{k}_study.csv", "w", encoding="utf-8", newline="") as fh:
            write_study_csv(fh, rows, with_error=True)
        print(f"example {k} ({case.exact.description}):")
        for r in rows:
            order = "" if r.order is None else f"  order {r.order:.3f}"
            lam = "" if r.lam is None else f"  lambda {r.lam:.6f}"
            print(f"  n = {r.n:4d}  E = {r.error:.4e}{order}  iterations {r.iterations:3d}{lam}")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
