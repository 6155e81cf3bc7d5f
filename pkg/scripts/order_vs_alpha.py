"""Observed convergence order of the discrete solution as the fractional order varies.

Uses the family L = (d - G(3)/G(3 - alpha) t^(2 - alpha))^2 on [0, 1] with
x(0) = 0, x(1) = 1, whose minimizer is x(t) = t^2 for every alpha.

    python scripts/order_vs_alpha.py --alphas 0.1,0.3,0.5,0.7,0.9 --n-list 20,40,80,160
"""

import argparse
import sys

from fracvar.cli import ProblemSpec, convergence_study
from fracvar.glcore import gamma
from fracvar.problem import ExactSolution, VariationalProblem


def t_squared_problem(alpha):
    c = gamma(3.0) / gamma(3.0 - alpha)
    p = VariationalProblem(
        lambda t, x, d: (d - c * t ** (2 - alpha)) ** 2,
        lambda t, x, d: 0 * d,
        lambda t, x, d: 2 * (d - c * t ** (2 - alpha)),
        alpha,
        (0.0, 1.0),
        (0.0, 1.0),
        name=f"t^2 family, alpha={alpha}",
    )
    return ProblemSpec(p.name, p, None, ExactSolution(lambda t: t**2, "t^2"))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", default="0.1,0.3,0.5,0.7,0.9")
    ap.add_argument("--n-list", default="20,40,80,160")
    args = ap.parse_args(argv)
    n_list = [int(v) for v in args.n_list.split(",")]
    print("alpha," + ",".join(f"E(n={n})" for n in n_list) + ",last_order")
    for alpha in (float(a) for a in args.alphas.split(",")):
        rows = convergence_study(t_squared_problem(alpha), n_list)
        errs = ",".join(f"{r.error:.4e}" for r in rows)
        print(f"{alpha},{errs},{rows[-1].order:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
