"""Direct-method solver for fractional variational problems.

The first variation of ``J(x) = int_a^b L(t, x, D^alpha x) dt`` is discretized
with Grünwald-Letnikov weights and tested against hat functions; the resulting
algebraic system is solved by Newton's method.
"""

from .glcore import FractionalOrder, GLWeights, Mesh, caputo_from_rl, gamma, gl_weights, rl_derivative_on_mesh
from .problem import (
    ExactSolution,
    IsoperimetricConstraint,
    VariationalProblem,
    builtin_example,
    example_1,
    example_2,
    example_3,
)
from .assembly import (
    assemble_constraint_residual,
    assemble_jacobian,
    assemble_residual,
    discretized_functional,
    hat_variation,
    hat_variation_gl_derivative,
)
from .solver import Solution, SolverOptions, solve, solve_isoperimetric

__version__ = "0.1.0"
