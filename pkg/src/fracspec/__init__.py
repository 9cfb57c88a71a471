"""Spectral approximation of fractional integral operators.

Operators I^mu of Riemann-Liouville type are represented by their action on
a transplanted Chebyshev basis Q_k(x) = T_k(psi_inv(x)), where psi is an
endpoint-resolving change of variables. The resulting coefficient matrices
are dense but cheap to build column by column, and carry endpoint algebraic
singularities to machine precision.

The high-level entry points: FIOApprox.build assembles one operator,
solve_fie runs a truncation ladder over a declarative ProblemSpec,
solve_fde_airy and solve_eigen handle the two differential drivers, and
pseudospectra maps the inverse resolvent norm over a grid. The fracspec
console script exposes the same drivers from the command line.
"""

from .chebcore import ChebSeries, UltraOps, build_ultra_ops, clenshaw_eval
from .fio import FIOApprox, build_operator, build_riesz, default_kernel
from .kernel import LowRankKernel, aca_approximate
from .opalgebra import IllConditionedError
from .problems import abel_problem, mixed_problem, riesz_problem
from .solver import (
    ConvergenceError,
    EigenResult,
    EndpointPower,
    GridFunction,
    OperatorTerm,
    ProblemSpec,
    PseudospectraJob,
    PseudospectraResult,
    Solution,
    TruncationPolicy,
    pseudospectra,
    solve_eigen,
    solve_fde_airy,
    solve_fie,
)
from .transform import (
    AlgebraicTransform,
    DoubleExpTransform,
    select_omega,
    tcp_eval,
    tcp_expand,
)

__all__ = [
    "AlgebraicTransform",
    "ChebSeries",
    "ConvergenceError",
    "DoubleExpTransform",
    "EigenResult",
    "EndpointPower",
    "FIOApprox",
    "GridFunction",
    "IllConditionedError",
    "LowRankKernel",
    "OperatorTerm",
    "ProblemSpec",
    "PseudospectraJob",
    "PseudospectraResult",
    "Solution",
    "TruncationPolicy",
    "UltraOps",
    "aca_approximate",
    "abel_problem",
    "build_operator",
    "build_riesz",
    "build_ultra_ops",
    "clenshaw_eval",
    "default_kernel",
    "mixed_problem",
    "pseudospectra",
    "riesz_problem",
    "select_omega",
    "solve_eigen",
    "solve_fde_airy",
    "solve_fie",
    "tcp_eval",
    "tcp_expand",
]

__version__ = "0.1.0"
