"""Model problems with known closed forms or published behavior.

Each builder returns a ProblemSpec ready for solve_fie, plus the exact
solution when one exists. Right-hand sides with endpoint structure are
declared through EndpointPower or GridFunction so that their expansions
stay accurate into the saturation region of the transform.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma as gamma_fn

from .solver import (
    EndpointPower,
    GridFunction,
    OperatorTerm,
    ProblemSpec,
    TruncationPolicy,
)

__all__ = [
    "abel_problem",
    "mixed_problem",
    "riesz_problem",
]

_LOG2 = math.log(2.0)


def abel_problem(mu: float, policy: TruncationPolicy | None = None):
    """u + I^mu_left[u] = f with solution (1+x)^mu.

    Well defined for any mu > 0; the right-hand side pairs the solution
    with its own order-mu integral.

    Returns:
        (spec, exact) where exact is the declared solution.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    exact = EndpointPower(p=mu)
    rhs = (
        exact,
        EndpointPower(p=2.0 * mu, scale=gamma_fn(1.0 + mu) / gamma_fn(1.0 + 2.0 * mu)),
    )
    spec = ProblemSpec(
        terms=(OperatorTerm(order=0.0), OperatorTerm(order=mu, side="left")),
        rhs=rhs,
        gamma=mu,
        policy=policy or TruncationPolicy(),
    )
    return spec, exact


def _riesz_rhs(transform, y):
    # f = c sqrt(1+x) + sqrt(2(1-x)) + (1+x)(pi/2 + atanh(s)),
    # s = sqrt((1-x)/2). s comes from log(1-x) directly (1 - (1+x)/2
    # would cancel near x = 1) and the atanh from log(1+x), so both ends
    # evaluate to full precision and the left blowup never forms inf * 0.
    lp = transform.log1pm_psi(y, +1)
    lm = transform.log1pm_psi(y, -1)
    s = np.exp(0.5 * (lm - _LOG2))
    atanh_s = np.log1p(s) + 0.5 * (_LOG2 - lp)
    c = 2.0 * math.sqrt(math.pi) * math.cos(math.pi / 4.0)
    return (
        c * np.exp(0.5 * lp)
        + np.exp(0.5 * (_LOG2 + lm))
        + np.exp(lp) * (0.5 * math.pi + atanh_s)
    )


def riesz_problem(policy: TruncationPolicy | None = None):
    """u + I_R^{1/2}[u] = f with solution 2 Gamma(1/2) cos(pi/4) sqrt(1+x).

    Returns:
        (spec, exact).
    """
    exact = EndpointPower(p=0.5, scale=2.0 * math.sqrt(math.pi) * math.cos(math.pi / 4.0))
    spec = ProblemSpec(
        terms=(OperatorTerm(order=0.0), OperatorTerm(order=0.5, side="riesz")),
        rhs=GridFunction(_riesz_rhs),
        gamma=0.5,
        policy=policy or TruncationPolicy(),
    )
    return spec, exact


def mixed_problem(policy: TruncationPolicy | None = None) -> ProblemSpec:
    """Four incompatible fractional orders in one equation.

    u + (1+x)^{2/3} I_R^{sqrt 2}[u] + I^{pi/4}_right[(1-.)^{sqrt 3} u]
      + I^{e/3}_left[u] = 1.

    No closed-form solution; the interest is the shared transform chosen
    from the weakest exponent 2/3 and the Cauchy plateau of the solve.
    """
    terms = (
        OperatorTerm(order=0.0),
        OperatorTerm(order=math.sqrt(2.0), side="riesz", outer=EndpointPower(p=2.0 / 3.0)),
        OperatorTerm(order=math.pi / 4.0, side="right", inner=EndpointPower(q=math.sqrt(3.0))),
        OperatorTerm(order=math.e / 3.0, side="left"),
    )
    return ProblemSpec(
        terms=terms,
        rhs=1.0,
        gamma=2.0 / 3.0,
        policy=policy or TruncationPolicy(tol=1e-12),
    )
