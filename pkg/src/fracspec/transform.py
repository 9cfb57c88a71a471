"""Endpoint-resolving changes of variables and transplanted expansions.

A transform psi maps the computational interval [-1, 1] onto the physical
interval [-1, 1] while crowding resolution toward one or both endpoints.
Expanding f(psi(y)) in Chebyshev polynomials of y gives a transplanted
Chebyshev (TCP) expansion of f that converges fast even when f carries an
algebraic endpoint singularity (1 + x)^gamma.

Two maps are provided: a double-exponential map that resolves both
endpoints at once, with strength set by a single parameter omega, and an
algebraic map (1 + psi)/2 = ((1 + y)/2)^(1/beta) that turns a single known
left-endpoint exponent into polynomial behavior exactly.

Quantities like 1 - psi(y) underflow the working precision long before the
endpoint; every formula that needs them goes through log1pm_psi, which
returns log(1 +/- psi(y)) without forming the difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chebcore import ChebSeries, clenshaw_eval, lobatto_points, values_to_coeffs

__all__ = [
    "SingularityInfo",
    "DoubleExpTransform",
    "AlgebraicTransform",
    "select_omega",
    "logcosh",
    "logsinhc",
    "tcp_expand",
    "tcp_eval",
]

LOG2 = math.log(2.0)
# Weakest map that still resolves smooth behavior; used when no endpoint
# singularity is declared.
OMEGA_FLOOR = 3.154


def _match_scalar(x, out):
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def _log_half1p(y):
    """log((1 + y)/2) without cancellation at either end of [-1, 1].

    log1p(y) - log(2) cancels catastrophically as y -> 1; there the exact
    difference (y - 1)/2 feeds log1p instead.
    """
    yv = np.asarray(y, dtype=float)
    return np.where(yv <= 0, np.log1p(yv) - LOG2, np.log1p(0.5 * (yv - 1)))


def logcosh(x):
    """log(cosh(x)), overflow-free."""
    a = np.abs(np.asarray(x, dtype=float))
    return a + np.log1p(np.exp(-2 * a)) - LOG2


def logsinhc(x):
    """log(sinh(x) / x) for x >= 0, with the removable zero at x = 0."""
    a = np.asarray(x, dtype=float)
    a2 = a * a
    series = a2 / 6 - a2 * a2 / 180
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mid = np.log(np.sinh(np.minimum(a, 350.0)) / a)
        big = a - np.log(2 * a)
    out = np.where(a < 1e-3, series, np.where(a < 350.0, mid, big))
    return _match_scalar(x, out)


@dataclass(frozen=True)
class SingularityInfo:
    """Declared endpoint regularity of the data of a problem.

    Attributes:
        gamma: weakest algebraic endpoint exponent present in the problem
            (solution, coefficients, or operator orders). math.inf means
            everything in sight is smooth.
        scale: sup norm scale of the data; enters the resolution target
            multiplicatively.
    """

    gamma: float = math.inf
    scale: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


def select_omega(gamma: float, scale: float = 1.0) -> float:
    """Map strength for resolving a (1 + x)^gamma endpoint singularity.

    Chooses omega so that the transplanted singular factor reaches the
    rounding floor of the working precision right at the computational
    endpoint, which is as weak (and therefore as well-conditioned) as the
    map can afford to be.

    Args:
        gamma: weakest endpoint exponent, > 0; math.inf for smooth data.
        scale: sup norm of the data.

    Returns:
        omega >= 3.154.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    eps = np.finfo(float).eps * scale
    if not math.isfinite(gamma):
        return OMEGA_FLOOR
    root = eps ** (1.0 / gamma)
    bracket = LOG2 - math.log(eps) / gamma + math.log1p(-0.5 * root)
    if bracket <= 0:
        return OMEGA_FLOOR
    return max(OMEGA_FLOOR, math.asinh(bracket / math.pi))


@dataclass(frozen=True)
class DoubleExpTransform:
    """psi(y) = tanh((pi/2) sinh(omega y)).

    Resolves algebraic singularities at both endpoints. The map saturates
    to +/-1 within machine epsilon near y = +/-1 by design; code that
    needs the distance to an endpoint must use log1pm_psi.
    """

    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    @classmethod
    def from_singularity(cls, info: SingularityInfo) -> "DoubleExpTransform":
        return cls(select_omega(info.gamma, info.scale))

    def forward(self, y):
        out = np.tanh((np.pi / 2) * np.sinh(self.omega * np.asarray(y, dtype=float)))
        return _match_scalar(y, out)

    def inverse(self, x):
        xv = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
        with np.errstate(divide="ignore"):
            y = np.arcsinh((2 / np.pi) * np.arctanh(xv)) / self.omega
        return _match_scalar(x, np.clip(y, -1.0, 1.0))

    def log1pm_psi(self, y, sign: int):
        """log(1 + sign * psi(y)), accurate into the saturation region.

        sign=+1 gives log(1 + psi), sign=-1 gives log(1 - psi). Finite for
        all y in [-1, 1]: the true distance to the endpoint never vanishes
        under this map.
        """
        if sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        z = np.pi * np.sinh(self.omega * np.asarray(y, dtype=float))
        out = LOG2 - np.logaddexp(0.0, -sign * z)
        return _match_scalar(y, out)

    def log_deriv(self, y):
        """log(psi'(y))."""
        yv = np.asarray(y, dtype=float)
        w = self.omega
        out = (math.log(math.pi * w / 2) + logcosh(w * yv)
               - 2 * logcosh((np.pi / 2) * np.sinh(w * yv)))
        return _match_scalar(y, out)

    def deriv(self, y):
        """psi'(y); underflows to 0 deep inside the saturation region."""
        return _match_scalar(y, np.exp(self.log_deriv(y)))


@dataclass(frozen=True)
class AlgebraicTransform:
    """(1 + psi(y))/2 = ((1 + y)/2)^(1/beta).

    Turns a left-endpoint exponent that is a multiple of beta into
    polynomial behavior in y. Only the left endpoint is resolved.
    """

    beta: float

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")

    def forward(self, y):
        h = 0.5 * (1.0 + np.asarray(y, dtype=float))
        out = 2.0 * h ** (1.0 / self.beta) - 1.0
        return _match_scalar(y, out)

    def inverse(self, x):
        h = 0.5 * (1.0 + np.clip(np.asarray(x, dtype=float), -1.0, 1.0))
        out = 2.0 * h**self.beta - 1.0
        return _match_scalar(x, np.clip(out, -1.0, 1.0))

    def log1pm_psi(self, y, sign: int):
        """log(1 + sign * psi(y)); -inf at the endpoint the sign points to."""
        if sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        with np.errstate(divide="ignore"):
            lh = _log_half1p(y) / self.beta
            if sign == +1:
                out = LOG2 + lh
            else:
                # 1 - psi = -2 expm1(lh); expm1 keeps precision as lh -> 0-.
                out = LOG2 + np.log(-np.expm1(lh))
        return _match_scalar(y, out)

    def log_deriv(self, y):
        with np.errstate(divide="ignore"):
            out = _log_half1p(y) * (1.0 / self.beta - 1.0) - math.log(self.beta)
        return _match_scalar(y, out)

    def deriv(self, y):
        return _match_scalar(y, np.exp(self.log_deriv(y)))


def tcp_expand(f, transform, n: int, of_y: bool = False) -> ChebSeries:
    """Degree-n transplanted Chebyshev interpolant of f.

    Args:
        f: callable. By default called as f(x) on physical points. With
            of_y=True it is called as f(y) on the computational grid
            instead, which lets endpoint-singular factors be formed from
            transform.log1pm_psi at full precision.
        transform: the change of variables.
        n: interpolation degree.
        of_y: see f.

    Returns:
        ChebSeries in y whose composition with transform.inverse
        interpolates f.
    """
    y = lobatto_points(n)
    vals = np.asarray(f(y) if of_y else f(transform.forward(y)))
    if vals.shape != y.shape:
        raise ValueError("f must return one value per grid point")
    return ChebSeries(values_to_coeffs(vals))


def tcp_eval(series, transform, x):
    """Evaluate a transplanted series at physical points x."""
    coeffs = series.coeffs if isinstance(series, ChebSeries) else np.asarray(series)
    return clenshaw_eval(coeffs, transform.inverse(x), kind="T")
