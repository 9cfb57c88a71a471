"""Coefficient-space operator algebra.

Everything here acts on Chebyshev coefficient vectors in the transplanted
variable: multiplication by a function becomes a Toeplitz-plus-Hankel
matrix, endpoint evaluation becomes a dense row, and integral-equation
discretizations become square systems, optionally bordered by extra
scalar unknowns and functional constraints. Solves are dense LU at the
truncation size with a reciprocal-condition gate; these operators are
well conditioned by construction, so a gate trip means a modeling bug,
not a need for a fancier factorization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .chebcore import ChebSeries
from .fio import band_profile

__all__ = [
    "CoeffOperator",
    "BoundaryFunctional",
    "BorderedSystem",
    "BorderedSolution",
    "IllConditionedError",
    "mult_operator",
    "boundary_row",
    "solve_bordered",
]

_RCOND_FLOOR = 1e-13


class IllConditionedError(RuntimeError):
    """Raised when a truncated system is numerically singular."""

    def __init__(self, rcond: float):
        super().__init__(
            f"system numerically singular: reciprocal condition {rcond:.3e}"
        )
        self.rcond = rcond


@dataclass(frozen=True)
class CoeffOperator:
    """A dense matrix acting on TCP coefficient vectors.

    The band profile is measured from the entries at wrap time (relative
    cut 1e-13), so the declared profile is always consistent with the
    contents.
    """

    matrix: np.ndarray
    lower_bandwidth: int
    upper_bandwidth: int

    @classmethod
    def wrap(cls, matrix: np.ndarray) -> "CoeffOperator":
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got {m.shape}")
        if not np.isfinite(m).all():
            raise ValueError("operator matrix has non-finite entries")
        lo, up = band_profile(m)
        return cls(matrix=m, lower_bandwidth=lo, upper_bandwidth=up)

    @classmethod
    def identity(cls, size: int, dtype=float) -> "CoeffOperator":
        return cls.wrap(np.eye(size + 1, dtype=dtype))

    @property
    def size(self) -> int:
        return self.matrix.shape[0] - 1

    def _check(self, other: "CoeffOperator"):
        if self.matrix.shape != other.matrix.shape:
            raise ValueError(
                f"operator sizes differ: {self.matrix.shape} vs {other.matrix.shape}"
            )

    def __add__(self, other: "CoeffOperator") -> "CoeffOperator":
        self._check(other)
        return CoeffOperator.wrap(self.matrix + other.matrix)

    def __sub__(self, other: "CoeffOperator") -> "CoeffOperator":
        self._check(other)
        return CoeffOperator.wrap(self.matrix - other.matrix)

    def __mul__(self, scalar) -> "CoeffOperator":
        return CoeffOperator.wrap(self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        """Composition with an operator, or action on a coefficient vector."""
        if isinstance(other, CoeffOperator):
            self._check(other)
            return CoeffOperator.wrap(self.matrix @ other.matrix)
        return self.matrix @ self._fit(np.asarray(other))

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ self._fit(np.asarray(coeffs))

    def _fit(self, c: np.ndarray) -> np.ndarray:
        n = self.matrix.shape[0]
        if c.shape[0] > n:
            raise ValueError("coefficient vector longer than the operator")
        if c.shape[0] < n:
            c = np.concatenate([c, np.zeros(n - c.shape[0], dtype=c.dtype)])
        return c


def mult_operator(coeffs, size: int) -> CoeffOperator:
    """Multiplication by the function with the given T-coefficients.

    The product of two T-series folds through both T_{|i-j|} and T_{i+j},
    so the matrix is half Toeplitz plus half Hankel, with the first row
    and the diagonal adjusted for the doubled k = 0 term. Truncation at
    size keeps the projection of the full product.
    """
    if isinstance(coeffs, ChebSeries):
        if coeffs.kind != "T":
            raise ValueError("multiplier must be a first-kind series")
        a = coeffs.coeffs
    else:
        a = np.asarray(coeffs)
    n = size + 1
    pad = np.zeros(2 * size + 1, dtype=a.dtype)
    keep = min(a.shape[0], pad.shape[0])
    pad[:keep] = a[:keep]
    T = scipy.linalg.toeplitz(pad[:n], pad[:n])  # explicit row: no conjugation
    H = scipy.linalg.hankel(pad[:n], pad[size:])
    M = 0.5 * (T + H)
    M[0, 1:] -= 0.5 * pad[1:n]
    idx = np.arange(1, n)
    M[idx, idx] += 0.5 * pad[0]
    return CoeffOperator.wrap(M)


@dataclass(frozen=True)
class BoundaryFunctional:
    """Endpoint evaluation as a row over TCP coefficients."""

    endpoint: int
    row: np.ndarray

    def __call__(self, coeffs) -> float:
        c = np.asarray(getattr(coeffs, "coeffs", coeffs))
        if c.shape[0] > self.row.shape[0]:
            raise ValueError("coefficient vector longer than the functional row")
        return self.row[: c.shape[0]] @ c

    def after(self, op: CoeffOperator) -> np.ndarray:
        """The composed row evaluating (op u) at the endpoint."""
        if self.row.shape[0] != op.matrix.shape[0]:
            raise ValueError("functional and operator sizes differ")
        return self.row @ op.matrix


def boundary_row(endpoint: int, size: int) -> BoundaryFunctional:
    """Evaluation at psi(+-1) = +-1: T_n(1) = 1, T_n(-1) = (-1)^n."""
    if endpoint == 1:
        row = np.ones(size + 1)
    elif endpoint == -1:
        row = (-1.0) ** np.arange(size + 1)
    else:
        raise ValueError(f"endpoint must be +1 or -1, got {endpoint}")
    return BoundaryFunctional(endpoint=endpoint, row=row)


@dataclass(frozen=True)
class BorderedSystem:
    """A square system [core, cols; rows, corner] [u; a] = [rhs; rhs_border].

    The border carries auxiliary scalar unknowns (integration constants,
    inhomogeneity weights) and functional constraints (boundary rows).
    border_k may be zero, in which case this is a plain dense solve.
    """

    core: CoeffOperator
    rhs: np.ndarray
    cols: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    rows: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    corner: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    rhs_border: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        n = self.core.matrix.shape[0]
        k = self.rhs_border.shape[0]
        if self.rhs.shape != (n,):
            raise ValueError(f"rhs must have shape ({n},), got {self.rhs.shape}")
        if k:
            if self.cols.shape != (n, k):
                raise ValueError(f"cols must have shape ({n}, {k})")
            if self.rows.shape != (k, n):
                raise ValueError(f"rows must have shape ({k}, {n})")
            if self.corner.shape != (k, k):
                raise ValueError(f"corner must have shape ({k}, {k})")

    @property
    def border_k(self) -> int:
        return self.rhs_border.shape[0]

    def full_matrix(self) -> np.ndarray:
        if self.border_k == 0:
            return self.core.matrix
        return np.block(
            [[self.core.matrix, self.cols], [self.rows, self.corner]]
        )


@dataclass(frozen=True)
class BorderedSolution:
    coeffs: np.ndarray
    border: np.ndarray
    residual: float
    rcond: float


def solve_bordered(system: BorderedSystem, rcond_floor: float = _RCOND_FLOOR) -> BorderedSolution:
    """Dense LU solve of the bordered system with a conditioning gate.

    Raises IllConditionedError when the reciprocal condition estimate
    falls below rcond_floor; reports the true residual of the returned
    solution. Callers whose systems are structurally ill-conditioned but
    backward-stably solvable (endpoint-weighted formulations) may lower
    the floor; exact singularity still raises.
    """
    full = system.full_matrix()
    b = np.concatenate([system.rhs, system.rhs_border])
    dtype = np.result_type(full.dtype, b.dtype, float)
    full = full.astype(dtype, copy=False)
    b = b.astype(dtype, copy=False)
    anorm = np.linalg.norm(full, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(full)
    gecon = scipy.linalg.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm)
    if info != 0 or not np.isfinite(rcond) or rcond <= 0 or rcond < rcond_floor:
        raise IllConditionedError(float(rcond))
    sol = scipy.linalg.lu_solve((lu, piv), b)
    residual = float(np.linalg.norm(full @ sol - b))
    n = system.core.matrix.shape[0]
    return BorderedSolution(
        coeffs=sol[:n],
        border=sol[n:],
        residual=residual,
        rcond=float(rcond),
    )
