"""Column-by-column construction of fractional integral operator matrices.

In the transplanted basis Q_k(x) = T_k(psi_inv(x)), the left-sided order-mu
integral of column n is

    I^mu[Q_n](psi(y)) = ((-1)^n (1 + psi(y))^mu + n phi_n(y)) / Gamma(1+mu),
    phi_n(y) = (1 + y) sum_j sigma_j f_j(y) phi_n^j(y),

with one moment family per separated kernel term,

    phi_n^j(y) = integral of t^mu U_{n-1}(y - (1+y)t) g_j(t) dt over (0,1),

a polynomial of degree n - 1 in y. The right-sided operator mirrors this
with (1 - psi(y))^mu, the prefactor (y - 1), and U arguments y + (1-y)t.

Successive phi_n^j form a three-term ladder in n. Running it forward is
unstable; instead each new column solves a boundary-bordered banded system:
the truncated coefficient recurrence plus the column's endpoint value from
one stable quadrature. A change of unknowns folds the dense boundary row
into the band, so every step is one solve_banded call across all kernel
terms at once. All matrices here are upper-triangular-with-band in the
coefficient indices; no orthogonal factorization is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import chebyshev as npcheb

from .chebcore import lobatto_points, values_to_coeffs
from .kernel import LowRankKernel, aca_approximate, algebraic_factorization
from .quadrature import BoundaryTracker, gauss_jacobi, moments_h, rule_size_for
from .transform import AlgebraicTransform, DoubleExpTransform

__all__ = [
    "MomentTable",
    "FIOApprox",
    "initial_moments",
    "recurrence_step",
    "build_moment_table",
    "assemble",
    "build_operator",
    "build_riesz",
    "band_profile",
    "default_kernel",
    "default_kernel_degree",
    "default_rank_cap",
    "riesz_prefactor",
]

# Kernel grid degree and separation-rank cap against log10(mu), calibrated
# on the double-exponential map with omega = select_omega(mu). Interpolated
# in between, clamped outside.
_TABLE_LOG10MU = np.array([-6.0, -5.0, -4.0, -3.0, -2.0, -1.0, 0.0])
_TABLE_DEG = np.array([920.0, 660.0, 350.0, 170.0, 120.0, 100.0, 80.0])
_TABLE_RANK = np.array([64.0, 65.0, 64.0, 58.0, 50.0, 40.0, 28.0])


def default_kernel_degree(mu: float) -> int:
    """Grid degree for separating the kernel of an order-mu operator."""
    return int(max(100, math.ceil(np.interp(math.log10(mu), _TABLE_LOG10MU, _TABLE_DEG))))


def default_rank_cap(mu: float) -> int:
    """Separation ranks beyond twice the calibrated value indicate a
    mis-set transform, not a hard kernel; fail rather than grind."""
    return int(2 * math.ceil(np.interp(math.log10(mu), _TABLE_LOG10MU, _TABLE_RANK)))


def _resolve_kernel(transform, mu: float, side: str, kernel, aca_tol: float):
    if kernel is not None:
        if kernel.side != side:
            raise ValueError(f"kernel is {kernel.side}-sided, need {side}")
        return kernel
    deg = default_kernel_degree(mu)
    if isinstance(transform, AlgebraicTransform):
        if side != "left":
            raise ValueError("the algebraic transform only supports the left-sided operator")
        return algebraic_factorization(transform, mu, deg_y=deg, deg_t=deg)
    return aca_approximate(
        transform, mu, deg_y=deg, deg_t=deg, side=side,
        tol=aca_tol, max_rank=default_rank_cap(mu),
    )


def default_kernel(transform, mu: float, side: str = "left", aca_tol: float = 1e-15) -> LowRankKernel:
    """Kernel factorization under the degree and rank policy for this mu."""
    return _resolve_kernel(transform, mu, side, None, aca_tol)


def riesz_prefactor(mu: float) -> float:
    """1 / (2 cos(pi mu / 2)); blows up at odd integer orders."""
    if abs(mu / 2 - math.floor(mu / 2) - 0.5) < 1e-8 / math.pi:
        raise ValueError(f"riesz combination undefined near odd integer mu={mu}")
    return 1.0 / (2.0 * math.cos(math.pi * mu / 2))


def initial_moments(kernel: LowRankKernel, h: np.ndarray, side: str):
    """Closed forms of the first two moment columns, all kernel terms.

    phi_1^j is the plain g_j moment; phi_2^j is linear in y with slope
    from the (1 - t)-weighted moments and offset from the t-weighted ones
    (offset sign flips between sides).

    Args:
        kernel: separated kernel; g_coeffs has L + 1 rows.
        h: Chebyshev moments of t^mu, at least L + 2 of them.
        side: "left" or "right".

    Returns:
        (R1, R2): arrays of shape (1, r) and (2, r) of T-coefficients.
    """
    b = kernel.g_coeffs
    L = b.shape[0] - 1
    r = b.shape[1]
    if h.shape[0] < L + 2:
        raise ValueError(f"need at least {L + 2} moments, got {h.shape[0]}")
    bp = np.zeros((L + 3, r))
    bp[: L + 1] = b
    tilde = np.empty((L + 2, r))  # coefficients of t * g_j(t)
    tilde[0] = (2 * bp[0] + bp[1]) / 4
    tilde[1] = (2 * bp[0] + 2 * bp[1] + bp[2]) / 4
    l = np.arange(2, L + 2)
    tilde[2:] = (bp[l - 1] + 2 * bp[l] + bp[l + 1]) / 4
    h1 = h[: L + 1]
    h2 = h[: L + 2]
    R1 = (h1 @ b)[None, :]
    slope = 2 * (h2 @ (bp[: L + 2] - tilde))
    offset = 2 * (h2 @ tilde)
    if side == "left":
        offset = -offset
    elif side != "right":
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return R1, np.vstack([offset, slope])


def _ladder_diagonals(n: int, side: str):
    """Diagonals L0, L1, L2 (length n + 1) of the truncated coefficient
    operator acting on phi_{n+1}, and the recombination sign w."""
    i = np.arange(n + 1, dtype=float)
    L1 = i + 1
    if side == "left":
        # (1 + y) d/dy - n, expressed T -> U
        L0 = (i - n) / 2
        L0[0] = -n
        L2 = (n + i + 2) / 2
        w = -1.0
    else:
        # (1 - y) d/dy + n
        L0 = (n - i) / 2
        L0[0] = n
        L2 = -(n + i + 2) / 2
        w = 1.0
    return L0, L1, L2, w


def _ladder_rhs(Rprev: np.ndarray, Rcur: np.ndarray, n: int, side: str) -> np.ndarray:
    """U-coefficients of the ladder's right-hand side, rows 0..n."""
    r = Rcur.shape[1]
    rp = np.zeros((n + 3, r))
    rp[: Rprev.shape[0]] = Rprev
    rc = np.zeros((n + 3, r))
    rc[: Rcur.shape[0]] = Rcur
    i = np.arange(n + 1, dtype=float)
    P1 = (i + 1)[:, None]
    if side == "left":
        # (1 + y) d/dy + n on phi_{n-1}
        P0 = ((i + n) / 2)[:, None]
        P0[0] = n
        P2 = ((i + 2 - n) / 2)[:, None]
    else:
        # (1 - y) d/dy - n
        P0 = (-(i + n) / 2)[:, None]
        P0[0] = -n
        P2 = ((n - i - 2) / 2)[:, None]
    F = P0 * rp[: n + 1] + P1 * rp[1 : n + 2] + P2 * rp[2 : n + 3]
    # + 2n S phi_n
    s0 = np.full(n + 1, 0.5)
    s0[0] = 1.0
    F += 2 * n * (s0[:, None] * rc[: n + 1] - 0.5 * rc[2 : n + 3])
    return F


def recurrence_step(
    Rprev: np.ndarray, Rcur: np.ndarray, n: int, bv: np.ndarray, side: str
) -> np.ndarray:
    """Advance the moment ladder: phi_{n-1}, phi_n -> phi_{n+1}.

    Solves the truncated coefficient recurrence bordered by the endpoint
    condition phi_{n+1}(+1) = bv (left) or phi_{n+1}(-1) = bv (right).
    The recombination c_m = e_m + w e_{m+1} turns the dense boundary row
    into e_0 = bv exactly and leaves one banded solve of width (1, 2).

    Args:
        Rprev: (n-1, r) T-coefficients of phi_{n-1}.
        Rcur: (n, r) T-coefficients of phi_n.
        n: current index, >= 2.
        bv: (r,) boundary values of phi_{n+1}.
        side: "left" or "right".

    Returns:
        (n+1, r) T-coefficients of phi_{n+1}.
    """
    if n < 2:
        raise ValueError("recurrence starts at n = 2; use initial_moments")
    if Rprev.shape[0] != n - 1 or Rcur.shape[0] != n:
        raise ValueError("column lengths do not match n")
    L0, L1, L2, w = _ladder_diagonals(n, side)
    b = _ladder_rhs(Rprev, Rcur, n, side)
    bvv = np.atleast_1d(np.asarray(bv, dtype=float))
    b[0] -= bvv * L0[0]
    ab = np.zeros((4, n + 1))
    ab[0, 2:] = w * L2[:-2]
    ab[1, 1:] = L2[:-1] + w * L1[:-1]
    ab[2, :] = L1 + w * L0
    ab[3, :-1] = L0[1:]
    e = scipy.linalg.solve_banded((1, 2), ab, b)
    e = np.vstack([bvv, e])  # prepend the known e_0
    c = e.copy()
    c[:-1] += w * e[1:]
    return c[: n + 1]


@dataclass(frozen=True)
class MomentTable:
    """All moment columns phi_n^j up to a given order, kept in memory.

    columns[n] is the (n, r) coefficient array of the nth ladder entry
    (columns[0] is empty). Intended for moderate N and for tests; the
    production path streams columns straight into the operator matrix.
    """

    transform: object
    mu: float
    side: str
    kernel: LowRankKernel
    h: np.ndarray
    columns: list

    @property
    def order(self) -> int:
        return len(self.columns) - 1


def _moment_stream(transform, mu, size, side, kernel):
    """Yields (n, Rn) for n = 1..size, running tracker and ladder."""
    L = kernel.g_coeffs.shape[0] - 1
    h = moments_h(mu, L + 1)
    R1, R2 = initial_moments(kernel, h, side)
    rule = gauss_jacobi(rule_size_for(size + L), mu)
    tracker = BoundaryTracker(rule, kernel.g_values(rule.nodes), side)
    tracker.step()  # phi_1 endpoint value, known in closed form
    if size >= 1:
        yield 1, R1
    if size >= 2:
        tracker.step()
        yield 2, R2
    Rprev, Rcur = R1, R2
    for n in range(2, size):
        bv = tracker.step()
        Rnext = recurrence_step(Rprev, Rcur, n, bv, side)
        Rprev, Rcur = Rcur, Rnext
        yield n + 1, Rnext


def build_moment_table(
    transform,
    mu: float,
    size: int,
    side: str = "left",
    kernel: LowRankKernel | None = None,
    aca_tol: float = 1e-15,
) -> MomentTable:
    """Moment ladder up to phi_size, retained column by column."""
    if size < 1:
        raise ValueError("size must be >= 1")
    kernel = _resolve_kernel(transform, mu, side, kernel, aca_tol)
    L = kernel.g_coeffs.shape[0] - 1
    h = moments_h(mu, L + 1)
    r = kernel.rank
    columns = [np.zeros((0, r))]
    for _, Rn in _moment_stream(transform, mu, size, side, kernel):
        columns.append(Rn)
    return MomentTable(
        transform=transform, mu=mu, side=side, kernel=kernel, h=h, columns=columns
    )


def _edge_weights(kernel: LowRankKernel, side: str) -> np.ndarray:
    """T-coefficients of the prefactor (1 + y) sigma_j f_j(y) per term
    ((y - 1) sigma_j f_j(y) for the right side)."""
    edge = np.array([1.0, 1.0]) if side == "left" else np.array([-1.0, 1.0])
    W = np.zeros((kernel.f_coeffs.shape[0] + 1, kernel.rank))
    for j in range(kernel.rank):
        prod = npcheb.chebmul(edge, kernel.sigma[j] * kernel.f_coeffs[:, j])
        W[: prod.shape[0], j] = prod  # chebmul trims exact zeros
    return W


def _power_column(transform, mu: float, size: int, side: str) -> np.ndarray:
    """T-coefficients of (1 + psi)^mu (left) or (1 - psi)^mu (right)."""
    y = lobatto_points(size)
    sign = +1 if side == "left" else -1
    return values_to_coeffs(np.exp(mu * transform.log1pm_psi(y, sign)))


def _fold_onto(c: np.ndarray, size: int) -> np.ndarray:
    """Alias a T-coefficient vector onto the (size+1)-point Lobatto grid.

    T_k sampled at cos(pi m / size) coincides with T_r where r reflects
    k back into 0..size with period 2*size. Folding the exact product
    coefficients this way makes each assembled column the interpolant of
    a pointwise column sample, not its truncation; the two agree once
    the expansion has converged, but only the interpolant matches grid
    samples of the integral at every truncation size.
    """
    if size == 0:
        return np.atleast_1d(c.sum())
    if c.shape[0] <= size + 1:
        out = np.zeros(size + 1)
        out[: c.shape[0]] = c
        return out
    k = np.arange(c.shape[0]) % (2 * size)
    k = np.where(k > size, 2 * size - k, k)
    return np.bincount(k, weights=c, minlength=size + 1)


def _assemble_from_stream(transform, mu, size, side, kernel, stream) -> np.ndarray:
    A = np.zeros((size + 1, size + 1))
    pw = _power_column(transform, mu, size, side)
    W = _edge_weights(kernel, side)
    r = kernel.rank
    for n in range(size + 1):
        if side == "left" and n % 2 == 1:
            A[:, n] = -pw
        else:
            A[:, n] = pw
    for n, Rn in stream:
        full = np.zeros(W.shape[0] + n)
        for j in range(r):
            prod = npcheb.chebmul(W[:, j], Rn[:, j])
            full[: prod.shape[0]] += prod
        A[:, n] += n * _fold_onto(full, size)
    A /= math.gamma(1 + mu)
    return A


def band_profile(matrix: np.ndarray, rel_tol: float = 1e-13) -> tuple:
    """Smallest (lower, upper) bandwidths covering all entries above
    rel_tol * max|entry|. Measured, not assumed: the upper profile of
    these operators decays fast but is not exactly zero."""
    cut = rel_tol * np.max(np.abs(matrix))
    rows, cols = np.nonzero(np.abs(matrix) > cut)
    if rows.size == 0:
        return 0, 0
    d = rows - cols
    return int(max(d.max(), 0)), int(max(-d.min(), 0))


def assemble(table: MomentTable, size: int | None = None) -> np.ndarray:
    """Operator matrix from a retained moment table.

    Returns the (size+1) x (size+1) coefficient-space matrix of I^mu in
    the transplanted basis; size defaults to the table's order.
    """
    if size is None:
        size = table.order
    if size > table.order:
        raise ValueError(f"table only holds columns up to {table.order}")
    stream = ((n, table.columns[n]) for n in range(1, size + 1))
    return _assemble_from_stream(
        table.transform, table.mu, size, table.side, table.kernel, stream
    )


def build_operator(
    transform,
    mu: float,
    size: int,
    side: str = "left",
    kernel: LowRankKernel | None = None,
    aca_tol: float = 1e-15,
) -> np.ndarray:
    """Operator matrix of I^mu, streaming columns without retaining them.

    Identical output to assemble(build_moment_table(...)), but memory use
    stays O(size * rank) instead of O(size^2 * rank).
    """
    if size < 0:
        raise ValueError("size must be nonnegative")
    kernel = _resolve_kernel(transform, mu, side, kernel, aca_tol)
    stream = _moment_stream(transform, mu, size, side, kernel)
    return _assemble_from_stream(transform, mu, size, side, kernel, stream)


@dataclass(frozen=True)
class FIOApprox:
    """An assembled fractional integral operator.

    Attributes:
        transform: the change of variables the basis is built on.
        mu: operator order.
        side: "left", "right", or "riesz".
        matrix: (N+1) x (N+1) coefficient-space matrix.
        kernel_rank: separation rank used (total across sides for riesz).
        kernel_residual: relative sup-norm residual of the separation.
    """

    transform: object
    mu: float
    side: str
    matrix: np.ndarray
    kernel_rank: int
    kernel_residual: float
    lower_bandwidth: int
    upper_bandwidth: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0] - 1

    @classmethod
    def build(
        cls,
        transform,
        mu: float,
        size: int,
        side: str = "left",
        aca_tol: float = 1e-15,
    ) -> "FIOApprox":
        kernel = _resolve_kernel(transform, mu, side, None, aca_tol)
        matrix = build_operator(transform, mu, size, side, kernel=kernel)
        lo, up = band_profile(matrix)
        return cls(
            transform=transform,
            mu=mu,
            side=side,
            matrix=matrix,
            kernel_rank=kernel.rank,
            kernel_residual=kernel.residual,
            lower_bandwidth=lo,
            upper_bandwidth=up,
        )

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs)
        if c.shape[0] > self.size + 1:
            raise ValueError("coefficient vector longer than the operator")
        if c.shape[0] < self.size + 1:
            c = np.concatenate([c, np.zeros(self.size + 1 - c.shape[0], dtype=c.dtype)])
        return self.matrix @ c


def build_riesz(
    transform, mu: float, size: int, aca_tol: float = 1e-15
) -> FIOApprox:
    """The symmetric combination (I^mu_left + I^mu_right)/(2 cos(pi mu/2)).

    Undefined at odd integer mu where the cosine vanishes.
    """
    pref = riesz_prefactor(mu)
    left = FIOApprox.build(transform, mu, size, "left", aca_tol)
    right = FIOApprox.build(transform, mu, size, "right", aca_tol)
    matrix = (left.matrix + right.matrix) * pref
    lo, up = band_profile(matrix)
    return FIOApprox(
        transform=transform,
        mu=mu,
        side="riesz",
        matrix=matrix,
        kernel_rank=left.kernel_rank + right.kernel_rank,
        kernel_residual=max(left.kernel_residual, right.kernel_residual),
        lower_bandwidth=lo,
        upper_bandwidth=up,
    )
