"""Drivers built on the operator matrices: equation solving and spectra.

solve_fie assembles sum_l mult(a_l) I^{mu_l} mult(b_l) against a declared
right-hand side and doubles the truncation until consecutive solutions
stop moving on a fixed evaluation grid. solve_fde_airy reformulates a
two-point fractional boundary value problem through an integral ansatz so
that no derivative matrix is ever formed. solve_eigen locates operator
eigenvalues with a plateau test across truncations. pseudospectra maps
inverse resolvent norms over a complex grid by Lanczos iteration in which
every operator application is itself a pair of equation solves.

Data (right-hand sides, variable coefficients) may be declared as plain
callables of x, but anything with an endpoint power factor should use
EndpointPower or GridFunction instead: near a saturated endpoint the
physical coordinate has already rounded to +-1 and a callable of x cannot
recover the lost distance, while the transform's log1pm_psi still can.
"""

from __future__ import annotations

import math
import numbers
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
import scipy.linalg
from scipy.linalg import lu_factor, lu_solve
from scipy.special import gamma as gamma_fn

from .chebcore import ChebSeries, clenshaw_eval, lobatto_points, values_to_coeffs
from .fio import build_operator, default_kernel, riesz_prefactor
from .opalgebra import (
    BorderedSystem,
    CoeffOperator,
    boundary_row,
    mult_operator,
    solve_bordered,
)
from .transform import (
    AlgebraicTransform,
    DoubleExpTransform,
    select_omega,
    tcp_eval,
)

__all__ = [
    "AirySolution",
    "ConvergenceError",
    "EigenResult",
    "EndpointPower",
    "GridFunction",
    "OperatorTerm",
    "ProblemSpec",
    "PseudospectraJob",
    "PseudospectraResult",
    "Solution",
    "TruncationPolicy",
    "data_coeffs",
    "data_values",
    "eigen_theta",
    "gram_matrix",
    "inverse_resolvent_norm",
    "pseudospectra",
    "solve_eigen",
    "solve_fde_airy",
    "solve_fie",
]

_SIDES = ("left", "right", "riesz")

# Consecutive solutions are compared on this many equispaced physical
# points; a fixed grid keeps the Cauchy record comparable across sizes.
_CAUCHY_POINTS = 1000


class ConvergenceError(RuntimeError):
    """Refinement exhausted the truncation budget; carries the record."""

    def __init__(self, message: str, history, residual_history=()):
        super().__init__(message)
        self.history = tuple(history)
        self.residual_history = tuple(residual_history)


# ---------------------------------------------------------------------------
# data declarations


@dataclass(frozen=True)
class EndpointPower:
    """scale * (1+x)^p * (1-x)^q * smooth(x).

    The power factors are evaluated through the transform's log1pm_psi,
    so they stay accurate arbitrarily deep into the endpoint saturation
    region. smooth, if given, is an ordinary callable of x.
    """

    p: float = 0.0
    q: float = 0.0
    scale: complex = 1.0
    smooth: Callable | None = None

    def values_on_grid(self, transform, y) -> np.ndarray:
        yv = np.asarray(y, dtype=float)
        logw = np.zeros_like(yv)
        # skipped when zero: 0 * log(0) would poison algebraic maps
        if self.p:
            logw = logw + self.p * transform.log1pm_psi(yv, +1)
        if self.q:
            logw = logw + self.q * transform.log1pm_psi(yv, -1)
        out = self.scale * np.exp(logw)
        if self.smooth is not None:
            out = out * np.asarray(self.smooth(transform.forward(yv)))
        return out


@dataclass(frozen=True)
class GridFunction:
    """Data rendered by fn(transform, y) on the computational grid.

    For closed forms that need endpoint-aware evaluation beyond a single
    power factor (logarithmic terms and the like).
    """

    fn: Callable

    def values_on_grid(self, transform, y) -> np.ndarray:
        return np.asarray(self.fn(transform, y))


def data_values(data, transform, y) -> np.ndarray:
    """Evaluate a declared coefficient or right-hand side at grid points y.

    Accepts None (unity), scalars, callables of x, objects exposing
    values_on_grid, and sequences of any of these (summed).
    """
    yv = np.asarray(y, dtype=float)
    if data is None:
        return np.ones_like(yv)
    if isinstance(data, numbers.Number):
        return np.full(yv.shape, data)
    if hasattr(data, "values_on_grid"):
        return np.asarray(data.values_on_grid(transform, yv))
    if isinstance(data, (list, tuple)):
        if not data:
            raise ValueError("empty data sequence")
        total = data_values(data[0], transform, yv)
        for atom in data[1:]:
            total = total + data_values(atom, transform, yv)
        return total
    if callable(data):
        vals = np.asarray(data(transform.forward(yv)))
        if vals.shape != yv.shape:
            raise ValueError("callable data must return one value per point")
        return vals
    raise TypeError(f"cannot interpret data of type {type(data).__name__}")


def data_coeffs(data, transform, n: int) -> np.ndarray:
    """TCP coefficients 0..n of declared data."""
    vals = data_values(data, transform, lobatto_points(n))
    return values_to_coeffs(vals)


# ---------------------------------------------------------------------------
# problem declarations


@dataclass(frozen=True)
class TruncationPolicy:
    """Size ladder and stopping rule for the refinement loops."""

    n_start: int = 64
    n_max: int = 4096
    tol: float = 1e-13

    def __post_init__(self):
        if not 2 <= self.n_start <= self.n_max:
            raise ValueError("need 2 <= n_start <= n_max")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def ladder(self) -> Iterator[int]:
        n = self.n_start
        while True:
            yield n
            if n >= self.n_max:
                return
            n = min(2 * n, self.n_max)


@dataclass(frozen=True)
class OperatorTerm:
    """One summand a(x) * I^order_side[b(.) u](x); order 0 is the identity."""

    order: float = 0.0
    side: str = "left"
    outer: object = None
    inner: object = None

    def __post_init__(self):
        if not self.order >= 0:
            raise ValueError("order must be nonnegative")
        if self.side not in _SIDES:
            raise ValueError(f"side must be one of {_SIDES}, got {self.side!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """A fractional integral equation sum_l a_l I^{mu_l}[b_l u] = f.

    gamma declares the weakest endpoint exponent present anywhere in the
    problem (solution included); it fixes the transform and is never
    guessed. An explicit omega overrides the choice derived from gamma.
    """

    terms: tuple
    rhs: object
    gamma: float
    scale: float = 1.0
    transform_kind: str = "de"
    omega: float | None = None
    beta: float | None = None
    aca_tol: float = 1e-15
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("need at least one term")
        for t in terms:
            if not isinstance(t, OperatorTerm):
                raise TypeError("terms must be OperatorTerm instances")
        object.__setattr__(self, "terms", terms)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.transform_kind not in ("de", "algebraic"):
            raise ValueError(f"unknown transform kind {self.transform_kind!r}")
        if self.transform_kind == "algebraic" and self.beta is None:
            raise ValueError("the algebraic transform needs beta")

    def make_transform(self):
        if self.transform_kind == "algebraic":
            return AlgebraicTransform(self.beta)
        if self.omega is not None:
            return DoubleExpTransform(self.omega)
        return DoubleExpTransform(select_omega(self.gamma, self.scale))


@dataclass(frozen=True)
class Solution:
    """A solved equation: TCP coefficients plus the refinement record.

    cauchy_history pairs (n, error) starting at the second rung;
    residual_history pairs (n, residual) for every rung visited.
    """

    coeffs: ChebSeries
    transform: object
    n_final: int
    cauchy_history: tuple
    residual: float
    rcond: float
    residual_history: tuple = ()

    def __call__(self, x):
        return tcp_eval(self.coeffs, self.transform, x)


@dataclass(frozen=True)
class AirySolution(Solution):
    """Solution of the fractional Airy problem; u = I^{3/2}[v] + a(1+x)."""

    constant: complex = 0.0


# ---------------------------------------------------------------------------
# operator assembly


class _OperatorFactory:
    """Builds operator matrices, reusing kernel factorizations.

    The separation of the kernel is independent of the truncation, so a
    refinement ladder pays for ACA once per (mu, side). Matrices are not
    cached: at large sizes they dominate memory and each driver uses a
    given size only once.
    """

    def __init__(self, transform, aca_tol: float = 1e-15):
        self.transform = transform
        self.aca_tol = aca_tol
        self._kernels: dict = {}

    def kernel(self, mu: float, side: str):
        key = (mu, side)
        if key not in self._kernels:
            self._kernels[key] = default_kernel(self.transform, mu, side, self.aca_tol)
        return self._kernels[key]

    def matrix(self, mu: float, side: str, n: int) -> np.ndarray:
        if side == "riesz":
            pref = riesz_prefactor(mu)
            return pref * (self.matrix(mu, "left", n) + self.matrix(mu, "right", n))
        return build_operator(self.transform, mu, n, side, kernel=self.kernel(mu, side))


def _term_matrix(term: OperatorTerm, transform, factory: _OperatorFactory, n: int) -> np.ndarray:
    if term.order == 0:
        core = np.eye(n + 1)
    else:
        core = factory.matrix(term.order, term.side, n)
    if term.inner is not None:
        core = core @ mult_operator(data_coeffs(term.inner, transform, n), n).matrix
    if term.outer is not None:
        core = mult_operator(data_coeffs(term.outer, transform, n), n).matrix @ core
    return core


def _assemble_fie(spec: ProblemSpec, transform, factory: _OperatorFactory, n: int):
    total = None
    for term in spec.terms:
        part = _term_matrix(term, transform, factory, n)
        total = part if total is None else total + part
    rhs = data_coeffs(spec.rhs, transform, n)
    return total, rhs


def _cauchy_grid(transform) -> np.ndarray:
    return transform.inverse(np.linspace(-1.0, 1.0, _CAUCHY_POINTS))


def solve_fie(spec: ProblemSpec) -> Solution:
    """Solve the declared equation, doubling N until the solution settles.

    The Cauchy error is the max-norm difference of consecutive solutions
    on 1000 equispaced physical points. Raises ConvergenceError (with the
    history attached) if the budget runs out first.
    """
    transform = spec.make_transform()
    factory = _OperatorFactory(transform, spec.aca_tol)
    yg = _cauchy_grid(transform)
    history = []
    residuals = []
    prev = None
    for n in spec.policy.ladder():
        matrix, rhs = _assemble_fie(spec, transform, factory, n)
        sol = solve_bordered(BorderedSystem(core=CoeffOperator.wrap(matrix), rhs=rhs))
        residuals.append((n, sol.residual))
        vals = clenshaw_eval(sol.coeffs, yg)
        if prev is not None:
            err = float(np.max(np.abs(vals - prev)))
            history.append((n, err))
            if err <= spec.policy.tol:
                return Solution(
                    coeffs=ChebSeries(sol.coeffs),
                    transform=transform,
                    n_final=n,
                    cauchy_history=tuple(history),
                    residual=sol.residual,
                    rcond=sol.rcond,
                    residual_history=tuple(residuals),
                )
        prev = vals
    raise ConvergenceError(
        f"no Cauchy plateau at tol={spec.policy.tol:g} within N={spec.policy.n_max}",
        history,
        residuals,
    )


# ---------------------------------------------------------------------------
# fractional Airy boundary value problem

# i^{3/2} on the principal branch
_I_THREE_HALVES = complex(math.cos(0.75 * math.pi), math.sin(0.75 * math.pi))


def solve_fde_airy(
    epsilon: float,
    policy: TruncationPolicy | None = None,
    variant: str = "rl",
) -> AirySolution:
    """eps i^{3/2} D^{3/2} u - x u = 0, u(-1) = 0, u(1) = 1.

    The ansatz u = I^{3/2}[v] + a(1+x) meets the left boundary condition
    identically and turns the derivative into the identity on v. The
    remaining equation, multiplied through by sqrt(1+x) to clear the
    derivative of the linear part, couples v and the constant a in one
    bordered system per truncation:

        [eps i^{3/2} M1 - M2 A] v + a g = 0,    B A v + 2 a = 1,

    with M1 = mult(sqrt(1+x)), M2 = mult(x sqrt(1+x)), A the order-3/2
    left integral, B evaluation at x = 1, and g the expansion of
    eps i^{3/2}/Gamma(1/2) - x (1+x)^{3/2}.

    variant chooses the fractional derivative acting on the linear part
    of the ansatz: "rl" differentiates (1+x) to (1+x)^{-1/2}/Gamma(1/2)
    (the constant atom of g above), "caputo" annihilates it, dropping
    that atom. The I^{3/2}[v] part is an exact image either way.

    The map is pitched for gamma = 3/2, the weakest fractional exponent
    the ansatz produces, which also keeps the sqrt(1+x) weight from
    underflowing over the left saturation region. The weight still
    bottoms out near 1e-8, below the default conditioning gate, so that
    gate is waived for this driver.

    A caution on accuracy: with the Riemann-Liouville derivative the
    true solution carries a (1+x)^{1/2} mode that no pair (v, a) with
    integrable v can reproduce, since I^{3/2} maps integrable data to
    exponents strictly above 1/2 and the derivative of a(1+x) only
    contributes the g column above. The mode's amplitude shrinks as eps
    does, but slowly: measured ladders floor near 5e-2 at eps = 1, 1e-3
    at 1e-2, and 2e-5 at 1e-4, the last once N reaches the 4096 needed
    to resolve the eps^{-2/3}-scale oscillation. The coefficient norm
    of v blows up as the solve chases the missing mode, and no
    desk-scale eps reaches the rounding floor; the caputo variant,
    which drops the offending atom, does. The ladder reports whatever
    decay is achieved; callers should budget the tolerance accordingly.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if variant not in ("rl", "caputo"):
        raise ValueError(f"variant must be 'rl' or 'caputo', got {variant!r}")
    policy = policy or TruncationPolicy()
    transform = DoubleExpTransform(select_omega(1.5))
    factory = _OperatorFactory(transform)
    yg = _cauchy_grid(transform)
    scale = epsilon * _I_THREE_HALVES
    g_atoms = (
        EndpointPower(scale=scale / gamma_fn(0.5)),
        EndpointPower(p=1.5, scale=-1.0, smooth=lambda x: x),
    )
    if variant == "caputo":
        g_atoms = g_atoms[1:]
    history = []
    residuals = []
    prev = None
    for n in policy.ladder():
        A = factory.matrix(1.5, "left", n)
        M1 = mult_operator(data_coeffs(EndpointPower(p=0.5), transform, n), n).matrix
        M2 = mult_operator(
            data_coeffs(EndpointPower(p=0.5, smooth=lambda x: x), transform, n), n
        ).matrix
        g = data_coeffs(g_atoms, transform, n)
        brow = boundary_row(+1, n).after(CoeffOperator.wrap(A))
        system = BorderedSystem(
            core=CoeffOperator.wrap(scale * M1 - M2 @ A),
            rhs=np.zeros(n + 1),
            cols=g[:, None],
            rows=brow[None, :],
            corner=np.array([[2.0]]),
            rhs_border=np.array([1.0]),
        )
        sol = solve_bordered(system, rcond_floor=0.0)
        residuals.append((n, sol.residual))
        a = sol.border[0]
        onepx = data_coeffs(EndpointPower(p=1.0), transform, n)
        u = A @ sol.coeffs + a * onepx
        vals = clenshaw_eval(u, yg)
        if prev is not None:
            err = float(np.max(np.abs(vals - prev)))
            history.append((n, err))
            if err <= policy.tol:
                return AirySolution(
                    coeffs=ChebSeries(u),
                    transform=transform,
                    n_final=n,
                    cauchy_history=tuple(history),
                    residual=sol.residual,
                    rcond=sol.rcond,
                    residual_history=tuple(residuals),
                    constant=a,
                )
        prev = vals
    raise ConvergenceError(
        f"fractional Airy run at eps={epsilon:g} did not settle within N={policy.n_max}",
        history,
        residuals,
    )


# ---------------------------------------------------------------------------
# eigenvalue problem


def eigen_theta(mu1: float, mu2: float) -> float:
    """Boundary coupling constant Gamma(mu1-mu2)/Gamma(mu1) 2^{1+mu2-mu1}."""
    return gamma_fn(mu1 - mu2) / gamma_fn(mu1) * 2.0 ** (1.0 + mu2 - mu1)


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues lambda = 1/rho with coefficient vectors and the record.

    eigenvalues hold one representative per conjugate pair (imag >= 0),
    sorted by modulus; vectors are the matching unit coefficient columns.
    """

    eigenvalues: np.ndarray
    rhos: np.ndarray
    vectors: np.ndarray
    transform: object
    n_final: int
    plateau_history: tuple
    residuals: np.ndarray


def _collapse_pairs(lams: np.ndarray, vecs: np.ndarray, k: int):
    """Representatives of the k smallest-|lambda| conjugate classes."""
    order = np.argsort(np.abs(lams), kind="stable")
    used = np.zeros(lams.shape[0], dtype=bool)
    reps: list = []
    cols: list = []
    for idx in order:
        if used[idx]:
            continue
        used[idx] = True
        lam = lams[idx]
        vec = vecs[:, idx]
        if abs(lam.imag) > 1e-8 * abs(lam):
            free = np.flatnonzero(~used)
            if free.size:
                j = free[np.argmin(np.abs(lams[free] - np.conj(lam)))]
                if abs(lams[j] - np.conj(lam)) <= 1e-6 * abs(lam):
                    used[j] = True
            if lam.imag < 0:
                lam = np.conj(lam)
                vec = np.conj(vec)
        reps.append(lam)
        cols.append(vec)
        if len(reps) == k:
            break
    return np.array(reps), np.column_stack(cols)


def _normalize_columns(vecs: np.ndarray) -> np.ndarray:
    out = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    # fix the phase so reruns and conjugate collapses agree
    lead = np.take_along_axis(out, np.argmax(np.abs(out), axis=0)[None, :], axis=0)
    return out * np.exp(-1j * np.angle(lead))


def solve_eigen(
    mu1: float,
    mu2: float,
    k: int = 6,
    policy: TruncationPolicy | None = None,
    plateau_tol: float = 1e-10,
    tail_tol: float = 1e-12,
) -> EigenResult:
    """k smallest-modulus eigenvalues of the two-term fractional problem.

    The differential problem integrates to u = lambda E[u] with
    E = theta vhat (B A1) - A2, where A1 and A2 are left integrals of
    orders mu1-mu2 and mu1, vhat expands (1+x)^{mu1-1}, and B evaluates
    at x = 1. Dense eigensolves at doubling truncations are accepted once
    consecutive eigenvalue sets agree in 2-norm and every returned
    coefficient column has a clean tail.
    """
    ell = math.floor(mu1) + 1
    if not (0 <= mu2 < ell - 1 < mu1 < ell):
        raise ValueError("need 0 <= mu2 < ell-1 < mu1 < ell with ell = ceil(mu1)")
    if k < 1:
        raise ValueError("k must be positive")
    policy = policy or TruncationPolicy()
    transform = DoubleExpTransform(select_omega(min(mu1 - 1.0, mu1 - mu2)))
    factory = _OperatorFactory(transform)
    th = eigen_theta(mu1, mu2)
    history = []
    prev = None
    for n in policy.ladder():
        A1 = factory.matrix(mu1 - mu2, "left", n)
        A2 = factory.matrix(mu1, "left", n)
        vhat = data_coeffs(EndpointPower(p=mu1 - 1.0), transform, n)
        E = th * np.outer(vhat, boundary_row(+1, n).row @ A1) - A2
        rho_all, vec_all = scipy.linalg.eig(E)
        with np.errstate(divide="ignore"):
            lam_all = 1.0 / rho_all
        lams, cols = _collapse_pairs(lam_all, vec_all, k)
        if prev is not None:
            diff = float(np.linalg.norm(lams - prev) / np.linalg.norm(lams))
            history.append((n, diff))
            tails_ok = all(
                np.max(np.abs(c[-max(1, (n + 1) // 10):])) < tail_tol * np.linalg.norm(c)
                for c in cols.T
            )
            if diff <= plateau_tol and tails_ok:
                cols = _normalize_columns(cols)
                rhos = 1.0 / lams
                resid = np.array([
                    np.linalg.norm(E @ c - r * c) / abs(r)
                    for r, c in zip(rhos, cols.T)
                ])
                return EigenResult(
                    eigenvalues=lams,
                    rhos=rhos,
                    vectors=cols,
                    transform=transform,
                    n_final=n,
                    plateau_history=tuple(history),
                    residuals=resid,
                )
        prev = lams
    raise ConvergenceError(
        f"eigenvalues did not plateau within N={policy.n_max}", history
    )


# ---------------------------------------------------------------------------
# pseudospectra


def gram_matrix(transform, n: int, pad: int = 80) -> np.ndarray:
    """Gram matrix of the TCP basis in L2 of the mapped unit interval.

    G_jk = (1/2) int T_j(y) T_k(y) psi'(y) dy; the analytic weight decays
    double-exponentially at the ends, so Gauss-Legendre with a margin of
    pad nodes over the polynomial degree resolves it to rounding.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n + 1 + pad)
    w = 0.5 * weights * transform.deriv(nodes)
    V = np.polynomial.chebyshev.chebvander(nodes, n)
    G = V.T @ (w[:, None] * V)
    return 0.5 * (G + G.T)


@dataclass(frozen=True)
class PseudospectraJob:
    """Inverse-resolvent-norm map of the order-mu derivative on [0, 1].

    Values are 1/||R(z)|| in the L2(0,1) norm at each grid point, all
    computed at one truncation n. A per-point adaptive ladder would be
    wasted here: over most of the interesting region the values sit at
    the rounding floor, where relative settling between truncations
    never triggers.
    """

    re_range: tuple = (-2.0, 12.0)
    im_range: tuple = (-7.0, 7.0)
    re_count: int = 141
    im_count: int = 141
    mu: float = 0.5
    n: int = 256
    max_iters: int = 200
    ritz_tol: float = 1e-8

    def __post_init__(self):
        if not (0 < self.mu < 1):
            raise ValueError("mu must lie in (0, 1)")
        if self.re_count < 1 or self.im_count < 1:
            raise ValueError("grid counts must be positive")
        for lo, hi in (self.re_range, self.im_range):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError("grid ranges must be finite and ordered")
        if self.n < 8:
            raise ValueError("truncation n must be at least 8")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.ritz_tol > 0:
            raise ValueError("ritz_tol must be positive")

    def re_axis(self) -> np.ndarray:
        return np.linspace(self.re_range[0], self.re_range[1], self.re_count)

    def im_axis(self) -> np.ndarray:
        return np.linspace(self.im_range[0], self.im_range[1], self.im_count)


@dataclass(frozen=True)
class PseudospectraResult:
    re: np.ndarray
    im: np.ndarray
    sigma: np.ndarray
    flagged: tuple


@dataclass(frozen=True)
class _Level:
    """Shared per-truncation operators for one pseudospectra job.

    The Gram matrix of the basis is numerically semi-definite: high
    degrees differ only where the mapped weight is double-exponentially
    small. Lanczos iterates are therefore kept in coordinates of the
    resolvable Gram eigenspace, where the inner product is Euclidean;
    lift/restrict move between those coordinates and coefficients.
    """

    n: int
    left: np.ndarray
    right: np.ndarray
    lift: np.ndarray
    restrict: np.ndarray


def _build_level(transform, factory: _OperatorFactory, mu: float, n: int) -> _Level:
    # the physical domain is [0, 1]: halving the interval scales I^mu by 2^-mu
    s = 2.0 ** (-mu)
    d, V = np.linalg.eigh(gram_matrix(transform, n))
    keep = d > 1e-14 * d[-1]
    root = np.sqrt(d[keep])
    return _Level(
        n=n,
        left=s * factory.matrix(mu, "left", n),
        right=s * factory.matrix(mu, "right", n),
        lift=V[:, keep] / root,
        restrict=(V[:, keep] * root).T,
    )


def _lanczos_lambda_max(apply_H, dim: int, start: np.ndarray,
                        max_iters: int, ritz_tol: float):
    """Largest eigenvalue of a self-adjoint positive operator.

    Lanczos with two-pass full reorthogonalization. Convergence is
    judged by the residual bound beta_k |s_k| of the top Ritz pair, not
    by Ritz-value increments: during a plateau the increments dip under
    any threshold while the value is still far from converged. Returns
    (lambda_max, converged).
    """
    iters = min(max_iters, dim)
    Q = np.empty((dim, iters + 1), dtype=complex)
    q = start.astype(complex)
    q /= np.linalg.norm(q)
    Q[:, 0] = q
    alphas: list = []
    betas: list = []
    lam = None
    for it in range(iters):
        w = apply_H(Q[:, it])
        basis = Q[:, : it + 1]
        h = basis.conj().T @ w
        w = w - basis @ h
        h2 = basis.conj().T @ w
        w = w - basis @ h2
        alphas.append(float(np.real(h[-1] + h2[-1])))
        if betas:
            vals, vecs = scipy.linalg.eigh_tridiagonal(
                alphas, betas, select="i", select_range=(it, it)
            )
            lam, bottom = float(vals[0]), float(abs(vecs[-1, 0]))
        else:
            lam, bottom = alphas[0], 1.0
        beta2 = float(np.real(np.conj(w) @ w))
        beta = math.sqrt(beta2) if beta2 > 0 else 0.0
        if beta * bottom <= ritz_tol * abs(lam):
            return lam, True
        betas.append(beta)
        Q[:, it + 1] = w / beta
    return lam, False


def _point_seed(z: complex) -> int:
    # conjugate-invariant so mirrored points run the mirrored iteration;
    # + 0.0 canonicalizes any negative zero
    key = np.array([round(z.real, 12) + 0.0, round(abs(z.imag), 12) + 0.0])
    return zlib.crc32(key.tobytes())


def _sigma_at_level(z: complex, level: _Level, max_iters: int, ritz_tol: float):
    n1 = level.n + 1
    lu_l = lu_factor(z * level.left - np.eye(n1))
    lu_r = lu_factor(np.conj(z) * level.right - np.eye(n1))

    def apply_K(c):
        # R*R via the two reformulated systems in sequence
        u = level.lift @ c
        v = lu_solve(lu_l, level.left @ u)
        w = lu_solve(lu_r, level.right @ v)
        return level.restrict @ w

    def apply_K_adj(c):
        a = level.restrict.T @ c
        b = level.right.T @ lu_solve(lu_r, a, trans=2)
        d = level.left.T @ lu_solve(lu_l, b, trans=2)
        return level.lift.T @ d

    def apply_H(c):
        # the continuum operator is self-adjoint; the truncated product
        # is not quite, and Lanczos errs at first order in that defect,
        # so average with the exact adjoint of the composed map
        return 0.5 * (apply_K(c) + apply_K_adj(c))

    dim = level.lift.shape[1]
    rng = np.random.default_rng(_point_seed(z))
    start = rng.standard_normal(dim)
    lam, ok = _lanczos_lambda_max(apply_H, dim, start, max_iters, ritz_tol)
    if lam is None or not np.isfinite(lam) or lam <= 0:
        raise ArithmeticError(f"Lanczos broke down at z={z}")
    return 1.0 / math.sqrt(lam), ok


def inverse_resolvent_norm(
    z: complex,
    transform,
    n: int,
    mu: float = 0.5,
    max_iters: int = 200,
    ritz_tol: float = 1e-8,
    _level: _Level | None = None,
) -> float:
    """1/||R(z)|| of the order-mu derivative on [0, 1] at one truncation."""
    if _level is None:
        _level = _build_level(transform, _OperatorFactory(transform), mu, n)
    sigma, _ = _sigma_at_level(complex(z), _level, max_iters, ritz_tol)
    return sigma


def pseudospectra(job: PseudospectraJob, workers: int = 1) -> PseudospectraResult:
    """Map 1/||R(z)|| over the job's grid.

    Points whose inner iteration breaks down are flagged and left as
    NaN; the rest of the grid still completes. Seeding depends only on
    the grid point, never on visit order, so identical jobs reproduce
    identical grids and conjugate points run mirrored iterations. Grid
    points are independent; workers > 1 maps them over a thread pool
    (the factorizations release the interpreter lock) with results
    written by index, so the output does not depend on scheduling.
    """
    if workers < 1:
        raise ValueError("workers must be positive")
    transform = DoubleExpTransform(select_omega(job.mu))
    level = _build_level(transform, _OperatorFactory(transform), job.mu, job.n)
    re = job.re_axis()
    im = job.im_axis()
    sigma = np.full((job.im_count, job.re_count), np.nan)
    flagged: list = []

    def run_point(i: int, j: int) -> None:
        try:
            sigma[i, j] = _sigma_at_level(
                complex(re[j], im[i]), level, job.max_iters, job.ritz_tol
            )[0]
        except (ArithmeticError, ValueError, scipy.linalg.LinAlgError):
            flagged.append((i, j))

    points = [(i, j) for i in range(job.im_count) for j in range(job.re_count)]
    if workers == 1:
        for i, j in points:
            run_point(i, j)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(run_point, i, j) for i, j in points]:
                fut.result()
    return PseudospectraResult(re=re, im=im, sigma=sigma, flagged=tuple(sorted(flagged)))
