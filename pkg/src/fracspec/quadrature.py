"""Gauss-Jacobi rules on (0, 1) with weight t^mu, and the singular
integrals built from them.

Everything the operator construction integrates has the form
t^mu * (polynomial in t), so one Jacobi rule of sufficient degree,
built once per (mu, size), serves all columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

__all__ = [
    "JacobiRule",
    "BoundaryTracker",
    "gauss_jacobi",
    "moments_h",
    "boundary_value",
]


@dataclass(frozen=True)
class JacobiRule:
    """Nodes and weights for integrals t^mu f(t) dt over (0, 1).

    The weight function is folded into `weights`: sum(w_i f(t_i))
    approximates the weighted integral, exactly when f is a polynomial of
    degree < 2 len(nodes).
    """

    mu: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, fvals: np.ndarray) -> float:
        return float(np.dot(self.weights, fvals))


def gauss_jacobi(n: int, mu: float) -> JacobiRule:
    """Size-n rule for t^mu-weighted integrals on (0, 1).

    Built from the symmetric-eigenvalue Jacobi rule on [-1, 1] with weight
    (1 + x)^mu, mapped by t = (1 + x)/2.
    """
    if n < 1:
        raise ValueError("need n >= 1 nodes")
    if mu <= -1:
        raise ValueError("mu must exceed -1")
    x, w = scipy.special.roots_jacobi(n, 0.0, mu)
    return JacobiRule(mu=mu, nodes=(1 + x) / 2, weights=w / 2 ** (mu + 1))


def moments_h(mu: float, lmax: int) -> np.ndarray:
    """Moments h_l = integral of t^mu T_l(2t - 1) over (0, 1), l = 0..lmax."""
    if lmax < 0:
        raise ValueError("lmax must be nonnegative")
    rule = gauss_jacobi(max(lmax // 2 + 1, 1), mu)
    s = 2 * rule.nodes - 1
    h = np.empty(lmax + 1)
    tprev = np.ones_like(s)
    h[0] = rule.weights.sum()
    if lmax >= 1:
        tcur = s.copy()
        h[1] = rule.integrate(tcur)
        for l in range(2, lmax + 1):
            tprev, tcur = tcur, 2 * s * tcur - tprev
            h[l] = rule.integrate(tcur)
    return h


def _side_sign(side: str) -> float:
    if side == "left":
        return -1.0
    if side == "right":
        return 1.0
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def boundary_value(rule: JacobiRule, g_nodes: np.ndarray, n: int, side: str) -> float:
    """Endpoint integral of column n + 1.

    Computes integral of t^mu U_n(a(t)) g(t) dt with a(t) = 1 - 2t for the
    left-sided operator (boundary y = +1) and a(t) = 2t - 1 for the
    right-sided one (boundary y = -1). g is passed by its values at
    rule.nodes.

    One-shot evaluation; the column loop uses BoundaryTracker, which costs
    O(size) per step instead of O(n size).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    s = _side_sign(side) * (2 * rule.nodes - 1)
    uprev = np.ones_like(s)
    ucur = 2 * s
    if n == 0:
        u = uprev
    elif n == 1:
        u = ucur
    else:
        for _ in range(n - 1):
            uprev, ucur = ucur, 2 * s * ucur - uprev
        u = ucur
    return float(np.dot(rule.weights * np.asarray(g_nodes), u))


class BoundaryTracker:
    """Streams boundary_value(rule, g, n, side) for n = 0, 1, 2, ...

    Holds the two-term second-kind recurrence state at the rule nodes, so
    each step is one fused multiply over the nodes. g_nodes may be a
    (size, r) matrix of r different g factors; step() then returns the r
    boundary values together.
    """

    def __init__(self, rule: JacobiRule, g_nodes: np.ndarray, side: str):
        self._s = _side_sign(side) * (2 * rule.nodes - 1)
        g = np.asarray(g_nodes)
        w = rule.weights if g.ndim == 1 else rule.weights[:, None]
        self._wg = w * g
        self._scalar = g.ndim == 1
        self._uprev = np.ones_like(self._s)  # U_0
        self._ucur = 2 * self._s  # U_1
        self._n = 0

    @property
    def n(self) -> int:
        """Index of the value the next step() call returns."""
        return self._n

    def step(self):
        if self._n == 0:
            u = self._uprev
        elif self._n == 1:
            u = self._ucur
        else:
            self._uprev, self._ucur = (
                self._ucur,
                2 * self._s * self._ucur - self._uprev,
            )
            u = self._ucur
        self._n += 1
        out = u @ self._wg
        return float(out) if self._scalar else out


def rule_size_for(degree: int) -> int:
    """Node count that integrates t^mu * (polynomial of this degree)
    exactly, with headroom for the near-polynomial factors the kernel
    approximation introduces."""
    return max(4, math.ceil(1.1 * (degree + 1) / 2) + 4)
