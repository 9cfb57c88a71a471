"""Chebyshev series utilities on the Lobatto grid.

Coefficient vectors are indexed by degree. Grid values live on the
descending second-kind Chebyshev points y_k = cos(k*pi/N), k = 0..N,
so y[0] = +1 and y[N] = -1. Under that ordering the value<->coefficient
maps are plain type-1 cosine transforms with no sign twiddles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse as sp

__all__ = [
    "ChebSeries",
    "UltraOps",
    "lobatto_points",
    "values_to_coeffs",
    "coeffs_to_values",
    "clenshaw_eval",
    "build_ultra_ops",
]


def lobatto_points(n: int) -> np.ndarray:
    """Points cos(k*pi/n), k = 0..n, descending from +1 to -1."""
    if n < 1:
        raise ValueError("lobatto_points needs n >= 1")
    return np.cos(np.arange(n + 1) * (np.pi / n))


def values_to_coeffs(values: np.ndarray) -> np.ndarray:
    """First-kind coefficients of the interpolant through Lobatto samples.

    Args:
        values: samples at lobatto_points(N), length N + 1 along axis 0.
            Trailing axes are transformed independently.

    Returns:
        Coefficient array of the same shape; entry k multiplies T_k.
    """
    v = np.asarray(values)
    n = v.shape[0] - 1
    if n == 0:
        return v.astype(np.result_type(v.dtype, np.float64))
    c = scipy.fft.dct(v, type=1, axis=0) / n
    c[0] /= 2
    c[-1] /= 2
    return c


def coeffs_to_values(coeffs: np.ndarray) -> np.ndarray:
    """Samples of a first-kind series at lobatto_points(N). Inverse of
    values_to_coeffs, up to rounding."""
    c = np.asarray(coeffs)
    n = c.shape[0] - 1
    if n == 0:
        return c.astype(np.result_type(c.dtype, np.float64))
    d = np.array(c, dtype=np.result_type(c.dtype, np.float64))
    d[0] *= 2
    d[-1] *= 2
    return scipy.fft.dct(d, type=1, axis=0) / 2


def clenshaw_eval(coeffs: np.ndarray, y, kind: str = "T"):
    """Evaluate a Chebyshev series by Clenshaw recurrence.

    Args:
        coeffs: series coefficients, entry k multiplying T_k or U_k.
        y: evaluation point(s) in [-1, 1] (scalar or array).
        kind: "T" for first kind, "U" for second kind.

    Returns:
        Series value(s) with the broadcast shape of y.
    """
    if kind not in ("T", "U"):
        raise ValueError(f"kind must be 'T' or 'U', got {kind!r}")
    c = np.asarray(coeffs)
    yv = np.asarray(y)
    if c.ndim != 1 or c.shape[0] == 0:
        raise ValueError("coeffs must be a nonempty 1-d array")
    dtype = np.result_type(c.dtype, yv.dtype, np.float64)
    b1 = np.zeros(yv.shape, dtype=dtype)
    b2 = np.zeros(yv.shape, dtype=dtype)
    y2 = 2 * yv
    for k in range(c.shape[0] - 1, 0, -1):
        b1, b2 = c[k] + y2 * b1 - b2, b1
    if kind == "T":
        out = c[0] + yv * b1 - b2
    else:
        out = c[0] + y2 * b1 - b2
    if np.isscalar(y) or yv.ndim == 0:
        return dtype.type(out[()] if isinstance(out, np.ndarray) else out)
    return out


@dataclass(frozen=True)
class ChebSeries:
    """A finite Chebyshev series in the computational variable y.

    Attributes:
        coeffs: coefficient vector, entry k multiplying T_k (or U_k).
        kind: "T" or "U".
    """

    coeffs: np.ndarray
    kind: str = "T"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs))
        if c.ndim != 1 or c.shape[0] == 0:
            raise ValueError("coeffs must be a nonempty 1-d array")
        if self.kind not in ("T", "U"):
            raise ValueError(f"kind must be 'T' or 'U', got {self.kind!r}")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, y):
        return clenshaw_eval(self.coeffs, y, kind=self.kind)

    def truncated(self, n: int) -> "ChebSeries":
        """Keep coefficients 0..n, zero-padding if currently shorter."""
        c = self.coeffs
        if n + 1 <= c.shape[0]:
            return ChebSeries(c[: n + 1].copy(), self.kind)
        out = np.zeros(n + 1, dtype=c.dtype)
        out[: c.shape[0]] = c
        return ChebSeries(out, self.kind)

    def tail_norm(self, start: int) -> float:
        """Max absolute coefficient from index `start` on (0.0 if past the end)."""
        t = self.coeffs[start:]
        return float(np.max(np.abs(t))) if t.size else 0.0


@dataclass(frozen=True)
class UltraOps:
    """Banded coefficient-space operators between the T and U bases.

    All matrices are square of one size and act on T coefficients except
    where noted:

        D: differentiation, T -> U (d/dy T_k = k U_{k-1}).
        S: basis conversion, T -> U (T_0 = U_0, T_k = (U_k - U_{k-2})/2).
        Mplus: multiplication by (1 + y) acting on U coefficients.
        Mminus: multiplication by (1 - y) acting on U coefficients.
    """

    size: int
    D: sp.spmatrix
    S: sp.spmatrix
    Mplus: sp.spmatrix
    Mminus: sp.spmatrix


def build_ultra_ops(size: int) -> UltraOps:
    """Assemble the sparse D, S, Mplus, Mminus operators of one size."""
    if size < 1:
        raise ValueError("build_ultra_ops needs size >= 1")
    k = np.arange(size, dtype=float)
    D = sp.diags([k[1:]], [1], shape=(size, size), format="csr")
    s_main = np.full(size, 0.5)
    s_main[0] = 1.0
    S = sp.diags([s_main, np.full(max(size - 2, 0), -0.5)], [0, 2],
                 shape=(size, size), format="csr")
    half = np.full(max(size - 1, 0), 0.5)
    Mplus = sp.diags([half, np.ones(size), half], [-1, 0, 1],
                     shape=(size, size), format="csr")
    Mminus = sp.diags([-half, np.ones(size), -half], [-1, 0, 1],
                      shape=(size, size), format="csr")
    return UltraOps(size=size, D=D, S=S, Mplus=Mplus, Mminus=Mminus)
