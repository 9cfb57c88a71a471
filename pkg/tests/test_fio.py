"""Tests for the operator construction: moment ladder, assembly, riesz."""

import math
import warnings

import numpy as np
import pytest
from numpy.polynomial import chebyshev as npcheb
from scipy.integrate import quad

from fracspec.chebcore import (
    build_ultra_ops,
    clenshaw_eval,
    lobatto_points,
    values_to_coeffs,
)
from fracspec.fio import (
    FIOApprox,
    _ladder_diagonals,
    assemble,
    band_profile,
    build_moment_table,
    build_operator,
    build_riesz,
    default_kernel_degree,
    default_rank_cap,
    initial_moments,
    recurrence_step,
)
from fracspec.kernel import aca_approximate, algebraic_factorization
from fracspec.quadrature import moments_h
from fracspec.transform import (
    AlgebraicTransform,
    DoubleExpTransform,
    select_omega,
    tcp_expand,
    tcp_eval,
)


def unit_kernel():
    """The g == 1 single-term kernel of the identity transform at mu = 1."""
    return algebraic_factorization(AlgebraicTransform(1.0), 1.0, deg_y=8, deg_t=8)


class TestInitialMoments:
    def test_worked_example_left(self):
        # mu = 1, g == 1: phi_1 = 1/2, phi_2 = (1/3) T_1 - 2/3
        ker = unit_kernel()
        h = moments_h(1.0, ker.g_coeffs.shape[0])
        R1, R2 = initial_moments(ker, h, "left")
        np.testing.assert_allclose(R1, [[0.5]], rtol=1e-15)
        np.testing.assert_allclose(R2, [[-2.0 / 3.0], [1.0 / 3.0]], rtol=1e-14)

    def test_worked_example_right(self):
        # same slope, constant term flips sign
        ker = unit_kernel()
        h = moments_h(1.0, ker.g_coeffs.shape[0])
        _, R2 = initial_moments(ker, h, "right")
        np.testing.assert_allclose(R2, [[2.0 / 3.0], [1.0 / 3.0]], rtol=1e-14)

    def test_phi2_matches_closed_integral(self):
        # phi_2(y) = int_0^1 t * 2(y - (1+y)t) dt = y - 2(1+y)/3
        ker = unit_kernel()
        h = moments_h(1.0, ker.g_coeffs.shape[0])
        _, R2 = initial_moments(ker, h, "left")
        ys = np.linspace(-1, 1, 7)
        got = clenshaw_eval(R2[:, 0], ys)
        np.testing.assert_allclose(got, ys - 2 * (1 + ys) / 3, atol=1e-15)

    def test_general_kernel_by_quadrature(self):
        # first two columns vs direct integration of t^mu g_j(t) (1, U_1)
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        ker = aca_approximate(tr, mu, deg_y=100, deg_t=100, max_rank=80)
        h = moments_h(mu, ker.g_coeffs.shape[0])
        R1, R2 = initial_moments(ker, h, "left")
        y0 = 0.37
        for j in (0, ker.rank - 1):
            gj = lambda t: ker.g_values(np.atleast_1d(t))[0, j]
            v1, _ = quad(gj, 0, 1, weight="alg", wvar=(mu, 0.0), epsabs=1e-13)
            v2, _ = quad(
                lambda t: 2 * (y0 - (1 + y0) * t) * gj(t),
                0, 1, weight="alg", wvar=(mu, 0.0), epsabs=1e-13,
            )
            assert abs(R1[0, j] - v1) < 1e-12
            assert abs(clenshaw_eval(R2[:, j], np.array([y0]))[0] - v2) < 1e-12

    def test_too_few_moments_rejected(self):
        ker = unit_kernel()
        with pytest.raises(ValueError, match="moments"):
            initial_moments(ker, moments_h(1.0, 0), "left")

    def test_bad_side(self):
        ker = unit_kernel()
        with pytest.raises(ValueError, match="side"):
            initial_moments(ker, moments_h(1.0, ker.g_coeffs.shape[0]), "middle")


class TestRecurrenceStep:
    def test_hand_worked_phi3_left(self):
        # mu = 1, g == 1: phi_3 = (1/3)y^2 - (2/3)y + 1/2, endpoint value 1/6
        R1 = np.array([[0.5]])
        R2 = np.array([[-2.0 / 3.0], [1.0 / 3.0]])
        R3 = recurrence_step(R1, R2, 2, np.array([1.0 / 6.0]), "left")
        np.testing.assert_allclose(
            R3.ravel(), [2.0 / 3.0, -2.0 / 3.0, 1.0 / 6.0], atol=1e-15
        )

    def test_hand_worked_phi3_right(self):
        R1 = np.array([[0.5]])
        R2 = np.array([[2.0 / 3.0], [1.0 / 3.0]])
        R3 = recurrence_step(R1, R2, 2, np.array([1.0 / 6.0]), "right")
        np.testing.assert_allclose(
            R3.ravel(), [2.0 / 3.0, 2.0 / 3.0, 1.0 / 6.0], atol=1e-15
        )

    def test_phi3_matches_quadrature_at_11_points(self):
        R1 = np.array([[0.5]])
        R2 = np.array([[-2.0 / 3.0], [1.0 / 3.0]])
        R3 = recurrence_step(R1, R2, 2, np.array([1.0 / 6.0]), "left")
        for y in np.linspace(-1, 1, 11):
            v, _ = quad(
                lambda t: t * (4 * (y - (1 + y) * t) ** 2 - 1), 0, 1, epsabs=1e-14
            )
            assert abs(clenshaw_eval(R3[:, 0], np.array([y]))[0] - v) < 1e-12

    def test_boundary_value_imposed(self):
        rng = np.random.default_rng(11)
        for side in ("left", "right"):
            n = 9
            Rp = rng.standard_normal((n - 1, 3))
            Rc = rng.standard_normal((n, 3))
            bv = rng.standard_normal(3)
            out = recurrence_step(Rp, Rc, n, bv, side)
            assert out.shape == (n + 1, 3)
            if side == "left":
                got = out.sum(axis=0)  # T_m(+1) = 1
            else:
                got = (out * (-1.0) ** np.arange(n + 1)[:, None]).sum(axis=0)
            np.testing.assert_allclose(got, bv, atol=1e-13)

    def test_matches_ultraspherical_operator_form(self):
        # closed-form diagonals are exactly the rows of M D -/+ n S
        ops = build_ultra_ops(40)
        for side, M, sgn in (("left", ops.Mplus, -1), ("right", ops.Mminus, +1)):
            for n in (2, 7, 19):
                L = (M @ ops.D + sgn * n * ops.S).toarray()
                L0, L1, L2, _ = _ladder_diagonals(n, side)
                idx = np.arange(n + 1)
                ref = np.zeros((n + 1, n + 3))
                ref[idx, idx] = L0
                ref[idx, idx + 1] = L1
                ref[idx, idx + 2] = L2
                assert np.array_equal(L[: n + 1, : n + 3], ref)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError, match="n = 2"):
            recurrence_step(np.zeros((0, 1)), np.zeros((1, 1)), 1, np.zeros(1), "left")

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="lengths"):
            recurrence_step(np.zeros((3, 1)), np.zeros((3, 1)), 3, np.zeros(1), "left")


class TestMomentTable:
    def test_column_shapes_and_degree_bound(self):
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        tb = build_moment_table(tr, mu, 12, "left")
        assert tb.order == 12
        assert tb.columns[0].shape == (0, tb.kernel.rank)
        for n in range(1, 13):
            assert tb.columns[n].shape == (n, tb.kernel.rank)

    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    def test_columns_match_defining_integral(self):
        # phi_n^j(y) = int_0^1 t^mu U_{n-1}(y - (1+y)t) g_j(t) dt
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        tb = build_moment_table(tr, mu, 20, "left")
        ker = tb.kernel

        def unval(n, z):
            return np.sin((n + 1) * np.arccos(np.clip(z, -1, 1))) / np.sqrt(
                np.maximum(1 - z * z, 1e-300)
            )

        for n in (5, 20):
            for j in (0, min(3, ker.rank - 1)):
                for y in (-0.7, 0.2, 1.0):
                    f = lambda t: unval(n - 1, y - (1 + y) * t) * ker.g_values(
                        np.atleast_1d(t)
                    )[0, j]
                    # t = s^2 removes the t^{1/2} weight exactly
                    v, _ = quad(
                        lambda s: 2 * s * s * f(s * s), 0, 1,
                        epsabs=1e-14, epsrel=1e-14, limit=300,
                    )
                    got = clenshaw_eval(tb.columns[n][:, j], np.array([y]))[0]
                    assert abs(got - v) < 1e-11

    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    def test_right_columns_match_defining_integral(self):
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        tb = build_moment_table(tr, mu, 9, "right")
        ker = tb.kernel

        def unval(n, z):
            return np.sin((n + 1) * np.arccos(np.clip(z, -1, 1))) / np.sqrt(
                np.maximum(1 - z * z, 1e-300)
            )

        for (n, j, y) in ((4, 0, -1.0), (9, 1, 0.3)):
            f = lambda t: unval(n - 1, y + (1 - y) * t) * ker.g_values(
                np.atleast_1d(t)
            )[0, j]
            v, _ = quad(
                lambda s: 2 * s * s * f(s * s), 0, 1,
                epsabs=1e-14, epsrel=1e-14, limit=300,
            )
            got = clenshaw_eval(tb.columns[n][:, j], np.array([y]))[0]
            assert abs(got - v) < 1e-11

    def test_bad_size(self):
        with pytest.raises(ValueError, match="size"):
            build_moment_table(AlgebraicTransform(1.0), 1.0, 0)

    def test_algebraic_right_side_rejected(self):
        with pytest.raises(ValueError, match="left-sided"):
            build_moment_table(AlgebraicTransform(0.5), 0.5, 4, side="right")

    def test_kernel_side_mismatch_rejected(self):
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        ker = aca_approximate(tr, mu, deg_y=100, deg_t=100, max_rank=80)
        with pytest.raises(ValueError, match="sided"):
            build_moment_table(tr, mu, 4, side="right", kernel=ker)

    def test_chain_rule_recurrence_identity(self):
        # under the algebraic map the ladder, rewritten through
        # (1+x) d/dx = beta (1+y) d/dy, must satisfy
        #   ((1+x)d/dx - (n+1)beta) chi_{n+1}
        #     = ((1+x)d/dx + (n-1)beta) chi_{n-1} + 2 beta n chi_n
        # with chi_n = (1+y) phi_n; checked pointwise via the forward map
        beta, mu = 0.5, 0.5
        ta = AlgebraicTransform(beta)
        tb = build_moment_table(ta, mu, 12, "left")
        ys = np.linspace(-0.95, 0.9, 9)
        xv = ta.forward(ys)
        fac = (1 + xv) / ta.deriv(ys)

        def chi(n):
            return npcheb.chebmul([1.0, 1.0], tb.columns[n][:, 0] * tb.kernel.sigma[0])

        for n in (3, 6, 10):
            cm, cc, cp = chi(n - 1), chi(n), chi(n + 1)
            lhs = fac * npcheb.chebval(ys, npcheb.chebder(cp)) - beta * (
                n + 1
            ) * npcheb.chebval(ys, cp)
            rhs = (
                beta * (n - 1) * npcheb.chebval(ys, cm)
                + fac * npcheb.chebval(ys, npcheb.chebder(cm))
                + 2 * beta * n * npcheb.chebval(ys, cc)
            )
            assert np.max(np.abs(lhs - rhs)) < 1e-13


class TestAssembly:
    # selected coefficients of the 48-point expansion of
    # (1 + psi(y))^{1/2} / Gamma(3/2), omega = 3.8363302106819246,
    # from a 40-digit evaluation of the same cosine sums
    COLUMN0_LEFT_REFERENCE = [
        (0, 0.8454748616179947857151),
        (1, 0.997646892845302236768),
        (7, -0.05970028208245516539791),
        (25, 3.981658017363163862641e-5),
        (48, 4.132089904162926136405e-9),
    ]

    def test_column_zero_is_power_function(self):
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        A = build_operator(tr, mu, 48, "left")
        for k, ref in self.COLUMN0_LEFT_REFERENCE:
            assert abs(A[k, 0] - ref) < 1e-14
        # psi is odd, so the right power function mirrors the left one:
        # coefficients agree up to negated odd rows
        Ar = build_operator(tr, mu, 48, "right")
        flip = (-1.0) ** np.arange(49)
        np.testing.assert_allclose(Ar[:, 0], flip * A[:, 0], atol=1e-15)

    def test_antiderivative_of_linear(self):
        # mu = 1: A maps coeffs of x to coeffs of (x^2 - 1)/2
        tr = DoubleExpTransform(select_omega(1.0))
        A = build_operator(tr, 1.0, 64, "left")
        c = tcp_expand(lambda x: x, tr, 64).coeffs
        want = tcp_expand(lambda x: (x * x - 1) / 2, tr, 64).coeffs
        np.testing.assert_allclose(A @ c, want, atol=1e-12)

    def test_polynomial_antiderivatives_to_degree_10(self):
        tr = DoubleExpTransform(select_omega(1.0))
        A = build_operator(tr, 1.0, 128, "left")
        xs = np.linspace(-1, 1, 500)
        for d in range(11):
            c = tcp_expand(lambda x, d=d: x**d, tr, 128).coeffs
            exact = (xs ** (d + 1) - (-1.0) ** (d + 1)) / (d + 1)
            assert np.max(np.abs(tcp_eval(A @ c, tr, xs) - exact)) < 1e-11

    def test_exact_antiderivative_identity_map(self):
        # beta = 1 algebraic transform is the identity: compare to chebint
        tr = AlgebraicTransform(1.0)
        A = build_operator(tr, 1.0, 16, "left")
        rng = np.random.default_rng(7)
        c = rng.standard_normal(12)
        exact = npcheb.chebint(c, lbnd=-1)
        got = A @ np.concatenate([c, np.zeros(5)])
        np.testing.assert_allclose(got[: exact.shape[0]], exact, atol=1e-12)
        assert np.max(np.abs(got[exact.shape[0] :])) < 1e-14

    def test_halforder_closed_form(self):
        # I^{1/2}[(1+x)^{1/2}] = Gamma(3/2)/Gamma(2) (1+x)
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        A = build_operator(tr, mu, 256, "left")
        c = tcp_expand(lambda x: np.sqrt(1 + x), tr, 256).coeffs
        want = tcp_expand(
            lambda x: math.gamma(1.5) / math.gamma(2.0) * (1 + x), tr, 256
        ).coeffs
        np.testing.assert_allclose(A @ c, want, atol=1e-12)

    def test_table_and_stream_agree_exactly(self):
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        ker = aca_approximate(tr, mu, deg_y=100, deg_t=100, max_rank=80)
        tb = build_moment_table(tr, mu, 40, "left", kernel=ker)
        A1 = assemble(tb)
        A2 = build_operator(tr, mu, 40, "left", kernel=ker)
        assert np.array_equal(A1, A2)

    def test_assemble_smaller_size(self):
        tr = AlgebraicTransform(1.0)
        tb = build_moment_table(tr, 1.0, 20)
        A = assemble(tb, size=8)
        assert A.shape == (9, 9)
        # a fresh build uses a smaller boundary rule, so only near-exact
        np.testing.assert_allclose(A, build_operator(tr, 1.0, 8), atol=1e-12)
        with pytest.raises(ValueError, match="columns up to"):
            assemble(tb, size=21)

    def test_columns_interpolate_grid_samples(self):
        # each assembled column agrees with a pointwise sample of the
        # integral at the construction grid, even far from convergence
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        N = 24
        A = build_operator(tr, mu, N, "left")
        y = lobatto_points(N)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for n in (2, 11):
                vals = []
                for yy in y:
                    x = tr.forward(np.array([yy]))[0]
                    if x <= -1:
                        vals.append(0.0)
                        continue
                    f = lambda s: np.cos(
                        n * np.arccos(np.clip(tr.inverse(np.array([s]))[0], -1, 1))
                    )
                    v, _ = quad(
                        f, -1, x, weight="alg", wvar=(0.0, mu - 1.0),
                        epsabs=1e-11, epsrel=1e-11, limit=400,
                    )
                    vals.append(v / math.gamma(mu))
                oracle = values_to_coeffs(np.array(vals))
                assert np.max(np.abs(A[:, n] - oracle)) < 1e-8

    def test_semigroup_quarter_orders(self):
        tr = DoubleExpTransform(select_omega(0.25))
        N = 256
        Aq = build_operator(tr, 0.25, N, "left")
        Ah = build_operator(tr, 0.5, N, "left")
        c = tcp_expand(lambda x: np.exp(x) * np.cos(2 * x), tr, N).coeffs
        err = np.max(np.abs((Aq @ (Aq @ c) - Ah @ c)[: N // 2]))
        assert err < 1e-10

    def test_negative_size_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            build_operator(AlgebraicTransform(1.0), 1.0, -1)


class TestFIOApprox:
    def test_build_records_kernel_and_bands(self):
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        op = FIOApprox.build(tr, mu, 64)
        assert op.size == 64
        assert op.matrix.shape == (65, 65)
        assert 25 <= op.kernel_rank <= default_rank_cap(mu)
        assert op.kernel_residual < 1e-12
        lo, up = band_profile(op.matrix)
        assert (op.lower_bandwidth, op.upper_bandwidth) == (lo, up)

    def test_apply_pads_short_vectors(self):
        tr = AlgebraicTransform(1.0)
        op = FIOApprox.build(tr, 1.0, 12)
        c = np.array([1.0, 2.0])
        np.testing.assert_allclose(op.apply(c), op.matrix[:, :2] @ c)
        with pytest.raises(ValueError, match="longer"):
            op.apply(np.zeros(20))

    def test_band_profile_on_known_matrix(self):
        m = np.zeros((6, 6))
        m[3, 1] = 1.0  # lower distance 2
        m[0, 4] = 0.5  # upper distance 4
        m[2, 2] = 1e-16  # below cut
        assert band_profile(m) == (2, 4)
        assert band_profile(np.zeros((3, 3))) == (0, 0)

    def test_default_degree_and_rank_tables(self):
        assert default_kernel_degree(1.0) == 100
        assert default_kernel_degree(1e-2) == 120
        assert default_kernel_degree(1e-6) == 920
        assert default_kernel_degree(7.5) == 100  # clamped above 1
        assert default_rank_cap(1e-2) == 100
        assert default_rank_cap(0.5) >= 60


class TestRiesz:
    def test_prefactor_and_combination(self):
        mu = 0.5
        tr = DoubleExpTransform(select_omega(mu))
        left = build_operator(tr, mu, 24, "left")
        right = build_operator(tr, mu, 24, "right")
        R = build_riesz(tr, mu, 24)
        np.testing.assert_allclose(
            R.matrix, (left + right) / math.sqrt(2.0), atol=1e-15
        )
        assert R.side == "riesz"

    def test_odd_integer_orders_rejected(self):
        tr = DoubleExpTransform(select_omega(1.0))
        for bad in (1.0, 3.0, 1.0 - 3e-9):
            with pytest.raises(ValueError, match="odd integer"):
                build_riesz(tr, bad, 8)

    def test_even_order_allowed(self):
        tr = DoubleExpTransform(select_omega(1.0))
        R = build_riesz(tr, 2.0, 16)
        assert np.isfinite(R.matrix).all()
