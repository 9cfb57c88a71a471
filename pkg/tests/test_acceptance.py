"""End-to-end requirement gate.

One test per stated requirement. Each prints a single line of the form
[PASS]/[FAIL] with the measured quantity next to its gate (visible with
pytest -s, or in the captured output of a failing test). Long-running
optional rows are marked slow and run only with FRACSPEC_RUN_SLOW=1.

The fractional Airy row at eps = 1e-2 fails by construction: the
Riemann-Liouville formulation's true solution carries a sqrt(1+x) mode
the integral ansatz cannot represent, and the ladder floors at that
mode's amplitude (about 1e-3 here) rather than at the gate. The test
states the measured floor; the machinery itself is exercised to the
rounding floor by the caputo variant inside the same test.
"""

import math
import time
import warnings

import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from fracspec.fio import build_operator, default_kernel, default_kernel_degree
from fracspec.kernel import LowRankKernel
from fracspec.problems import abel_problem, mixed_problem, riesz_problem
from fracspec.solver import (
    ConvergenceError,
    EndpointPower,
    PseudospectraJob,
    TruncationPolicy,
    _build_level,
    _OperatorFactory,
    _sigma_at_level,
    data_coeffs,
    pseudospectra,
    solve_eigen,
    solve_fde_airy,
    solve_fie,
)
from fracspec.transform import (
    DoubleExpTransform,
    select_omega,
    tcp_eval,
    tcp_expand,
)


def gate(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    assert ok, line


X4 = np.linspace(-1.0, 1.0, 10**4)


def test_abel_half_order_machine_precision():
    t0 = time.perf_counter()
    spec, _ = abel_problem(0.5)
    sol = solve_fie(spec)
    err = float(np.max(np.abs(sol(X4) - np.sqrt(1.0 + X4))))
    dt = time.perf_counter() - t0
    gate(
        "abel mu=1/2",
        err <= 1e-12 and sol.n_final <= 512 and dt < 30.0,
        f"max error {err:.2e} (gate 1e-12) at N={sol.n_final} (gate 512), {dt:.1f}s (gate 30s)",
    )


def test_abel_hundredth_order_table_parameters():
    t0 = time.perf_counter()
    mu = 1e-2
    deg = default_kernel_degree(mu)
    rank = default_kernel(DoubleExpTransform(select_omega(mu)), mu).rank
    spec, _ = abel_problem(mu, TruncationPolicy(n_max=1024))
    sol = solve_fie(spec)
    y = sol.transform.inverse(X4)
    err = float(np.max(np.abs(sol(X4) - np.exp(mu * sol.transform.log1pm_psi(y, +1)))))
    dt = time.perf_counter() - t0
    # the retained separation rank sits on the rounding shelf of the
    # cross approximation; the published count is 50 and runs land
    # within one of it depending on the arithmetic
    gate(
        "abel mu=1e-2",
        err <= 1e-10 and sol.n_final <= 1024 and dt < 120.0
        and deg == 120 and abs(rank - 50) <= 1,
        f"max error {err:.2e} (gate 1e-10) at N={sol.n_final} (gate 1024), "
        f"K=L={deg} (table 120), r={rank} (table 50, slack 1), {dt:.1f}s (gate 120s)",
    )


def test_riesz_equation():
    spec, _ = riesz_problem()
    sol = solve_fie(spec)
    exact = 2.0 * math.sqrt(math.pi) * math.cos(math.pi / 4.0) * np.sqrt(1.0 + X4)
    err = float(np.max(np.abs(sol(X4) - exact)))
    gate(
        "riesz mu=1/2",
        err <= 1e-11 and sol.n_final <= 512,
        f"max error {err:.2e} (gate 1e-11) at N={sol.n_final} (gate 512)",
    )


def test_mixed_equation_plateau_no_rebound():
    # push past the plateau on purpose: the budget runs out, and the
    # harvested history shows whether the error climbs back up
    spec = mixed_problem(TruncationPolicy(n_start=64, n_max=1024, tol=1e-15))
    with pytest.raises(ConvergenceError) as info:
        solve_fie(spec)
    hist = info.value.history
    errs = [e for _, e in hist]
    plateau = min(errs)
    first = next(i for i, e in enumerate(errs) if e <= 1e-12)
    rebound = max(errs[first:])
    gate(
        "mixed equation",
        plateau <= 1e-12 and rebound <= 1e-10,
        f"plateau {plateau:.2e} (gate 1e-12), worst after crossing {rebound:.2e} "
        f"(gate 1e-10), history {[f'{e:.1e}' for e in errs]}",
    )


_EIG_TABLE = (
    1.355201481588489 + 0.0j,
    4.930015412112804 + 3.094646626469975j,
    8.217665634311189 + 8.089668419364024j,
    11.387725243090559 + 13.804866459545323j,
    14.564020446706387 + 20.023206234983594j,
    17.778713260368924 + 26.640854355716016j,
)


def test_eigenproblem_reference_values():
    res = solve_eigen(1.23456789, 0.123456789, k=6)
    diffs = [
        max(abs(l.real - t.real), abs(l.imag - t.imag))
        for l, t in zip(res.eigenvalues, _EIG_TABLE)
    ]
    first = abs(res.eigenvalues[0] - _EIG_TABLE[0])
    gate(
        "eigenproblem",
        first <= 1e-9 and all(d <= 1e-8 for d in diffs),
        f"first |diff| {first:.2e} (gate 1e-9), worst component "
        f"{max(diffs):.2e} (gate 1e-8)",
    )


def test_airy_desk_scale_boundaries_and_decay():
    # the formulation's stated gates; see the module docstring for why
    # the Riemann-Liouville run cannot meet them
    with pytest.raises(ConvergenceError) as info:
        solve_fde_airy(1e-2, TruncationPolicy(n_max=2048, tol=1e-10))
    tight = [e for _, e in info.value.history]
    sol = solve_fde_airy(1e-2, TruncationPolicy(n_max=2048, tol=1e-3))
    bnd = (abs(complex(sol(-1.0))), abs(complex(sol(1.0)) - 1.0))
    cap = solve_fde_airy(1e-2, TruncationPolicy(n_max=2048, tol=1e-10), variant="caputo")
    cap_bnd = (abs(complex(cap(-1.0))), abs(complex(cap(1.0)) - 1.0))
    geometric = all(b <= 0.5 * a for a, b in zip(tight[1:], tight[2:]))
    gate(
        "airy eps=1e-2 (Riemann-Liouville)",
        max(bnd) <= 1e-10 and geometric,
        f"boundary residuals {bnd[0]:.2e}, {bnd[1]:.2e} (gate 1e-10); ladder "
        f"{[f'{e:.1e}' for e in tight]} floors near the unrepresentable-mode "
        f"amplitude instead of decaying geometrically; the caputo variant on "
        f"the same machinery reaches {max(cap_bnd):.2e}",
    )


def _quad_column_value(transform, mu, n, x):
    f = lambda s: np.cos(
        n * np.arccos(np.clip(transform.inverse(np.array([s]))[0], -1.0, 1.0))
    )
    v, _ = quad(
        f, -1.0, x, weight="alg", wvar=(0.0, mu - 1.0),
        epsabs=1e-11, epsrel=1e-11, limit=400,
    )
    return v / math.gamma(mu)


def test_oracle_equivalence_suite():
    worst_col = 0.0
    xs = np.array([-0.9, -0.5, 0.0, 0.4, 0.8, 0.95])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for mu in (0.5, math.e / 3.0):
            tr = DoubleExpTransform(select_omega(mu))
            A = build_operator(tr, mu, 256, "left")
            for n in range(33):
                got = tcp_eval(A[:, n], tr, xs)
                want = np.array([_quad_column_value(tr, mu, n, x) for x in xs])
                worst_col = max(worst_col, float(np.max(np.abs(got - want))))

    tr = DoubleExpTransform(select_omega(0.25))
    Aq = build_operator(tr, 0.25, 256, "left")
    Ah = build_operator(tr, 0.5, 256, "left")
    grid = np.linspace(-1.0, 1.0, 401)
    worst_semi = 0.0
    for f in (lambda x: np.exp(x) * np.cos(2 * x), lambda x: 1.0 / (2.0 + 0.9 * x)):
        c = tcp_expand(f, tr, 256).coeffs
        d = Aq @ (Aq @ c) - Ah @ c
        worst_semi = max(worst_semi, float(np.max(np.abs(tcp_eval(d, tr, grid)))))

    tr1 = DoubleExpTransform(select_omega(1.0))
    A1 = build_operator(tr1, 1.0, 128, "left")
    worst_int = 0.0
    for d in range(11):
        c = tcp_expand(lambda x, d=d: x**d, tr1, 128).coeffs
        exact = (grid ** (d + 1) - (-1.0) ** (d + 1)) / (d + 1)
        worst_int = max(worst_int, float(np.max(np.abs(tcp_eval(A1 @ c, tr1, grid) - exact))))

    gate(
        "oracle equivalence",
        worst_col <= 1e-8 and worst_semi <= 1e-8 and worst_int <= 1e-11,
        f"columns 0..32 vs adaptive quadrature {worst_col:.2e} (gate 1e-8); "
        f"quarter-order semigroup {worst_semi:.2e} (gate 1e-8); "
        f"integer-order antiderivatives {worst_int:.2e} (gate 1e-11)",
    )


def test_pseudospectra_property_suite():
    mu = 0.5
    tr = DoubleExpTransform(select_omega(mu))
    level = _build_level(tr, _OperatorFactory(tr), mu, 256)

    def dense(z):
        K = level.restrict @ np.linalg.solve(
            z * level.left - np.eye(level.left.shape[0]), level.left
        ) @ level.lift
        return 1.0 / scipy.linalg.svdvals(K)[0]

    samples = (4 + 6j, -2 + 5j, 1 + 1j, 0.5 + 4.5j, -1 - 2j)
    worst = 0.0
    for z in samples:
        lz = _sigma_at_level(z, level, 200, 1e-8)[0]
        dz = dense(z)
        worst = max(worst, abs(lz - dz) / dz)

    s_right = _sigma_at_level(8 + 0j, level, 200, 1e-8)[0]
    s_left = _sigma_at_level(-2 + 5j, level, 200, 1e-8)[0]
    ratio = s_right / s_left

    job = PseudospectraJob(
        re_range=(-2.0, 12.0), im_range=(-4.0, 4.0),
        re_count=9, im_count=9, mu=mu, n=96,
    )
    res = pseudospectra(job)
    sym = float(np.max(np.abs(res.sigma - res.sigma[::-1]) / np.abs(res.sigma)))

    gate(
        "pseudospectra properties",
        worst <= 1e-6 and ratio <= 1e-6 and sym <= 1e-8,
        f"Lanczos vs dense SVD worst rel {worst:.2e} at 5 z (gate 1e-6); "
        f"value at z=8 is {1 / ratio:.1e} x smaller than at -2+5i (gate 1e6); "
        f"conjugate symmetry {sym:.2e} (gate 1e-8)",
    )


def test_transform_suite():
    omegas = (
        select_omega(1.0 / 3.0),
        select_omega(1e-5),
        select_omega(math.inf),
    )
    omega_ok = (
        abs(omegas[0] - 4.238) < 5e-4
        and abs(omegas[1] - 14.646) < 5e-4
        and abs(omegas[2] - 3.154) < 5e-4
    )

    xs = np.linspace(-1.0, 1.0, 2 * 10**4)
    cases = (
        (omegas[0],
         lambda t: (lambda y: np.exp(t.log1pm_psi(y, -1) / 3.0 + t.log1pm_psi(y, +1) / 2.0)),
         (1.0 - xs) ** (1.0 / 3.0) * np.sqrt(1.0 + xs)),
        (omegas[1],
         lambda t: (lambda y: np.exp(1e-5 * t.log1pm_psi(y, +1))),
         (1.0 + xs) ** 1e-5),
        (omegas[2],
         lambda t: (lambda y: np.exp(t.forward(y))),
         np.exp(xs)),
    )
    worst = 0.0
    for omega, fy, want in cases:
        t = DoubleExpTransform(omega)
        s = tcp_expand(fy(t), t, 400, of_y=True)
        worst = max(worst, float(np.max(np.abs(tcp_eval(s, t, xs) - want))))

    gate(
        "transform suite",
        omega_ok and worst <= 1e-13,
        f"omega = {omegas[0]:.3f}, {omegas[1]:.3f}, {omegas[2]:.3f} "
        f"(want 4.238, 14.646, 3.154); worst expansion error {worst:.2e} "
        f"(gate 1e-13) at 2e4 points",
    )


# ---------------------------------------------------------------------------
# optional long rows

_TINY_MU_TABLE = {1e-3: (58, 170), 1e-4: (64, 350), 1e-5: (65, 660), 1e-6: (64, 920)}


@pytest.mark.slow
def test_abel_tiny_orders_table_rows():
    """Abel at mu = 1e-3..1e-6 with the published r/K/L.

    The kernel is separated at the published grid degree and truncated
    to exactly the published rank (the retained modes are ordered by
    singular value, so the cut drops only rounding-level terms), then
    the second-kind system (I + A) u = f is solved directly.
    """
    details = []
    ok = True
    for mu, (r_pub, deg_pub) in _TINY_MU_TABLE.items():
        tr = DoubleExpTransform(select_omega(mu))
        deg = default_kernel_degree(mu)
        k = default_kernel(tr, mu)
        kt = LowRankKernel(
            mu=mu, side="left", sigma=k.sigma[:r_pub],
            f_coeffs=k.f_coeffs[:, :r_pub], g_coeffs=k.g_coeffs[:, :r_pub],
            residual=k.residual,
        )
        rhs_atoms = (
            EndpointPower(p=mu),
            EndpointPower(p=2 * mu, scale=gamma_fn(1 + mu) / gamma_fn(1 + 2 * mu)),
        )
        best = math.inf
        best_n = 0
        for n in (256, 512, 1024):
            A = build_operator(tr, mu, n, "left", kernel=kt)
            f = data_coeffs(rhs_atoms, tr, n)
            u = np.linalg.solve(np.eye(n + 1) + A, f)
            y = tr.inverse(X4)
            err = float(np.max(np.abs(
                tcp_eval(u, tr, X4) - np.exp(mu * tr.log1pm_psi(y, +1))
            )))
            if err < best:
                best, best_n = err, n
        row_ok = best <= 1e-10 and deg == deg_pub
        ok = ok and row_ok
        details.append(f"mu={mu:g}: err {best:.1e} at N={best_n}, K=L={deg}, r={r_pub}")
    gate("abel tiny orders", ok, "; ".join(details) + " (gate 1e-10 each)")


@pytest.mark.slow
def test_airy_strongly_singular_floor():
    """eps = 1e-4: the oscillation resolves by N = 4096 and the ladder
    floors near 2e-5, the unrepresentable-mode amplitude at this eps."""
    with pytest.raises(ConvergenceError) as info:
        solve_fde_airy(1e-4, TruncationPolicy(n_start=1024, n_max=8192, tol=1e-10))
    errs = dict(info.value.history)
    gate(
        "airy eps=1e-4 floor",
        errs.get(4096, math.inf) <= 5e-5 and errs.get(8192, math.inf) <= 5e-5,
        f"ladder {[f'{e:.1e}' for e in errs.values()]}: resolution by N=4096, "
        f"floor near 2e-5 (documented mode amplitude), not machine precision",
    )


@pytest.mark.slow
def test_airy_full_scale():
    """The published full-scale run: eps = 1e-6, N around 26500.

    The dense bordered solves at that size need roughly 30 GB; the test
    skips on smaller machines rather than thrash. Where it does run, the
    stated gates are the same as the desk-scale row and the same
    missing-mode analysis applies.
    """
    with open("/proc/meminfo") as fh:
        avail_kb = next(
            int(line.split()[1]) for line in fh if line.startswith("MemAvailable")
        )
    if avail_kb < 30 * 1024**2:
        pytest.skip("needs about 30 GB available for dense solves near N=26500")
    t0 = time.perf_counter()
    try:
        sol = solve_fde_airy(1e-6, TruncationPolicy(n_start=4096, n_max=32768, tol=1e-10))
        hist = sol.cauchy_history
        bnd = (abs(complex(sol(-1.0))), abs(complex(sol(1.0)) - 1.0))
    except ConvergenceError as exc:
        hist = exc.history
        bnd = (math.inf, math.inf)
    errs = [e for _, e in hist]
    geometric = all(b <= 0.5 * a for a, b in zip(errs[1:], errs[2:]))
    dt = time.perf_counter() - t0
    gate(
        "airy eps=1e-6 full scale",
        max(bnd) <= 1e-10 and geometric and dt < 1800.0,
        f"boundary residuals {bnd[0]:.2e}, {bnd[1]:.2e} (gate 1e-10); "
        f"ladder {[f'{e:.1e}' for e in errs]}; {dt:.0f}s (gate 1800s)",
    )
