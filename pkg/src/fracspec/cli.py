"""Command-line front end.

Four subcommands: `build` assembles a single operator matrix to disk,
`solve`, `eig`, and `pseudospectra` run the shipped experiments from a
declarative JSON job (or a named preset) and write machine-readable
results. Exit codes: 0 success, 1 a solver gave up (whatever history
exists is still written), 2 invalid flags or job document.

Output is deterministic: the same job produces byte-identical files on
every run. Floats are printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import storage
from .fio import (
    band_profile,
    build_operator,
    default_kernel,
    default_kernel_degree,
    default_rank_cap,
    riesz_prefactor,
)
from .kernel import aca_approximate
from .opalgebra import IllConditionedError
from .problems import abel_problem, mixed_problem, riesz_problem
from .solver import (
    ConvergenceError,
    PseudospectraJob,
    TruncationPolicy,
    data_values,
    pseudospectra,
    solve_eigen,
    solve_fde_airy,
    solve_fie,
)
from .transform import AlgebraicTransform, DoubleExpTransform, select_omega

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_USAGE = 2

_PRESETS = ("abel", "riesz", "mixed", "airy", "eig", "pseudospectra")

_POLICY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_start": {"type": "integer"},
        "n_max": {"type": "integer"},
        "tol": {"type": "number"},
    },
}

# One schema per subcommand; unknown keys are rejected at the top level
# and inside policy. Cross-field rules (mu only with the abel problem,
# epsilon required by airy) are enforced after schema validation.
_JOB_SCHEMAS = {
    "solve": {
        "type": "object",
        "additionalProperties": False,
        "required": ["problem"],
        "properties": {
            "problem": {"enum": ["abel", "riesz", "mixed", "airy"]},
            "mu": {"type": "number"},
            "epsilon": {"type": "number"},
            "variant": {"enum": ["rl", "caputo"]},
            "policy": _POLICY_SCHEMA,
            "sample_count": {"type": "integer", "minimum": 2},
            "notes": {"type": "string"},
        },
    },
    "eig": {
        "type": "object",
        "additionalProperties": False,
        "required": ["mu1", "mu2"],
        "properties": {
            "mu1": {"type": "number"},
            "mu2": {"type": "number"},
            "k": {"type": "integer"},
            "policy": _POLICY_SCHEMA,
            "notes": {"type": "string"},
        },
    },
    "pseudospectra": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "re_range": {
                "type": "array", "items": {"type": "number"},
                "minItems": 2, "maxItems": 2,
            },
            "im_range": {
                "type": "array", "items": {"type": "number"},
                "minItems": 2, "maxItems": 2,
            },
            "re_count": {"type": "integer"},
            "im_count": {"type": "integer"},
            "mu": {"type": "number"},
            "n": {"type": "integer"},
            "max_iters": {"type": "integer"},
            "ritz_tol": {"type": "number"},
            "notes": {"type": "string"},
        },
    },
}


def _load_job(args) -> dict:
    if args.job is not None:
        with open(args.job, "r", encoding="utf-8") as fh:
            try:
                job = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"malformed job file {args.job}: {exc}") from exc
    else:
        if args.preset not in _PRESETS:
            raise ValueError(
                f"unknown preset {args.preset!r}; available: {', '.join(_PRESETS)}"
            )
        path = resources.files("fracspec").joinpath("presets", args.preset + ".json")
        job = json.loads(path.read_text(encoding="utf-8"))
    schema = _JOB_SCHEMAS[args.command]
    try:
        jsonschema.validate(job, schema, cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as exc:
        raise ValueError(f"invalid job document: {exc.message}") from exc
    return job


def _policy_from(job: dict, args) -> TruncationPolicy:
    fields = dict(job.get("policy", {}))
    if args.n_max is not None:
        fields["n_max"] = args.n_max
    if args.tol is not None:
        fields["tol"] = args.tol
    return TruncationPolicy(**fields)


def _require(job: dict, key: str):
    if key not in job:
        raise ValueError(f"the {job['problem']} problem requires {key!r}")
    return job[key]


def _forbid(job: dict, *keys: str) -> None:
    for key in keys:
        if key in job:
            raise ValueError(f"{key!r} does not apply to the {job['problem']} problem")


def _transform_meta(transform) -> dict:
    if isinstance(transform, AlgebraicTransform):
        return {"kind": "algebraic", "beta": transform.beta}
    return {"kind": "de", "omega": transform.omega}


def _outpath(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


# ---------------------------------------------------------------------------
# build


def cmd_build(args) -> int:
    if not args.mu > 0:
        raise ValueError(f"mu must be positive, got {args.mu}")
    if args.n < 0:
        raise ValueError("n must be nonnegative")
    if args.transform == "algebraic":
        if args.side != "left":
            raise ValueError("the algebraic transform only supports --side left")
        beta = args.beta if args.beta is not None else min(args.mu, 1.0)
        transform = AlgebraicTransform(beta)
    else:
        if args.beta is not None:
            raise ValueError("--beta only applies to --transform algebraic")
        omega = args.omega if args.omega is not None else select_omega(args.mu)
        transform = DoubleExpTransform(omega)

    def one_side(side: str):
        if args.transform == "algebraic" or args.kernel_deg is None:
            kernel = None  # degree policy chosen by order
        else:
            kernel = aca_approximate(
                transform, args.mu, deg_y=args.kernel_deg, deg_t=args.kernel_deg,
                side=side, tol=1e-15, max_rank=default_rank_cap(args.mu),
            )
        if kernel is None:
            kernel = default_kernel(transform, args.mu, side)
        matrix = build_operator(transform, args.mu, args.n, side, kernel=kernel)
        return matrix, kernel.rank

    if args.side == "riesz":
        left, rank_l = one_side("left")
        right, rank_r = one_side("right")
        matrix = riesz_prefactor(args.mu) * (left + right)
        rank = rank_l + rank_r
    else:
        matrix, rank = one_side(args.side)

    lo, up = band_profile(matrix)
    meta = {
        "mu": args.mu,
        "side": args.side,
        "transform": _transform_meta(transform),
        "n": args.n,
        "lower_bandwidth": lo,
        "upper_bandwidth": up,
        "kernel_rank": rank,
        "kernel_degree": args.kernel_deg
        if args.kernel_deg is not None
        else default_kernel_degree(args.mu),
    }
    storage.write_matrix(args.out, matrix, meta)
    root, _ = os.path.splitext(args.out)
    storage.write_json(root + ".json", meta)
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def _write_convergence(path, cauchy_history, residual_history) -> None:
    cmap = dict(cauchy_history)
    rows = [
        (n, cmap.get(n, float("nan")), res) for n, res in residual_history
    ]
    storage.write_csv(path, ("N", "cauchy_error", "residual"), rows)


def cmd_solve(args) -> int:
    job = _load_job(args)
    policy = _policy_from(job, args)
    problem = job["problem"]
    exact = None
    try:
        if problem == "abel":
            mu = _require(job, "mu")
            _forbid(job, "epsilon", "variant")
            if not 0 < mu:
                raise ValueError("abel requires mu > 0")
            spec, exact = abel_problem(mu, policy)
            sol = solve_fie(spec)
        elif problem == "riesz":
            _forbid(job, "mu", "epsilon", "variant")
            spec, exact = riesz_problem(policy)
            sol = solve_fie(spec)
        elif problem == "mixed":
            _forbid(job, "mu", "epsilon", "variant")
            sol = solve_fie(mixed_problem(policy))
        else:
            epsilon = _require(job, "epsilon")
            _forbid(job, "mu")
            sol = solve_fde_airy(epsilon, policy, job.get("variant", "rl"))
    except ConvergenceError as exc:
        _write_convergence(
            _outpath(args, "convergence.csv"), exc.history, exc.residual_history
        )
        print(f"fracspec solve: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IllConditionedError as exc:
        storage.write_csv(
            _outpath(args, "convergence.csv"), ("N", "cauchy_error", "residual"), ()
        )
        print(f"fracspec solve: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    _write_convergence(
        _outpath(args, "convergence.csv"), sol.cauchy_history, sol.residual_history
    )

    count = int(job.get("sample_count", 1001))
    x = np.linspace(-1.0, 1.0, count)
    vals = np.asarray(sol(x), dtype=complex)
    storage.write_csv(
        _outpath(args, "solution_values.csv"),
        ("x", "re_u", "im_u"),
        zip(x, vals.real, vals.imag),
    )

    c = np.asarray(sol.coeffs.coeffs, dtype=complex)
    # the condition estimate from blocked LAPACK wobbles at ulp level
    # between otherwise identical runs; 6 digits is its real precision
    # and keeps repeat runs byte-identical
    doc = {
        "problem": problem,
        "n_final": sol.n_final,
        "residual": sol.residual,
        "rcond": float("%.6g" % sol.rcond),
        "transform": _transform_meta(sol.transform),
        "kind": sol.coeffs.kind,
        "coeffs_re": c.real.tolist(),
        "coeffs_im": c.imag.tolist(),
    }
    if problem == "airy":
        doc["constant_re"] = float(np.real(sol.constant))
        doc["constant_im"] = float(np.imag(sol.constant))
        doc["variant"] = job.get("variant", "rl")
    if exact is not None:
        y = sol.transform.inverse(x)
        doc["max_error"] = float(
            np.max(np.abs(vals - data_values(exact, sol.transform, y)))
        )
    storage.write_json(_outpath(args, "solution.json"), doc)
    return EXIT_OK


# ---------------------------------------------------------------------------
# eig


def cmd_eig(args) -> int:
    job = _load_job(args)
    policy = _policy_from(job, args)
    k = int(job.get("k", 6))
    try:
        res = solve_eigen(job["mu1"], job["mu2"], k, policy)
    except ConvergenceError as exc:
        storage.write_csv(
            _outpath(args, "convergence.csv"),
            ("N", "eigenvalue_change"),
            exc.history,
        )
        print(f"fracspec eig: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    storage.write_csv(
        _outpath(args, "convergence.csv"),
        ("N", "eigenvalue_change"),
        res.plateau_history,
    )
    rows = []
    for idx, (lam, resid) in enumerate(zip(res.eigenvalues, res.residuals), start=1):
        pair = "+-" if abs(lam.imag) > 1e-8 * abs(lam) else "real"
        rows.append((idx, lam.real, lam.imag, pair, resid))
    storage.write_csv(
        _outpath(args, "eigenvalues.csv"),
        ("index", "re_lambda", "im_lambda", "pair", "residual"),
        rows,
    )
    storage.write_json(
        _outpath(args, "eigenvectors.json"),
        {
            "n_final": res.n_final,
            "kind": "T",
            "transform": _transform_meta(res.transform),
            "vectors": [
                {
                    "re": res.vectors[:, j].real.tolist(),
                    "im": res.vectors[:, j].imag.tolist(),
                }
                for j in range(res.vectors.shape[1])
            ],
        },
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# pseudospectra


def cmd_pseudospectra(args) -> int:
    job_doc = _load_job(args)
    fields = {
        key: val for key, val in job_doc.items() if key not in ("notes",)
    }
    for key in ("re_range", "im_range"):
        if key in fields:
            fields[key] = tuple(fields[key])
    if args.n_max is not None:
        fields["n"] = args.n_max
    if args.tol is not None:
        fields["ritz_tol"] = args.tol
    job = PseudospectraJob(**fields)
    res = pseudospectra(job, workers=args.threads)
    bad = set(res.flagged)
    rows = []
    for i in range(job.im_count):
        for j in range(job.re_count):
            rows.append(
                (res.re[j], res.im[i], res.sigma[i, j], int((i, j) in bad))
            )
    storage.write_csv(
        _outpath(args, "pseudospectra.csv"),
        ("re_z", "im_z", "inverse_resolvent_norm", "flagged"),
        rows,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_job_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", help="name of a shipped job (%s)" % ", ".join(_PRESETS))
    group.add_argument("--job", help="path to a JSON job document")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for the parallel sections")
    p.add_argument("--n-max", type=int, default=None,
                   help="override the truncation budget (pseudospectra: the fixed n)")
    p.add_argument("--tol", type=float, default=None,
                   help="override the stopping tolerance (pseudospectra: ritz_tol)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracspec",
        description="Spectral fractional-integral operators and the shipped experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="assemble one operator matrix to disk")
    b.add_argument("--transform", choices=("de", "algebraic"), default="de")
    b.add_argument("--mu", type=float, required=True, help="operator order")
    b.add_argument("--side", choices=("left", "right", "riesz"), default="left")
    b.add_argument("--n", type=int, required=True, help="truncation degree")
    b.add_argument("--omega", type=float, default=None,
                   help="map frequency (default: matched to mu)")
    b.add_argument("--beta", type=float, default=None,
                   help="algebraic map exponent (default: min(mu, 1))")
    b.add_argument("--kernel-deg", type=int, default=None,
                   help="kernel grid degree (default: calibrated for mu)")
    b.add_argument("--out", required=True, help="binary output path")
    b.set_defaults(func=cmd_build)

    for name, func, what in (
        ("solve", cmd_solve, "solve an integral or differential equation job"),
        ("eig", cmd_eig, "run an eigenvalue job"),
        ("pseudospectra", cmd_pseudospectra, "run a pseudospectra grid job"),
    ):
        p = sub.add_parser(name, help=what)
        _add_job_flags(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConvergenceError, IllConditionedError, ArithmeticError) as exc:
        print(f"fracspec: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (TypeError, ValueError, OSError) as exc:
        print(f"fracspec: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
