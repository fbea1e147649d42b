"""Command-line interface.

Subcommands: profiles, spectrum, sweep-p, sweep-mu, threshold, minmax, selftest.
Exit codes: 0 success, 2 invalid arguments, 3 numerical failure, 4 assumption
violation (sigma_2 component not real).  Output is CSV (fixed headers) or a
JSON mirror with the same field names; identical invocations produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .closed_forms import (
    ModelParams,
    energy_density,
    g_profile,
    M_prime,
    potential_M,
    potential_W,
    resonance_state,
    solitary_wave,
)
from .discretization import assemble_A, assemble_Lmu, build_grid, dump_matrix
from .errors import AssumptionViolationError, DiracGapError, ParameterDomainError
from .experiments import fit_rate, selftest, sweep_mu, sweep_p, worker_count
from .spectral import gamma_bound, gap_eigs
from .threshold import MatrixPotential, load_potential_csv, threshold_report

SWEEP_HEADER = "p,omega,mu,lambda_extra,threshold_distance,L,n,residual,flag"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_rows(path: str | None, header: str, rows: list[list], fmt: str) -> None:
    names = header.split(",")
    if fmt == "csv":
        text = header + "\n" + "\n".join(",".join(_fmt(v) for v in row) for row in rows)
        text += "\n"
    else:
        payload = [dict(zip(names, row)) for row in rows]
        text = json.dumps(payload, indent=2, sort_keys=True, default=_fmt) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _grid_from_args(params: ModelParams, args) -> "Grid":
    L = args.xmax if args.xmax is not None else 40.0 / params.kappa
    return build_grid(L, args.n)


def cmd_profiles(args) -> int:
    params = ModelParams(args.m, args.omega, args.p, args.mu)
    xs = np.linspace(-(args.xmax or 40.0 / params.kappa), args.xmax or 40.0 / params.kappa, args.n)
    cols: dict[str, np.ndarray] = {
        "x": xs,
        "g": g_profile(params, xs),
        "W": potential_W(params, xs),
        "M": potential_M(params, xs),
        "M_prime": M_prime(params, xs),
    }
    wave = solitary_wave(params, xs)
    cols["v"] = wave.c1
    cols["u"] = wave.c2
    if abs(params.p - 1.0) <= 1e-12:
        res = resonance_state(params, xs, "+")
        cols["psi1_inf"] = res.c1
        cols["psi2_inf"] = res.c2
        cols["energy_density"] = energy_density(params, xs)
    if args.emit_plot_data:
        if args.quantity not in cols:
            raise ParameterDomainError(f"unknown quantity {args.quantity!r}; have {sorted(cols)}")
        rows = [[float(x), float(y)] for x, y in zip(xs, cols[args.quantity])]
        _write_rows(args.out, f"x,{args.quantity}", rows, args.format)
        return 0
    header = ",".join(cols)
    rows = [[float(c[i]) for c in cols.values()] for i in range(xs.size)]
    _write_rows(args.out, header, rows, args.format)
    return 0


def cmd_spectrum(args) -> int:
    params = ModelParams(args.m, args.omega, args.p, args.mu)
    grid = _grid_from_args(params, args)
    op = assemble_Lmu(params, grid) if args.operator == "L" else assemble_A(params, grid)
    if args.dump_matrix:
        dump_matrix(op, args.dump_matrix)
    rep = gap_eigs(op)
    rows = [
        [float(rep.eigenvalues[i]), float(rep.residuals[i]), rep.parities[i],
         bool(rep.suspect_flags[i]), grid.half_length, grid.n]
        for i in range(rep.eigenvalues.size)
    ]
    _write_rows(args.out, "lambda,residual,parity,suspect,L,n", rows, args.format)
    return 0


def cmd_sweep_p(args) -> int:
    p_list = [float(tok) for tok in args.p_list.split(",") if tok]
    records = sweep_p(args.omega, p_list, m=args.m, workers=worker_count())
    rows = [[r.p, r.omega, r.mu, r.lambda_extra, r.threshold_distance,
             r.L, r.n, r.residual, r.flag] for r in records]
    _write_rows(args.out, SWEEP_HEADER, rows, args.format)
    resolved = [r for r in records if r.p < 1.0 and r.flag == "ok"]
    if args.fit and len(resolved) >= 4:
        fit = fit_rate(records)
        sys.stderr.write(f"rate fit: slope={fit.slope:.4f} r2={fit.r_squared:.6f}\n")
    return 0


def cmd_sweep_mu(args) -> int:
    params = ModelParams(args.m, args.omega, args.p)
    mu_list = [float(tok) for tok in args.mu_list.split(",") if tok]
    records = sweep_mu(params, mu_list)
    rows = []
    for r in records:
        lam = r.tracked
        dist = None if lam is None else (params.m - params.omega) - lam
        rows.append([params.p, params.omega, r.mu, lam, dist, 0.0, 0,
                     0.0, f"{r.flag};low={r.count_low};mid={r.count_mid}"])
    _write_rows(args.out, SWEEP_HEADER, rows, args.format)
    return 0


def cmd_threshold(args) -> int:
    params = ModelParams(args.m, args.omega, args.p)
    if args.potential_csv:
        pot = load_potential_csv(args.potential_csv)
        m_val = 1.0
    else:
        pot = MatrixPotential.soler(params)
        m_val = params.m
    lams = {"plus": [m_val], "minus": [-m_val], "both": [m_val, -m_val]}[args.side]
    rows = []
    for lam in lams:
        rep = threshold_report(pot, lam)
        rows.append([lam, rep.classification, abs(rep.l_minus), abs(rep.l_plus),
                     rep.decay_exponent, rep.wronskian_drift, rep.matched, rep.trivial_branch])
    _write_rows(args.out, "lambda,classification,l_minus,l_plus,decay_exponent,wronskian_drift,matched,trivial",
                rows, args.format)
    return 0


def cmd_minmax(args) -> int:
    params = ModelParams(args.m, args.omega, 1.0)
    rep = gamma_bound(params, args.eps, args.alpha)
    rows = [[rep.epsilon, rep.delta, rep.alpha, rep.gamma0, rep.gamma1_upper,
             rep.drop, rep.lambda_lower_check, rep.grid.half_length, rep.grid.n]]
    _write_rows(args.out, "eps,delta,alpha,gamma0,gamma1_upper,drop,lambda_lower_check,L,n",
                rows, args.format)
    return 0


def cmd_selftest(args) -> int:
    rep = selftest(args.m, args.omega)
    sys.stdout.write(rep.table() + "\n")
    return 0 if rep.all_passed else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diracgap",
                                     description="Spectral toolkit for solitary-wave Dirac operators")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--m", type=float, default=1.0)
        sp.add_argument("--omega", type=float, default=0.5)
        sp.add_argument("--p", type=float, default=1.0)
        sp.add_argument("--mu", type=float, default=0.0)
        sp.add_argument("--xmax", type=float, default=None)
        sp.add_argument("--n", type=int, default=4096)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("profiles", help="dump closed-form profiles on a grid")
    common(sp)
    sp.add_argument("--emit-plot-data", action="store_true")
    sp.add_argument("--quantity", type=str, default="g")
    sp.set_defaults(func=cmd_profiles)

    sp = sub.add_parser("spectrum", help="gap eigenvalues of A_p or L_mu")
    common(sp)
    sp.add_argument("--operator", choices=("A", "L"), default="A")
    sp.add_argument("--dump-matrix", type=str, default=None)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("sweep-p", help="extra-eigenvalue sweep over p")
    common(sp)
    sp.add_argument("--p-list", type=str, required=True)
    sp.add_argument("--fit", action="store_true")
    sp.set_defaults(func=cmd_sweep_p)

    sp = sub.add_parser("sweep-mu", help="corollary counts over mu")
    common(sp)
    sp.add_argument("--mu-list", type=str, required=True)
    sp.set_defaults(func=cmd_sweep_mu)

    sp = sub.add_parser("threshold", help="threshold shooting classification")
    common(sp)
    sp.add_argument("--side", choices=("plus", "minus", "both"), default="both")
    sp.add_argument("--potential-csv", type=str, default=None)
    sp.set_defaults(func=cmd_threshold)

    sp = sub.add_parser("minmax", help="trial-state min-max bound")
    common(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--alpha", type=float, default=0.25)
    sp.set_defaults(func=cmd_minmax)

    sp = sub.add_parser("selftest", help="cross-module identity suite")
    common(sp)
    sp.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterDomainError as exc:
        sys.stderr.write(f"invalid arguments: {exc}\n")
        return 2
    except AssumptionViolationError as exc:
        sys.stderr.write(f"assumption violation: {exc}\n")
        return 4
    except DiracGapError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
