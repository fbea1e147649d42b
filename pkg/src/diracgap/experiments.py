"""Parameter sweeps, the emergence-rate fit, the mu-corollary counts, and the self-test.

The p-sweep resolves the extra gap eigenvalue that appears for p < 1.  Near
p = 1 the eigenvalue sits at distance ~ C (1-p)^2 from the threshold and its
eigenfunction decays at rate ~ sqrt(2 m d), so the box must grow like
1/sqrt(d); the policy bootstraps C from the first resolved record and validates
every point by an n -> 2n refinement (within 10% of the threshold distance).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .closed_forms import ModelParams, constants, potential_M
from .discretization import assemble_A, assemble_Lmu, build_grid, suspect_margin
from .errors import InsufficientDataError
from .spectral import energy_drop_check, gap_eigs
from .threshold import MatrixPotential, threshold_report

__all__ = [
    "SweepRecord",
    "MuRecord",
    "RateFit",
    "SelfTestReport",
    "sweep_p",
    "fit_rate",
    "sweep_mu",
    "selftest",
    "worker_count",
]


def worker_count() -> int:
    env = os.environ.get("DIRACGAP_WORKERS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class SweepRecord:
    """One resolved point of a parameter sweep (A-frame eigenvalues)."""

    p: float
    omega: float
    mu: float
    lambda_extra: float | None
    threshold_distance: float | None
    L: float
    n: int
    residual: float
    flag: str


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    p_range: tuple[float, float]


@dataclass(frozen=True)
class MuRecord:
    """Eigenvalue counts of L_mu in the corollary windows plus the tracked branch."""

    mu: float
    count_low: int  # eigenvalues in (-m-omega, -2 omega), exclusive margins
    count_mid: int  # eigenvalues in (-2 omega, m-omega)
    tracked: float | None  # descendant of the 0 eigenvalue (L-frame)
    slope: float | None  # Hellmann-Feynman slope of the tracked eigenvalue
    flag: str


def _resolution_policy(m: float, kappa: float, p: float, d_est: float) -> tuple[float, float]:
    """(L, h) for resolving the near-threshold eigenvalue at estimated distance d_est."""
    L_base = max(40.0 / kappa, 30.0 / (p * kappa))
    decay_length = 1.0 / math.sqrt(2.0 * m * max(d_est, 1e-12))
    L = max(L_base, min(15.0 * decay_length, 2000.0))
    h = min(0.05, decay_length / 20.0)
    return L, h


def _solve_point(params: ModelParams, L: float, h: float) -> tuple:
    n = max(1024, int(math.ceil(2.0 * L / h / 2.0)) * 2)
    grid = build_grid(L, n)
    rep = gap_eigs(assemble_A(params, grid))
    return grid, rep


def _extra_eigenvalue(rep, omega: float, m: float) -> tuple[float | None, float]:
    """Largest gap eigenvalue above the omega pair, with its residual."""
    mask = rep.eigenvalues > omega + 0.25 * (m - omega)
    if not np.any(mask):
        return None, 0.0
    idx = int(np.nonzero(mask)[0][-1])
    return float(rep.eigenvalues[idx]), float(rep.residuals[idx])


def _tail_resolved(rep, idx: int) -> bool:
    vec = rep.eigenvectors[:, idx]
    edge = max(8, vec.size // 100)
    tail = float(np.max(np.abs(np.concatenate([vec[:edge], vec[-edge:]]))))
    return tail < 1e-6 * float(np.max(np.abs(vec)))


def _sweep_one_p(m: float, omega: float, p: float, d_est: float) -> SweepRecord:
    params = ModelParams(m, omega, p)
    kappa = params.kappa
    if p >= 1.0:
        L, h = _resolution_policy(m, kappa, p, (m - omega) / 4.0)
        grid, rep = _solve_point(params, L, h)
        lam, residual = _extra_eigenvalue(rep, omega, m)
        flag = "ok" if lam is None else "unexpected-extra"
        return SweepRecord(p, omega, 0.0, None if lam is None else lam,
                           None if lam is None else m - lam,
                           grid.half_length, grid.n, residual, flag)

    lam = None
    flag = "resolution-insufficient"
    residual = 0.0
    grid = None
    for _ in range(4):
        L, h = _resolution_policy(m, kappa, p, d_est)
        grid, rep = _solve_point(params, L, h)
        lam, residual = _extra_eigenvalue(rep, omega, m)
        if lam is None:
            d_est *= 0.25  # eigenvalue closer to the threshold than estimated
            continue
        idx = int(np.argmin(np.abs(rep.eigenvalues - lam)))
        if _tail_resolved(rep, idx):
            flag = "ok"
            break
        d_est = min(d_est, (m - lam)) * 0.5
    if lam is None or flag != "ok":
        return SweepRecord(p, omega, 0.0, lam, None if lam is None else m - lam,
                           grid.half_length, grid.n, residual, "resolution-insufficient")

    # refinement validation: n -> 2n moves lambda by < 10% of the distance
    grid2, rep2 = _solve_point(params, grid.half_length, grid.h / 2.0)
    lam2, _ = _extra_eigenvalue(rep2, omega, m)
    d = m - lam
    if lam2 is None or abs(lam2 - lam) > 0.1 * d:
        flag = "refinement-unstable"
    return SweepRecord(p, omega, 0.0, lam, d, grid.half_length, grid.n, residual, flag)


def sweep_p(omega: float, p_list: list[float], m: float = 1.0,
            workers: int | None = None) -> list[SweepRecord]:
    """One record per p: extra gap eigenvalue for p < 1, its absence for p >= 1.

    The distance estimate d ~ C (1-p)^2 is calibrated from the first resolved
    record (smallest p below 1) and reused for the remaining points.
    """
    p_list = list(p_list)
    below = sorted(p for p in p_list if p < 1.0)
    coeff = None
    records: dict[float, SweepRecord] = {}
    if below:
        first = below[0]
        rec = _sweep_one_p(m, omega, first, (m - omega) * (1.0 - first) ** 2)
        records[first] = rec
        if rec.threshold_distance is not None:
            coeff = rec.threshold_distance / (1.0 - first) ** 2

    def job(p: float) -> SweepRecord:
        if p in records:
            return records[p]
        if p < 1.0 and coeff is not None:
            d_est = coeff * (1.0 - p) ** 2
        else:
            d_est = (m - omega) * max(1.0 - p, 0.05) ** 2
        return _sweep_one_p(m, omega, p, d_est)

    n_workers = workers if workers is not None else worker_count()
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            out = list(pool.map(job, p_list))
    else:
        out = [job(p) for p in p_list]
    return out


def fit_rate(records: list[SweepRecord]) -> RateFit:
    """Least-squares fit of log(threshold_distance) against log(1 - p)."""
    pts = [(r.p, r.threshold_distance) for r in records
           if r.p < 1.0 and r.threshold_distance is not None and r.flag == "ok"]
    if len(pts) < 4:
        raise InsufficientDataError(f"need >= 4 resolved records with p < 1, have {len(pts)}")
    x = np.log([1.0 - p for p, _ in pts])
    y = np.log([d for _, d in pts])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    ss_res = float(res[0]) if res.size else float(np.sum((y - A @ coef) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(coef[0]), float(coef[1]), r2, (min(p for p, _ in pts), max(p for p, _ in pts)))


def sweep_mu(params: ModelParams, mu_list: list[float],
             grid=None) -> list[MuRecord]:
    """Eigenvalue counts of L_mu in the corollary windows for each mu >= 0.

    count_low counts (-m-omega, -2 omega); count_mid counts (-2 omega, m-omega).
    The always-present eigenvalue at exactly -2 omega (whose eigenfunction is
    annihilated by Q) is excluded from both windows by the discretization
    margin.  The tracked branch descends from the 0 eigenvalue at mu = 0; its
    Hellmann-Feynman slope -<psi, Q psi>/||psi||^2 is recorded.
    """
    m, omega = params.m, params.omega
    if grid is None:
        L = max(40.0 / params.kappa, 30.0 / (params.p * params.kappa))
        grid = build_grid(L, max(2048, int(math.ceil(2.0 * L / 0.04 / 2.0)) * 2))
    l0 = assemble_Lmu(params.with_mu(0.0), grid)
    l1 = assemble_Lmu(params.with_mu(1.0), grid)
    qd, qe = l0.d - l1.d, l0.e - l1.e

    out = []
    prev_mu: float | None = None
    prev_tracked: float | None = None
    prev_slope: float | None = None
    for mu in mu_list:
        if mu < 0.0:
            raise InsufficientDataError("mu sweep is defined for mu >= 0")
        op = assemble_Lmu(params.with_mu(mu), grid)
        rep = gap_eigs(op)
        margin = max(1e-7, suspect_margin(op))
        vals = rep.eigenvalues
        low = (vals > -m - omega + margin) & (vals < -2.0 * omega - margin)
        mid = (vals > -2.0 * omega + margin) & (vals < m - omega - margin)
        flag = "ok"

        tracked = None
        slope = None
        candidates = vals[mid]
        if candidates.size:
            if prev_tracked is None:
                ref = 0.0
            else:
                # first-order prediction from the previous Hellmann-Feynman slope
                ref = prev_tracked + (prev_slope or 0.0) * (mu - (prev_mu or mu))
            j = int(np.argmin(np.abs(candidates - ref)))
            tracked = float(candidates[j])
            idx = int(np.argmin(np.abs(vals - tracked)))
            psi = rep.eigenvectors[:, idx]
            qpsi = qd * psi
            qpsi[:-1] += qe * psi[1:]
            qpsi[1:] += qe * psi[:-1]
            slope = -float(psi @ qpsi) / float(psi @ psi)
            # lost when the branch sits hard against a window boundary
            if min(tracked - (-2.0 * omega), (m - omega) - tracked) < 10.0 * margin:
                flag = "tracking-lost"
        elif prev_tracked is not None:
            flag = "tracking-lost"
        prev_mu, prev_tracked, prev_slope = mu, tracked, slope
        out.append(MuRecord(mu, int(np.sum(low)), int(np.sum(mid)), tracked, slope, flag))
    return out


@dataclass(frozen=True)
class SelfTestReport:
    checks: tuple[tuple[str, bool, str], ...]

    @property
    def all_passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def table(self) -> str:
        lines = [f"{'check':<28} {'status':<6} detail"]
        for name, ok, detail in self.checks:
            lines.append(f"{name:<28} {'PASS' if ok else 'FAIL':<6} {detail}")
        lines.append(f"overall: {'PASS' if self.all_passed else 'FAIL'}")
        return "\n".join(lines)


def selftest(m: float = 1.0, omega: float = 0.5, corrupt_g: float = 1.0) -> SelfTestReport:
    """Cross-module identity suite; corrupt_g != 1 injects a fault into the M check."""
    checks = []
    params = ModelParams(m, omega, 1.0)
    kappa = params.kappa

    # (1) the two closed forms of M agree
    xs = np.linspace(-12.0 / kappa, 12.0 / kappa, 2001)
    p15 = params.with_p(1.5)
    from .closed_forms import g_profile as _g, _potential_M_pair

    via_g = m - (p15.p + 1.0) * corrupt_g * _g(p15, p15.p * xs)
    printed = _potential_M_pair(p15, xs)[1]
    dev = float(np.max(np.abs(via_g - printed))) / m
    checks.append(("M-formula-consistency", dev <= 1e-12, f"max rel dev {dev:.2e}"))

    # (2) affine identity between assembled A matrices
    grid = build_grid(40.0 / kappa, 2048)
    Ap = assemble_A(params.with_p(1.5), grid)
    Aq = assemble_A(params.with_p(1.0), grid)
    from .discretization import staggered_positions
    from .closed_forms import potential_W

    xu, xl = staggered_positions(grid)
    xf = np.empty(2 * grid.n)
    xf[0::2], xf[1::2] = xu, xl
    sgn = np.where(np.arange(2 * grid.n) % 2 == 0, 1.0, -1.0)
    wd = sgn * potential_W(params, xf)
    dev_d = float(np.max(np.abs(Ap.d - (1.5 * Aq.d - 0.5 * wd))))
    dev_e = float(np.max(np.abs(Ap.e - 1.5 * Aq.e)))
    dev = max(dev_d, dev_e)
    checks.append(("affine-identity-A", dev <= 1e-13, f"entrywise {dev:.2e}"))

    # (3) trial-state energy identities by quadrature
    lhs, rhs = energy_drop_check(params, 0.01, 0.05)
    dev = abs(lhs - rhs) / abs(rhs)
    checks.append(("energy-drop-quadrature", dev <= 1e-8, f"rel dev {dev:.2e}"))

    # (4) threshold Wronskian drift
    rep_th = threshold_report(MatrixPotential.soler(params), m)
    checks.append(("wronskian-drift", rep_th.wronskian_drift < 1e-8,
                   f"drift {rep_th.wronskian_drift:.2e}"))

    # (5) spectrum symmetry of A_1 about 0
    from scipy.linalg import eigh_tridiagonal

    A1 = assemble_A(params, grid)
    wall = eigh_tridiagonal(A1.d, A1.e, eigvals_only=True)
    pairing = float(np.max(np.abs(wall + wall[::-1])))
    checks.append(("sigma1-spectrum-symmetry", pairing < 1e-8, f"pairing {pairing:.2e}"))

    # (6) parity labels of the gap pair
    rep = gap_eigs(A1)
    ok = tuple(rep.parities) == ("-", "+") and rep.eigenvalues.size == 2
    checks.append(("gap-pair-parities", ok, f"labels {rep.parities}"))

    # (7) refinement order of the omega eigenvalue
    vals = []
    for n in (1024, 2048, 4096, 8192):
        g = build_grid(40.0 / kappa, n)
        r = gap_eigs(assemble_A(params, g), window=(0.25 * omega, 0.5 * (omega + m)))
        vals.append(r.eigenvalues[0])
    diffs = np.abs(np.diff(vals))
    orders = np.log2(diffs[:-1] / diffs[1:])
    ok = bool(np.all(np.abs(orders - 2.0) <= 0.3))
    checks.append(("refinement-order", ok, f"orders {np.round(orders, 3)}"))

    # (8) M' against central finite differences
    xs = np.linspace(-6.0, 6.0, 101)
    from .closed_forms import M_prime as _Mp

    fd = (potential_M(p15, xs + 1e-5) - potential_M(p15, xs - 1e-5)) / 2e-5
    dev = float(np.max(np.abs(fd - _Mp(p15, xs))))
    checks.append(("M-prime-fd", dev < 1e-8, f"max dev {dev:.2e}"))

    # (9) resonance constants against their printed closed forms
    rep_c = constants(params)
    dev = max(abs(rep_c.c_inf - rep_c.closed_form_c_inf),
              abs(rep_c.psi_inf_sup - rep_c.closed_form_psi_sup))
    checks.append(("printed-constants", dev < 1e-8,
                   f"dev {dev:.2e}; E-form supported: {rep_c.e_star_supported_form}"))

    return SelfTestReport(tuple(checks))
