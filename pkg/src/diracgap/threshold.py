"""Two-sided threshold shooting, resonance classification, and oscillation checks.

The eigenvalue equation of A = D_m + V at energy lambda is integrated as the
first-order system Psi' = i sigma_2 (m sigma_3 + V - lambda) Psi with a
fixed-step 4th-order scheme (batched 2x2 transfer matrices) under step-halving
control.  At the thresholds lambda = +-m the bounded branch is started from the
asymptotic data (1, 0) resp. (0, 1) at the point where the potential tail is
below 1e-12, and the two one-sided branches are matched at x = 0 through the
connection determinant.  The classification logic never needs more than the
one-dimensional bounded branch per side, which is what makes the matched
solution space at most one-dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .closed_forms import ModelParams, potential_M, M_prime, g_profile
from .errors import (
    AssumptionViolationError,
    BlowUpError,
    MatchingSingularityError,
    ParameterDomainError,
    SolverFailure,
)

__all__ = [
    "MatrixPotential",
    "ThresholdSolution",
    "ThresholdReport",
    "pauli_decompose",
    "gauge_symmetrize",
    "sigma1_conjugate",
    "shoot_threshold",
    "classify_threshold",
    "threshold_report",
    "wronskian_check",
    "simplicity_check",
    "count_sign_changes",
    "kneser_sup",
    "kneser_check",
    "load_potential_csv",
]

MATCH_TOL = 1e-6
BOUNDARY_LIMIT_TOL = 1e-6
BLOWUP_LIMIT = 1e8

_SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
_SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])
_ISIGMA2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class MatrixPotential:
    """2x2 matrix potential: either the closed-form Soler case or grid samples."""

    params: ModelParams | None = None
    xs: np.ndarray | None = None
    V: np.ndarray | None = None  # (n, 2, 2), complex

    @classmethod
    def soler(cls, params: ModelParams) -> "MatrixPotential":
        return cls(params=params)

    @classmethod
    def from_samples(cls, xs: np.ndarray, V: np.ndarray) -> "MatrixPotential":
        xs = np.asarray(xs, dtype=float)
        V = np.asarray(V, dtype=complex)
        if V.shape != (xs.size, 2, 2):
            raise ParameterDomainError(f"V samples must have shape (n, 2, 2), got {V.shape}")
        steps = np.diff(xs)
        if np.any(steps <= 0.0) or np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]):
            raise ParameterDomainError("potential samples must be on a uniform increasing grid")
        return cls(xs=xs, V=V)

    @property
    def is_closed_form(self) -> bool:
        return self.params is not None

    def mass(self) -> float:
        if self.is_closed_form:
            return self.params.m
        # for sampled potentials the mass is carried by the caller's D_m; default 1
        return 1.0

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Potential samples of shape x.shape + (2, 2); zero outside the sample range."""
        x = np.asarray(x, dtype=float)
        if self.is_closed_form:
            out = np.zeros(x.shape + (2, 2))
            out[..., 0, 0] = potential_M(self.params, x) - self.params.m
            out[..., 1, 1] = -out[..., 0, 0]
            return out
        out = np.zeros(x.shape + (2, 2), dtype=complex)
        inside = (x >= self.xs[0]) & (x <= self.xs[-1])
        for i in range(2):
            for j in range(2):
                spline = CubicSpline(self.xs, self.V[:, i, j])
                out[inside, i, j] = spline(x[inside])
        return out

    def tail_start(self, tol: float = 1e-12) -> float:
        """Smallest X with the integral of |V| over |x| > X below tol."""
        if self.is_closed_form:
            p = self.params
            # |V| = (p+1) g(p x) <= C exp(-2 kappa p |x|); invert the tail integral bound
            rate = 2.0 * p.kappa * p.p
            C = (p.p + 1.0) * 4.0 * (p.m - p.omega) / (1.0 - p.nu) / rate
            X = math.log(max(C, 1.0) / tol) / rate
            while (p.p + 1.0) * float(g_profile(p, p.p * X)) / rate > 0.5 * tol:
                X *= 1.25
            return X
        mag = np.linalg.norm(self.V, axis=(1, 2))
        h = self.xs[1] - self.xs[0]
        tail = np.cumsum((mag * h)[::-1])[::-1]
        idx = np.nonzero(tail < tol)[0]
        if idx.size == 0:
            return float(self.xs[-1])
        return max(1.0, abs(float(self.xs[idx[0]])))


@dataclass(frozen=True)
class PauliComponents:
    alpha0: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    alpha2_is_real: bool


def pauli_decompose(V: np.ndarray, tol: float = 1e-12) -> PauliComponents:
    """Unique coefficients of V = a0 Id + a1 s1 + a2 s2 + a3 s3 via trace inner products.

    Flags whether a2 is real-valued (the assumption behind the simplicity claims).
    """
    V = np.asarray(V, dtype=complex)
    a0 = 0.5 * (V[..., 0, 0] + V[..., 1, 1])
    a3 = 0.5 * (V[..., 0, 0] - V[..., 1, 1])
    a1 = 0.5 * (V[..., 0, 1] + V[..., 1, 0])
    a2 = 0.5j * (V[..., 0, 1] - V[..., 1, 0])
    scale = max(float(np.max(np.abs(V))), 1.0)
    real = bool(np.max(np.abs(a2.imag)) <= tol * scale)
    return PauliComponents(a0, a1, a2, a3, real)


def gauge_symmetrize(pot: MatrixPotential) -> MatrixPotential:
    """Remove the sigma_2 component by the abelian gauge exp(-i int alpha_2).

    The scalar phase commutes with the potential, so the gauged potential is
    simply V - alpha_2 sigma_2; the spectrum is untouched.  Requires alpha_2
    real (otherwise the gauge is not unitary).
    """
    if pot.is_closed_form:
        return pot
    comp = pauli_decompose(pot.V)
    if not comp.alpha2_is_real:
        raise AssumptionViolationError("alpha_2 is not real-valued; gauge is not unitary")
    V_sym = pot.V - comp.alpha2[:, None, None] * _SIGMA2[None, :, :]
    return MatrixPotential.from_samples(pot.xs, V_sym)


def sigma1_conjugate(pot: MatrixPotential) -> MatrixPotential:
    """The potential -sigma_1 V sigma_1 whose +m problem mirrors the -m problem of V."""
    if pot.is_closed_form:
        # -sigma_1 (M - m) sigma_3 sigma_1 = (M - m) sigma_3: self-conjugate
        return pot
    return MatrixPotential.from_samples(pot.xs, -np.einsum("ij,njk,kl->nil", _SIGMA1, pot.V, _SIGMA1))


@dataclass(frozen=True)
class ThresholdSolution:
    """One-sided bounded-branch solution sampled on the shared grid."""

    xs: np.ndarray
    psi: np.ndarray  # (n, 2)
    lam: float
    side: str
    x_start: float
    n_steps: int


def _transfer_matrices(pot: MatrixPotential, lam: float, xs: np.ndarray,
                       backward: bool) -> np.ndarray:
    """Batched RK4 transfer matrices between consecutive sample points."""
    m = pot.mass()
    h = float(xs[1] - xs[0])
    if backward:
        h = -h
    mids = 0.5 * (xs[:-1] + xs[1:])

    def coeff(x):
        V = pot.evaluate(np.asarray(x))
        base = m * _SIGMA3[None, :, :] + V - lam * np.eye(2)[None, :, :]
        return np.einsum("ij,njk->nik", _ISIGMA2, base)

    A0 = coeff(xs[:-1] if not backward else xs[1:])
    Am = coeff(mids)
    A1 = coeff(xs[1:] if not backward else xs[:-1])
    eye = np.eye(2, dtype=A0.dtype)[None, :, :]
    K1 = A0
    K2 = Am @ (eye + 0.5 * h * K1)
    K3 = Am @ (eye + 0.5 * h * K2)
    K4 = A1 @ (eye + h * K3)
    return eye + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


def _propagate(pot: MatrixPotential, lam: float, xs: np.ndarray, side: str,
               y0: np.ndarray) -> np.ndarray:
    backward = side == "right"
    T = _transfer_matrices(pot, lam, xs, backward)
    n = xs.size
    psi = np.empty((n, 2), dtype=T.dtype)
    if not backward:
        psi[0] = y0
        for i in range(n - 1):
            psi[i + 1] = T[i] @ psi[i]
    else:
        psi[-1] = y0
        for i in range(n - 2, -1, -1):
            psi[i] = T[i] @ psi[i + 1]
    peak = float(np.max(np.abs(psi)))
    if not np.isfinite(peak) or peak > BLOWUP_LIMIT:
        raise BlowUpError(f"solution norm reached {peak:.2e}; left the bounded branch")
    return psi


def _threshold_data(lam: float, m: float) -> np.ndarray:
    if abs(lam - m) <= 1e-12 * max(m, 1.0):
        return np.array([1.0, 0.0])
    if abs(lam + m) <= 1e-12 * max(m, 1.0):
        return np.array([0.0, 1.0])
    raise ParameterDomainError(f"threshold shooting expects lambda = +-m, got {lam}")


def shoot_threshold(pot: MatrixPotential, side: str, lam: float,
                    step_target: float = 0.01, tol: float = 1e-10,
                    max_halvings: int = 6, x_start: float | None = None) -> ThresholdSolution:
    """Integrate the bounded branch from -+X across the whole window [-X, X].

    The asymptotic initial data is (1, 0) at lambda = +m and (0, 1) at -m (the
    growing branch is excluded by construction).  The step is halved until the
    solution is stable to `tol` in the sup norm, relative to its own size.
    """
    if side not in ("left", "right"):
        raise ParameterDomainError(f"side must be 'left' or 'right', got {side!r}")
    m = pot.mass()
    y0 = _threshold_data(lam, m)
    X = x_start if x_start is not None else pot.tail_start()
    n = max(256, int(math.ceil(2.0 * X / step_target / 2.0)) * 2)
    prev = None
    for _ in range(max_halvings + 1):
        xs = np.linspace(-X, X, n + 1)
        psi = _propagate(pot, lam, xs, side, y0.astype(complex if not pot.is_closed_form else float))
        if prev is not None:
            ref = max(float(np.max(np.abs(psi))), 1.0)
            diff = float(np.max(np.abs(psi[::2] - prev[1]))) / ref
            if diff <= tol:
                return ThresholdSolution(xs, psi, lam, side, -X if side == "left" else X, n)
        prev = (xs, psi)
        n *= 2
    raise SolverFailure(f"threshold integration did not stabilize to {tol} after {max_halvings} halvings")


def wronskian_check(phi: np.ndarray, xi: np.ndarray) -> float:
    """Relative drift of det(phi | xi) along the shared grid; constant in exact math."""
    w = phi[:, 0] * xi[:, 1] - phi[:, 1] * xi[:, 0]
    w0 = w[w.size // 2]
    return float(np.max(np.abs(w - w0)) / max(1.0, abs(w0)))


def count_sign_changes(f: np.ndarray, tol: float = 0.0) -> int:
    """Strict sign changes between consecutive nonzero samples."""
    f = np.asarray(f, dtype=float)
    signs = np.sign(f[np.abs(f) > tol])
    if signs.size < 2:
        return 0
    return int(np.sum(signs[1:] * signs[:-1] < 0))


def _decay_fit(xs: np.ndarray, comp: np.ndarray, sup: float) -> tuple[float, float]:
    """Exponent and R^2 of a log-linear fit of |comp| over the last 30% of its resolvable range.

    Samples below 1e-11 of the solution sup are integration noise, not signal,
    so the fit window is the last 30% of the region above that floor.
    """
    y_all = np.abs(comp)
    floor = 1e-11 * max(sup, 1e-290)
    resolvable = np.nonzero(y_all > floor)[0]
    if resolvable.size < 16:
        return math.nan, math.nan
    x_res = xs[resolvable[-1]]
    mask = (xs >= 0.7 * x_res) & (xs <= x_res) & (y_all > floor)
    y = y_all[mask]
    x = xs[mask]
    if x.size < 8:
        return math.nan, math.nan
    ly = np.log(y)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    ss_res = float(res[0]) if res.size else float(np.sum((ly - A @ coef) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    return -float(coef[0]), r2


@dataclass(frozen=True)
class ThresholdReport:
    """Matched-threshold diagnosis at lambda = +-m (A-frame; subtract omega for the L-frame)."""

    lam: float
    l_minus: complex
    l_plus: complex
    decay_exponent: float
    decay_r2: float
    classification: str
    wronskian_drift: float
    matched: bool
    trivial_branch: bool
    det_ratio: float

    def lam_L(self, omega: float) -> float:
        return self.lam - omega


def classify_threshold(left: ThresholdSolution, right: ThresholdSolution) -> ThresholdReport:
    """Match the one-sided branches at x = 0 and classify {none | resonance | eigenvalue}.

    A match exists iff the connection determinant at 0, relative to the product
    of the branch magnitudes, is below 1e-6; colinearity at one point plus
    uniqueness of the Cauchy problem then propagates globally.  The free-case
    constant branch is reported as a trivial branch and classified 'none'.
    """
    if left.lam != right.lam or left.xs.size != right.xs.size:
        raise ParameterDomainError("branches must share the threshold energy and grid")
    lam = left.lam
    mid = left.xs.size // 2
    a = left.psi[mid]
    b = right.psi[mid]
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 and nb == 0.0:
        raise MatchingSingularityError("both branches vanish at the matching point")
    det = a[0] * b[1] - a[1] * b[0]
    det_ratio = float(abs(det) / max(na * nb, 1e-300))
    matched = det_ratio < MATCH_TOL
    drift = wronskian_check(left.psi, right.psi)

    # index of the non-decaying component at this threshold: 0 at +m, 1 at -m
    main = 0 if lam > 0 else 1
    decaying = 1 - main

    if not matched:
        return ThresholdReport(lam, complex(left.psi[0, main]), complex(right.psi[-1, main]),
                               math.nan, math.nan, "none", drift, False, False, det_ratio)

    scale = complex(np.vdot(b, a) / np.vdot(b, b))
    glob = np.vstack([left.psi[:mid], scale * right.psi[mid:]])
    sup = float(np.max(np.abs(glob)))
    l_minus = complex(glob[0, main])
    l_plus = complex(glob[-1, main])
    exponent, r2 = _decay_fit(right.xs[mid:], glob[mid:, decaying], sup)

    # trivial constant branch: no potential-induced structure at all
    trivial = (float(np.max(np.abs(glob[:, decaying]))) < 1e-10 * sup
               and float(np.max(np.abs(glob[:, main] - glob[0, main]))) < 1e-10 * sup)
    if trivial:
        classification = "none"
    elif max(abs(l_minus), abs(l_plus)) < BOUNDARY_LIMIT_TOL * sup:
        # vanishing boundary limits plus square-summability: an actual eigenvalue
        h = float(left.xs[1] - left.xs[0])
        total = float(np.sum(np.abs(glob) ** 2) * h)
        tail = float(np.sum(np.abs(glob[int(0.9 * glob.shape[0]):]) ** 2) * h)
        classification = "eigenvalue" if tail < 1e-8 * max(total, 1e-300) else "resonance"
    else:
        classification = "resonance"
    return ThresholdReport(lam, l_minus, l_plus, exponent, r2, classification,
                           drift, True, trivial, det_ratio)


def threshold_report(pot: MatrixPotential, lam: float, **kw) -> ThresholdReport:
    """Two-sided shooting plus classification in one call."""
    left = shoot_threshold(pot, "left", lam, **kw)
    right = shoot_threshold(pot, "right", lam, **kw)
    return classify_threshold(left, right)


def simplicity_check(pot: MatrixPotential, lam: float, **kw) -> int:
    """Dimension (0 or 1) of the matched bounded solution space at the threshold.

    Each side contributes a one-dimensional bounded branch, so the matched space
    can never exceed dimension one; the check verifies the sigma_2-reality
    assumption and reports whether the single candidate actually matches.
    """
    if not pot.is_closed_form:
        if not pauli_decompose(pot.V).alpha2_is_real:
            raise AssumptionViolationError("alpha_2 is not real-valued on the grid")
    report = threshold_report(pot, lam, **kw)
    return int(report.matched and not report.trivial_branch)


def kneser_sup(q1: Callable[[np.ndarray], np.ndarray], R: float, R_max: float,
               n_samples: int = 20000) -> float:
    """sup of x^2 q1(x) over [R, R_max] on a dense mixed linear/log sampling."""
    xs = np.unique(np.concatenate([
        np.linspace(R, R_max, n_samples // 2),
        np.geomspace(R, R_max, n_samples // 2),
    ]))
    return float(np.max(xs**2 * q1(xs)))


def kneser_check(params: ModelParams, lam: float, R: float) -> tuple[float, bool]:
    """Non-oscillation criterion x^2 q1(x) < 1/4 for the Schrodinger conjugates.

    q1 = lambda - M^2 -+ M' for both conjugate signs; the supremum over |x| > R
    of the worse branch is returned.  (By parity the two branches swap under
    x -> -x, so sampling x > 0 with both signs covers the whole range.)
    """
    if R <= 0.0:
        raise ParameterDomainError(f"R must be positive, got {R}")
    R_max = R + 100.0 / (params.p * params.kappa)

    def q1_minus(x):
        return lam - potential_M(params, x) ** 2 - M_prime(params, x)

    def q1_plus(x):
        return lam - potential_M(params, x) ** 2 + M_prime(params, x)

    sup = max(kneser_sup(q1_minus, R, R_max), kneser_sup(q1_plus, R, R_max))
    return sup, sup < 0.25


def load_potential_csv(path: str) -> MatrixPotential:
    """Read a sampled potential: columns x, Re/Im of the four entries (row-major)."""
    data = np.genfromtxt(path, delimiter=",", comments="#")
    if data.ndim != 2 or data.shape[1] != 9:
        raise ParameterDomainError("potential CSV needs 9 columns: x plus Re/Im of 4 entries")
    xs = data[:, 0]
    V = np.empty((xs.size, 2, 2), dtype=complex)
    for k, (i, j) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        V[:, i, j] = data[:, 1 + 2 * k] + 1j * data[:, 2 + 2 * k]
    return MatrixPotential.from_samples(xs, V)
