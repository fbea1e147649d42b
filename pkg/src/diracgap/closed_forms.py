"""Closed-form profiles and constants of the solitary-wave linearization.

Everything here is a pure function of the model parameters (mass m, frequency
omega, nonlinearity power p) and the position x.  The central object is the
p-independent profile

    g(x) = (m - omega) * (1 - tanh^2(kappa x)) / (1 - nu * tanh^2(kappa x)),

with kappa = sqrt(m^2 - omega^2) and nu = (m - omega)/(m + omega), from which
the potentials W = m - g and M = m - (p+1) g(p .), the solitary-wave spinor
(v, u), the threshold resonance state, trial states, the threshold energy
density and the associated constants are all derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ConsistencyError, ParameterDomainError, ReconstructionError
from .quadrature import quad_even

__all__ = [
    "ModelParams",
    "Spinor",
    "ConstantsReport",
    "derived_params",
    "g_profile",
    "g_prime",
    "potential_W",
    "potential_M",
    "M_prime",
    "soliton_scalar",
    "solitary_wave",
    "resonance_state",
    "trial_state",
    "energy_density",
    "hat_psi",
    "q_matrix",
    "constants",
]


def derived_params(m: float, omega: float) -> tuple[float, float]:
    """Return (kappa, nu) = (sqrt(m^2 - omega^2), (m - omega)/(m + omega))."""
    if not (m > 0.0 and 0.0 < omega < m):
        raise ParameterDomainError(f"need 0 < omega < m, got m={m}, omega={omega}")
    return math.sqrt((m - omega) * (m + omega)), (m - omega) / (m + omega)


@dataclass(frozen=True)
class ModelParams:
    """Model parameters (m, omega, p, mu) with derived kappa, nu."""

    m: float = 1.0
    omega: float = 0.5
    p: float = 1.0
    mu: float = 0.0
    kappa: float = field(init=False)
    nu: float = field(init=False)

    def __post_init__(self) -> None:
        if self.p <= 0.0:
            raise ParameterDomainError(f"nonlinearity power must be positive, got p={self.p}")
        kappa, nu = derived_params(self.m, self.omega)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "nu", nu)

    def with_p(self, p: float) -> "ModelParams":
        return ModelParams(m=self.m, omega=self.omega, p=p, mu=self.mu)

    def with_mu(self, mu: float) -> "ModelParams":
        return ModelParams(m=self.m, omega=self.omega, p=self.p, mu=mu)


@dataclass(frozen=True)
class Spinor:
    """Two-component field value(s); c1 is the upper component."""

    c1: np.ndarray
    c2: np.ndarray

    def swap(self) -> "Spinor":
        """Apply sigma_1 (exchange components)."""
        return Spinor(self.c2, self.c1)

    def norm_sq(self) -> np.ndarray:
        return np.abs(self.c1) ** 2 + np.abs(self.c2) ** 2


def _sech2(z: np.ndarray) -> np.ndarray:
    """1 - tanh^2(z), evaluated as 4 exp(-2|z|) beyond |z| = 20 to avoid cancellation."""
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    small = az <= 20.0
    out = np.empty_like(az)
    out[small] = 1.0 / np.cosh(z[small]) ** 2
    out[~small] = 4.0 * np.exp(-2.0 * az[~small])
    return out


def g_profile(params: ModelParams, x) -> np.ndarray:
    """Profile g(x) in (0, m - omega]; even, g(0) = m - omega, independent of p."""
    t2 = np.tanh(params.kappa * np.asarray(x, dtype=float)) ** 2
    return (params.m - params.omega) * _sech2(params.kappa * np.asarray(x, dtype=float)) / (1.0 - params.nu * t2)


def g_prime(params: ModelParams, x) -> np.ndarray:
    """Derivative of g; odd, negative for x > 0."""
    x = np.asarray(x, dtype=float)
    t = np.tanh(params.kappa * x)
    den = 1.0 - params.nu * t * t
    return (
        -2.0
        * params.kappa
        * (params.m - params.omega)
        * (1.0 - params.nu)
        * t
        * _sech2(params.kappa * x)
        / den**2
    )


def potential_W(params: ModelParams, x) -> np.ndarray:
    """W = m - g; even, W(0) = omega, increasing to m on [0, inf)."""
    return params.m - g_profile(params, x)


def _potential_M_pair(params: ModelParams, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    via_g = params.m - (params.p + 1.0) * g_profile(params, params.p * x)
    t2 = np.tanh(params.p * params.kappa * x) ** 2
    printed = params.m - 2.0 * params.m * (params.p + 1.0) * (params.nu / (1.0 + params.nu)) * _sech2(
        params.p * params.kappa * x
    ) / (1.0 - params.nu * t2)
    return via_g, printed


def potential_M(params: ModelParams, x) -> np.ndarray:
    """Mass profile M(x) = m - (p+1) g(p x), cross-checked against its tanh form.

    The two evaluations are algebraically identical (2 m nu / (1 + nu) = m - omega);
    they must agree to 1e-12 relative or the evaluation is rejected.
    """
    via_g, printed = _potential_M_pair(params, x)
    scale = max(float(np.max(np.abs(via_g))), params.m)
    worst = float(np.max(np.abs(via_g - printed)))
    if worst > 1e-12 * scale:
        raise ConsistencyError(f"M-formula mismatch: {worst:.3e} relative to {scale:.3e}")
    return via_g


def M_prime(params: ModelParams, x) -> np.ndarray:
    """Derivative of M; odd, sign(M') = sign(x), decays exponentially.

    Equals p*kappa times the tanh-product form of the potential's derivative
    (the chain rule through tanh(p kappa x) contributes the p*kappa factor).
    """
    x = np.asarray(x, dtype=float)
    t = np.tanh(params.p * params.kappa * x)
    den = 1.0 - params.nu * t * t
    coeff = (
        params.p
        * params.kappa
        * 4.0
        * params.m
        * (params.p + 1.0)
        * params.nu
        * (1.0 - params.nu)
        / (1.0 + params.nu)
    )
    return coeff * _sech2(params.p * params.kappa * x) * t / den**2


def soliton_scalar(params: ModelParams, x) -> np.ndarray:
    """S(x) = v^2 - u^2 = ((p+1) g(p x))^(1/p); positive, even, exponentially decaying."""
    base = (params.p + 1.0) * g_profile(params, params.p * x)
    return base ** (1.0 / params.p)


def _uv_over_S(params: ModelParams, x) -> np.ndarray:
    # uv/S = -S'/(4 omega S) = -g'(px)/(4 omega g(px)); the g-ratio is stable for all x
    t = np.tanh(params.p * params.kappa * np.asarray(x, dtype=float))
    return params.kappa * (1.0 - params.nu) * t / (2.0 * params.omega * (1.0 - params.nu * t * t))


def solitary_wave(params: ModelParams, x) -> Spinor:
    """Solitary-wave spinor (v, u): v even positive, u odd.

    Reconstructed from the scalar invariants S = v^2 - u^2 and uv = -S'/(4 omega)
    via v^2 = (S + sqrt(S^2 + 4 (uv)^2))/2, u = (uv)/v.
    """
    S = soliton_scalar(params, x)
    r = _uv_over_S(params, x)
    v2 = S * 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * r * r))
    if np.any(v2 < 0.0) or not np.all(np.isfinite(v2)):
        raise ReconstructionError("v^2 reconstruction produced negative or non-finite values")
    v = np.sqrt(v2)
    with np.errstate(invalid="ignore"):
        u = np.where(v > 0.0, r * S / np.where(v > 0.0, v, 1.0), 0.0)
    return Spinor(v, u)


def resonance_state(params: ModelParams, x, side: str = "+") -> Spinor:
    """Threshold resonance state of the p = 1 operator at lambda = side * m.

    side='+' returns (psi1, psi2) with psi1 odd tending to +-sqrt(nu)/(1-nu) and
    psi2 even in [-nu/(1-nu), 0); side='-' returns the component swap (sigma_1).
    """
    if abs(params.p - 1.0) > 1e-12:
        raise ParameterDomainError(f"resonance closed forms hold for p = 1, got p={params.p}")
    if side not in ("+", "-"):
        raise ParameterDomainError(f"side must be '+' or '-', got {side!r}")
    x = np.asarray(x, dtype=float)
    t = np.tanh(params.kappa * x)
    den = 1.0 - params.nu * t * t
    psi1 = math.sqrt(params.nu) * t / den
    psi2 = -(params.nu / (1.0 - params.nu)) * _sech2(params.kappa * x) / den
    state = Spinor(psi1, psi2)
    return state if side == "+" else state.swap()


def trial_state(params: ModelParams, delta: float, x) -> Spinor:
    """Trial state sqrt(delta) exp(-delta |x|) times the resonance state (p = 1)."""
    if delta <= 0.0:
        raise ParameterDomainError(f"delta must be positive, got {delta}")
    x = np.asarray(x, dtype=float)
    eta = math.sqrt(delta) * np.exp(-delta * np.abs(x))
    psi = resonance_state(params, x, "+")
    return Spinor(eta * psi.c1, eta * psi.c2)


def energy_density(params: ModelParams, x) -> np.ndarray:
    """Threshold energy density m |psi|^2 - W <psi, sigma_3 psi>; strictly positive.

    Computed both from the defining form and from the expanded form
    (2m - g) psi2^2 + g psi1^2; the two must agree to 1e-12 relative.
    """
    psi = resonance_state(params, x, "+")
    g = g_profile(params, x)
    W = params.m - g
    defining = params.m * (psi.c1**2 + psi.c2**2) - W * (psi.c1**2 - psi.c2**2)
    expanded = (2.0 * params.m - g) * psi.c2**2 + g * psi.c1**2
    # the defining form cancels two O(m |psi|^2) terms in the tail, so compare
    # relative to that scale, and return the cancellation-free expanded form
    scale = params.m * max(float(np.max(psi.norm_sq())), 1e-300)
    worst = float(np.max(np.abs(defining - expanded)))
    if worst > 1e-12 * scale:
        raise ConsistencyError(f"energy-density forms disagree by {worst:.3e} (scale {scale:.3e})")
    return expanded


def hat_psi(params: ModelParams, x) -> Spinor:
    """The square-integrable field g' sigma_1 psi + 2 m W (1 - sigma_3) psi - 4 g W psi at p = 1."""
    psi = resonance_state(params, x, "+")
    g = g_profile(params, x)
    gp = g_prime(params, x)
    W = params.m - g
    h1 = gp * psi.c2 - 4.0 * g * W * psi.c1
    h2 = gp * psi.c1 + 4.0 * params.m * W * psi.c2 - 4.0 * g * W * psi.c2
    return Spinor(h1, h2)


def q_matrix(params: ModelParams, x) -> np.ndarray:
    """Rank-one coupling matrix Q(x) = p S^(p-1) [[v^2, -uv], [-uv, u^2]].

    Returned with shape (..., 2, 2).  Entries are evaluated through the stable
    ratios v^2/S, u^2/S and uv/S so that p < 1 tails neither overflow nor lose
    positivity; S^p = (p+1) g(p x) is used exactly.
    """
    x = np.asarray(x, dtype=float)
    q = params.p * (params.p + 1.0) * g_profile(params, params.p * x)
    r = _uv_over_S(params, x)
    s = np.sqrt(1.0 + 4.0 * r * r)
    rv = 0.5 * (1.0 + s)
    ru = 0.5 * (s - 1.0)
    out = np.empty(np.shape(x) + (2, 2), dtype=float)
    out[..., 0, 0] = q * rv
    out[..., 0, 1] = -q * r
    out[..., 1, 0] = -q * r
    out[..., 1, 1] = q * ru
    return out


@dataclass(frozen=True)
class ConstantsReport:
    """Numerically computed resonance constants next to their printed closed forms.

    e_star_supported_form records which of the two mutually inconsistent printed
    values ('norm_l1' or 'e_star') the quadrature actually supports; neither is
    assumed as ground truth.
    """

    c_inf: float
    psi_inf_sup: float
    E_l1: float
    E_star: float
    closed_form_c_inf: float
    closed_form_psi_sup: float
    closed_form_E_l1: float
    closed_form_E_star: float
    e_star_supported_form: str

    def __post_init__(self) -> None:
        if self.c_inf <= 0.0:
            raise ConsistencyError("c_inf must be positive")
        if abs(self.E_star - self.E_l1 / self.psi_inf_sup**2) > 1e-12 * max(self.E_star, 1.0):
            raise ConsistencyError("E_star must equal E_l1 / psi_inf_sup^2 by construction")


def _extremize_abs_psi_sq(params: ModelParams, minimize: bool) -> float:
    def f(x):
        return float(resonance_state(params, np.asarray(x), "+").norm_sq())

    x_max = 60.0 / params.kappa
    xs = np.linspace(0.0, x_max, 4001)
    vals = resonance_state(params, xs, "+").norm_sq()
    idx = int(np.argmin(vals) if minimize else np.argmax(vals))
    lo = xs[max(idx - 1, 0)]
    hi = xs[min(idx + 1, xs.size - 1)]
    sgn = 1.0 if minimize else -1.0
    if idx in (0, xs.size - 1):
        # extremum sits at the scan boundary (e.g. sup approached as |x| -> inf)
        return f(xs[idx])
    res = optimize.minimize_scalar(lambda x: sgn * f(x), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return sgn * float(res.fun)


def constants(params: ModelParams, rtol: float = 1e-10) -> ConstantsReport:
    """Compute c_inf, ||psi_inf||_inf, ||E||_1 and E_star numerically.

    The printed closed forms are attached for comparison only.  The printed
    pair (||E||_1, E_star) is mutually inconsistent with the defining relation
    E_star = ||E||_1 / ||psi_inf||_inf^2, so the report states which one the
    quadrature supports instead of asserting either.
    """
    if abs(params.p - 1.0) > 1e-12:
        raise ParameterDomainError("resonance constants are defined for p = 1")
    m, omega, kappa, nu = params.m, params.omega, params.kappa, params.nu

    c_inf = _extremize_abs_psi_sq(params, minimize=True)
    psi_sup_sq = _extremize_abs_psi_sq(params, minimize=False)
    psi_inf_sup = math.sqrt(psi_sup_sq)

    x_cut = 45.0 / kappa
    E_l1 = quad_even(lambda x: energy_density(params, x), x_cut, rtol=rtol, core=5.0 / kappa)
    E_star = E_l1 / psi_sup_sq

    if omega <= m / 2.0:
        cf_c_inf = (m * m - 2.0 * omega * omega) / (8.0 * omega * omega)
    else:
        cf_c_inf = (m - omega) ** 2 / (4.0 * omega * omega)
    cf_psi_sup = kappa / (2.0 * omega)
    log_term = math.log((m + kappa) / omega)
    cf_E_l1 = (kappa / (2.0 * omega)) ** 2 * log_term
    cf_E_star = (kappa / (2.0 * omega)) * log_term

    # which printed form does the quadrature support?
    dev_l1 = abs(E_l1 - cf_E_l1) / cf_E_l1
    dev_estar = abs(E_star - cf_E_star) / cf_E_star
    supported = "norm_l1" if dev_l1 <= dev_estar else "e_star"

    return ConstantsReport(
        c_inf=c_inf,
        psi_inf_sup=psi_inf_sup,
        E_l1=E_l1,
        E_star=E_star,
        closed_form_c_inf=cf_c_inf,
        closed_form_psi_sup=cf_psi_sup,
        closed_form_E_l1=cf_E_l1,
        closed_form_E_star=cf_E_star,
        e_star_supported_form=supported,
    )
