"""
Line-broadening function of an overdamped Brownian oscillator (Drude-Lorentz)
bath and the second-order cumulant lineshape factors.

    J(w) = 2 lambda0 w gamma0 / (w^2 + gamma0^2)

    g(t) = (lambda0/gamma0) cot(beta gamma0 / 2) [e^(-gamma0 t) + gamma0 t - 1]
         + (4 lambda0 gamma0 / beta) sum_n [e^(-nu_n t) + nu_n t - 1] / (nu_n (nu_n^2 - gamma0^2))
         - i (lambda0/gamma0) [e^(-gamma0 t) + gamma0 t - 1]

with Matsubara frequencies nu_n = 2 pi n / beta. Times in fs, rates in rad/fs.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import special

from polaring.errors import ConfigError
from polaring.units import BOLTZMANN_CM1_PER_K, CM1_TO_RAD_PER_FS

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA0 = 100.0
DEFAULT_GAMMA0 = 35.0
DEFAULT_TEMPERATURE = 77.0
DEFAULT_MATSUBARA_TOL = 1e-8
DEFAULT_MATSUBARA_MAX = 10_000
MATSUBARA_CHUNK = 512


@dataclass(frozen=True)
class BathLineshapeParams:
    """Drude-Lorentz bath: lambda0 and gamma0 in cm⁻¹, temperature in K."""
    lambda0: float = DEFAULT_LAMBDA0
    gamma0: float = DEFAULT_GAMMA0
    temperature: float = DEFAULT_TEMPERATURE
    matsubara_tol: float = DEFAULT_MATSUBARA_TOL
    matsubara_max: int = DEFAULT_MATSUBARA_MAX

    def __post_init__(self):
        if not self.lambda0 >= 0.0:
            raise ConfigError(f"lambda0 must be >= 0, got {self.lambda0}", "lineshape", "lambda0_cm1", "cm-1")
        if not self.gamma0 > 0.0:
            raise ConfigError(f"gamma0 must be positive, got {self.gamma0}", "lineshape", "gamma0_cm1", "cm-1")
        if not (self.temperature > 0.0 and math.isfinite(self.temperature)):
            raise ConfigError(
                f"temperature must be positive, got {self.temperature}", "lineshape", "temperature_k", "K"
            )
        if not self.matsubara_tol > 0.0:
            raise ConfigError("matsubara_tol must be positive", "lineshape", "matsubara_tol")
        if self.matsubara_max < 1:
            raise ConfigError("matsubara_max must be >= 1", "lineshape", "matsubara_max")
        ratio = self.beta * self.gamma_rad / (2.0 * math.pi)
        if abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1:
            raise ConfigError(
                "gamma0 coincides with a Matsubara frequency", "lineshape", "gamma0_cm1", "cm-1"
            )

    @property
    def lambda_rad(self) -> float:
        return self.lambda0 * CM1_TO_RAD_PER_FS

    @property
    def gamma_rad(self) -> float:
        return self.gamma0 * CM1_TO_RAD_PER_FS

    @property
    def beta(self) -> float:
        """hbar / k_B T in fs."""
        return 1.0 / (BOLTZMANN_CM1_PER_K * self.temperature * CM1_TO_RAD_PER_FS)

    def matsubara(self, n: np.ndarray) -> np.ndarray:
        return 2.0 * math.pi * np.asarray(n, dtype=float) / self.beta


def _matsubara_tail(t: np.ndarray, p: BathLineshapeParams, last: int) -> np.ndarray:
    """
    Terms n > last in closed form, dropping e^(-nu_n t):
    sum (nu t - 1)(1/nu^3 + gamma^2/nu^5) over Hurwitz zeta sums.
    """
    scale = p.beta / (2.0 * math.pi)
    a = last + 1
    inv2 = scale**2 * special.polygamma(1, a)
    inv3 = scale**3 * special.zeta(3, a)
    inv4 = scale**4 * special.zeta(4, a)
    inv5 = scale**5 * special.zeta(5, a)
    g2 = p.gamma_rad**2
    return np.where(t > 0.0, t * (inv2 + g2 * inv4) - (inv3 + g2 * inv5), 0.0)


def matsubara_sum(t: np.ndarray, p: BathLineshapeParams) -> Tuple[np.ndarray, int, float]:
    """
    sum_n [e^(-nu_n t) + nu_n t - 1] / (nu_n (nu_n^2 - gamma0^2)) for every t.

    Returns:
        (sums, terms used, achieved relative size of the last term)
    """
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    gamma = p.gamma_rad
    used = 0
    achieved = math.inf
    while used < p.matsubara_max:
        n = np.arange(used + 1, min(used + MATSUBARA_CHUNK, p.matsubara_max) + 1)
        nu = p.matsubara(n)
        x = nu[None, :] * t.reshape(-1, 1)
        terms = (np.expm1(-x) + x) / (nu * (nu**2 - gamma**2))[None, :]
        total += terms.sum(axis=1).reshape(t.shape)
        used = int(n[-1])
        scale = np.maximum(np.abs(total).reshape(-1), np.finfo(float).tiny)
        achieved = float(np.max(np.abs(terms[:, -1]) / scale))
        if achieved < p.matsubara_tol:
            break
    else:
        logger.warning(
            "Matsubara sum capped at %d terms with relative term size %.2e (tolerance %.0e)",
            used,
            achieved,
            p.matsubara_tol,
        )
    return total + _matsubara_tail(t, p, used), used, achieved


def lineshape_g(t, p: BathLineshapeParams) -> np.ndarray:
    """
    g(t) for t >= 0 (fs); returns a complex scalar or array.

    Raises:
        ValueError: for negative times
    """
    times = np.asarray(t, dtype=float)
    if np.any(times < 0.0):
        raise ValueError("line-broadening function is defined for t >= 0")
    if p.lambda0 == 0.0:
        out = np.zeros(times.shape, dtype=complex)
        return complex(out) if out.ndim == 0 else out

    lam, gamma, beta = p.lambda_rad, p.gamma_rad, p.beta
    bracket = np.expm1(-gamma * times) + gamma * times
    cot = 1.0 / math.tan(0.5 * beta * gamma)
    sums, _, _ = matsubara_sum(times.reshape(-1), p)
    real = (lam / gamma) * cot * bracket + (4.0 * lam * gamma / beta) * sums.reshape(times.shape)
    out = real - 1j * (lam / gamma) * bracket
    return complex(out) if out.ndim == 0 else out


def factors_from_g(g_t, g_tau, g_tw, g_tw_t, g_tau_tw, g_tau_tw_t):
    """F1..F4 from g at t, tau, T_w, T_w+t, tau+T_w and tau+T_w+t."""
    c = np.conj
    f1 = np.exp(-c(g_t) - g_tau - c(g_tw) + c(g_tw_t) + g_tau_tw - g_tau_tw_t)
    f2 = np.exp(-c(g_t) - c(g_tau) + g_tw - g_tw_t - c(g_tau_tw) + c(g_tau_tw_t))
    f3 = np.exp(-g_t - c(g_tau) + c(g_tw) - c(g_tw_t) - c(g_tau_tw) + c(g_tau_tw_t))
    f4 = np.exp(-g_t - g_tau - g_tw + g_tw_t + g_tau_tw - g_tau_tw_t)
    return f1, f2, f3, f4


def lineshape_factors(tau, t_w, t, p: BathLineshapeParams):
    """The four lineshape factors at (tau, T_w, t) in fs; arrays broadcast."""
    tau, t_w, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (tau, t_w, t)))
    args = (t, tau, t_w, t_w + t, tau + t_w, tau + t_w + t)
    unique, inverse = np.unique(np.concatenate([a.reshape(-1) for a in args]), return_inverse=True)
    g_unique = np.atleast_1d(lineshape_g(unique, p))
    size = t.size
    gs = [g_unique[inverse[i * size:(i + 1) * size]].reshape(t.shape) for i in range(len(args))]
    factors = factors_from_g(*gs)
    if t.ndim == 0:
        return tuple(complex(f) for f in factors)
    return factors
