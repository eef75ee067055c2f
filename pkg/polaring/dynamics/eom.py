"""
Dirac-Frenkel equations of motion for the D1 ansatz (hbar = 1, rad/fs).

    dalpha_n/dt = -i sum_m K_nm S_nm alpha_m + i alpha_n R_n
    dlam_nq/dt  =  i [ Omega_nq/alpha_n + c_nq - omega_q lam_nq ]

    Omega_nq = -sum_m alpha_m K_nm S_nm (lam_mq - lam_nq)
    R_n      = Re sum_q (c_nq - Omega_nq/alpha_n) lam_nq^*
    c_nq     = g_q omega_q e^(-iqn) / sqrt(N)

The quotient Omega/alpha is regularized as Omega alpha^* / (|alpha|^2 + eps).
A sink adds -(gamma/2) sum_m Q_nm S_nm alpha_m to dalpha_n/dt.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from polaring.dynamics.state import D1State, SinkSpec
from polaring.errors import IntegrationError
from polaring.model.bath import PhononBath
from polaring.model.exciton import ExcitonMatrix
from polaring.units import CM1_TO_RAD_PER_FS

DEFAULT_EPS = 1e-8


def debye_waller_matrix(lam: np.ndarray) -> np.ndarray:
    """
    Coherent-state overlaps S_nm = <lam_n|lam_m> for every site pair.

    S_nm = exp( sum_q lam_nq^* lam_mq - |lam_n|^2/2 - |lam_m|^2/2 ), with the
    diagonal pinned to 1.
    """
    gram = np.einsum("...nq,...mq->...nm", lam.conj(), lam)
    diag = np.arange(lam.shape[-2])
    norms = gram[..., diag, diag].real
    s = np.exp(gram - 0.5 * norms[..., :, None] - 0.5 * norms[..., None, :])
    s[..., diag, diag] = 1.0
    return s


def debye_waller(state: D1State, n: int, m: int) -> complex:
    """S_nm of a single (unbatched) state."""
    if n == m:
        return 1.0 + 0.0j
    ln, lm = state.lam[n], state.lam[m]
    exponent = np.sum(ln.conj() * lm) - 0.5 * np.sum(np.abs(ln) ** 2) - 0.5 * np.sum(np.abs(lm) ** 2)
    return complex(np.exp(exponent))


def _as_k(model: Union[ExcitonMatrix, np.ndarray]) -> np.ndarray:
    """K in cm⁻¹; an ndarray may carry leading batch axes."""
    return model.k if isinstance(model, ExcitonMatrix) else np.asarray(model, dtype=float)


@dataclass(frozen=True)
class EquationsOfMotion:
    """Precomputed coefficients in rad/fs for one model, bath and sink."""
    k: np.ndarray
    omega: np.ndarray
    coupling: np.ndarray
    sink: Optional[np.ndarray]
    eps: float
    omega0: float

    @classmethod
    def build(
        cls,
        model: Union[ExcitonMatrix, np.ndarray],
        bath: PhononBath,
        sink: Optional[SinkSpec] = None,
        eps: float = DEFAULT_EPS,
    ) -> "EquationsOfMotion":
        k = _as_k(model) * CM1_TO_RAD_PER_FS
        n = k.shape[-1]
        if bath.n_modes != n:
            raise ValueError(f"bath has {bath.n_modes} modes for a {n}-site model")
        omega = bath.omega_q_rad
        coupling = bath.site_phases() * (bath.g_q * omega)[None, :] / math.sqrt(n)
        leak = None
        if sink is not None and sink.gamma > 0.0:
            leak = 0.5 * sink.gamma_rad(bath.omega0) * sink.matrix(n)
        return cls(k=k, omega=omega, coupling=coupling, sink=leak, eps=eps, omega0=bath.omega0_rad)

    @property
    def k_effective(self) -> np.ndarray:
        """K - i (gamma/2) Q, the generator of the exciton part."""
        return self.k if self.sink is None else self.k - 1j * self.sink

    def __call__(self, alpha: np.ndarray, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        s = debye_waller_matrix(lam)
        ks = self.k * s
        k_alpha = np.einsum("...nm,...m->...n", ks, alpha)
        omega_nq = -np.einsum("...nm,...mq->...nq", ks, alpha[..., :, None] * lam) + k_alpha[..., :, None] * lam
        inverse = alpha.conj() / (np.abs(alpha) ** 2 + self.eps)
        ratio = omega_nq * inverse[..., :, None]

        dlam = 1j * (ratio + self.coupling - self.omega * lam)
        r = np.sum((self.coupling - ratio) * lam.conj(), axis=-1).real
        dalpha = -1j * k_alpha + 1j * alpha * r
        if self.sink is not None:
            dalpha = dalpha - np.einsum("...nm,...m->...n", self.sink * s, alpha)
        return dalpha, dlam


def check_finite(alpha: np.ndarray, lam: np.ndarray) -> None:
    """Raise IntegrationError naming the first non-finite site/mode."""
    if not np.all(np.isfinite(alpha)):
        site = int(np.argwhere(~np.isfinite(alpha))[0][-1])
        raise IntegrationError("non-finite exciton amplitude", site=site)
    if not np.all(np.isfinite(lam)):
        where = np.argwhere(~np.isfinite(lam))[0]
        raise IntegrationError("non-finite phonon displacement", site=int(where[-2]), mode=int(where[-1]))


def eom_rhs(
    state: D1State,
    model: Union[ExcitonMatrix, np.ndarray],
    bath: PhononBath,
    sink: Optional[SinkSpec] = None,
    eps: float = DEFAULT_EPS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Time derivatives (dalpha/dt, dlam/dt) in 1/fs at ``state``.

    Raises:
        IntegrationError: if the state holds NaN or inf
    """
    check_finite(state.alpha, state.lam)
    return EquationsOfMotion.build(model, bath, sink, eps)(state.alpha, state.lam)
