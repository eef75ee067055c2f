"""
Davydov D1 trial state and the knobs of a propagation run.

    |D1(t)> = sum_n alpha_n(t) |n> exp( sum_q lambda_nq b_q^+ - h.c. ) |0>

Arrays may carry leading batch axes: alpha (..., N), lam (..., N, Nq).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from polaring.errors import ConfigError
from polaring.model.bath import PhononBath
from polaring.units import CM1_TO_RAD_PER_FS

DEFAULT_INITIAL_SITE = 8
STABILITY_LIMIT_RAD = 0.3


@dataclass(frozen=True)
class D1State:
    """Amplitudes alpha_n, displacements lambda_nq and the time in fs."""
    alpha: np.ndarray
    lam: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=complex)
        lam = np.asarray(self.lam, dtype=complex)
        if lam.shape[:-1] != alpha.shape:
            raise ValueError(f"lambda shape {lam.shape} does not match alpha shape {alpha.shape}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lam", lam)

    @property
    def n_sites(self) -> int:
        return self.alpha.shape[-1]

    @property
    def n_modes(self) -> int:
        return self.lam.shape[-1]

    def norm(self) -> np.ndarray:
        """sum_n |alpha_n|^2 (per batch member)."""
        return np.sum(np.abs(self.alpha) ** 2, axis=-1)

    def populations(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2

    def with_phase(self, theta: float) -> "D1State":
        return D1State(self.alpha * np.exp(1j * theta), self.lam, self.time)

    @classmethod
    def localized(cls, n_sites: int, site: int = DEFAULT_INITIAL_SITE, n_modes: Optional[int] = None) -> "D1State":
        """Exciton on one site, bath in its vacuum."""
        if not 0 <= site < n_sites:
            raise ValueError(f"initial site {site} outside [0, {n_sites})")
        alpha = np.zeros(n_sites, dtype=complex)
        alpha[site] = 1.0
        lam = np.zeros((n_sites, n_modes or n_sites), dtype=complex)
        return cls(alpha, lam, 0.0)

    @classmethod
    def from_amplitudes(cls, alpha: np.ndarray, n_modes: Optional[int] = None) -> "D1State":
        """Given exciton amplitudes with the bath in its vacuum."""
        alpha = np.asarray(alpha, dtype=complex)
        lam = np.zeros(alpha.shape + (n_modes or alpha.shape[-1],), dtype=complex)
        return cls(alpha, lam, 0.0)


@dataclass(frozen=True)
class SinkSpec:
    """Non-Hermitian trap -i (gamma/2) Q with gamma in units of omega0."""
    gamma: float = 0.1
    q_matrix: Optional[np.ndarray] = None
    site: int = 0

    def __post_init__(self):
        if not self.gamma >= 0.0:
            raise ValueError(f"sink rate must be >= 0, got {self.gamma}")
        if self.q_matrix is not None:
            q = np.array(self.q_matrix, dtype=float)
            if q.ndim != 2 or q.shape[0] != q.shape[1] or not np.allclose(q, q.T):
                raise ValueError("sink q_matrix must be square and symmetric")
            q.setflags(write=False)
            object.__setattr__(self, "q_matrix", q)

    def matrix(self, n_sites: int) -> np.ndarray:
        """Q; a projector on ``site`` unless an explicit matrix was given."""
        if self.q_matrix is not None:
            if self.q_matrix.shape != (n_sites, n_sites):
                raise ValueError(f"sink q_matrix must be {n_sites}x{n_sites}")
            return self.q_matrix
        if not 0 <= self.site < n_sites:
            raise ValueError(f"sink site {self.site} outside [0, {n_sites})")
        q = np.zeros((n_sites, n_sites))
        q[self.site, self.site] = 1.0
        return q

    def gamma_rad(self, omega0_cm1: float) -> float:
        return self.gamma * omega0_cm1 * CM1_TO_RAD_PER_FS


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step fourth-order Runge-Kutta settings."""
    dt: float = 0.05
    t_max: float = 300.0
    record_stride: int = 20
    regularization_eps: float = 1e-8
    method: str = field(default="rk4")

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigError(f"time step must be positive, got {self.dt}", "integrator", "dt_fs", "fs")
        if not self.t_max >= 0.0:
            raise ConfigError(f"t_max must be >= 0, got {self.t_max}", "integrator", "t_max_fs", "fs")
        if self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1", "integrator", "record_stride")
        if not self.regularization_eps > 0.0:
            raise ConfigError("regularization_eps must be positive", "integrator", "regularization_eps")
        if self.method != "rk4":
            raise ConfigError(f"unknown integrator method {self.method!r}", "integrator", "method")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def record_steps(self) -> np.ndarray:
        return np.arange(0, self.n_steps + 1, self.record_stride)

    @property
    def record_times(self) -> np.ndarray:
        return self.record_steps * self.dt

    def check_stability(self, bath: PhononBath) -> None:
        """Reject steps that advance the fastest mode by 0.3 rad or more."""
        phase = self.dt * bath.omega0 * (1.0 + bath.bandwidth_w) * CM1_TO_RAD_PER_FS
        if phase >= STABILITY_LIMIT_RAD:
            raise ConfigError(
                f"dt = {self.dt} fs advances the top phonon by {phase:.3f} rad per step "
                f"(limit {STABILITY_LIMIT_RAD}); use dt < "
                f"{STABILITY_LIMIT_RAD / (bath.omega0 * (1.0 + bath.bandwidth_w) * CM1_TO_RAD_PER_FS):.4f} fs",
                "integrator",
                "dt_fs",
                "fs",
            )


@dataclass(frozen=True)
class TrajectorySnapshot:
    """Recorded state; deviation and phonon energy in omega0 units."""
    time: float
    alpha: np.ndarray
    lam: np.ndarray
    deviation_amplitude: float
    phonon_energy: float = math.nan

    @property
    def state(self) -> D1State:
        return D1State(self.alpha, self.lam, self.time)
